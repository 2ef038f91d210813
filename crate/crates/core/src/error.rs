use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("chroma grid is empty (grid step {0} too large for the gamut)")]
    EmptyGrid(f64),

    #[error("distribution at pixel {pixel} is not normalized (sum {sum})")]
    NotNormalized { pixel: usize, sum: f64 },

    #[error("label {label} at pixel {pixel} is out of range for {n_classes} classes")]
    LabelOutOfRange {
        pixel: usize,
        label: usize,
        n_classes: usize,
    },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged {
        epoch: usize,
        /// Epochs completed before the failure.
        report: Box<crate::toynet::TrainReport>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("png decode: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("png encode: {0}")]
    PngEncode(#[from] png::EncodingError),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
