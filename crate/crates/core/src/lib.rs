//! Semantic-guided image colorization toolkit.
//!
//! The crate is organized bottom-up:
//!
//! - [`color_space`]: sRGB <-> CIE Lab (D65) and lightness/chroma plane handling.
//! - [`chroma`]: the quantized ab grid, soft-encoding, color priors, rebalance
//!   weights and point-estimate decoding.
//! - [`loss`]: rebalanced colorization cross-entropy, weighted segmentation
//!   cross-entropy and their weighted sum, with analytic gradients.
//! - [`bilateral`]: joint bilateral filtering and joint bilateral upsampling.
//! - [`toynet`]: a small two-branch CNN (shared trunk, multipath deconvolution
//!   segmentation head, colorization head) with hand-written backpropagation.
//! - [`synth`]: a seeded synthetic shapes corpus where color follows object class.
//! - [`metrics`]: PSNR and mean IoU.
//! - [`pipeline`]: configured training runs.
//! - [`tensorfile`], [`run_config`], [`png_io`], [`corpus`]: on-disk formats.

pub mod bilateral;
pub mod chroma;
pub mod color_space;
pub mod corpus;
mod error;
pub mod loss;
pub mod metrics;
pub mod pipeline;
pub mod png_io;
pub mod resample;
pub mod run_config;
pub mod synth;
pub mod tensorfile;
pub mod toynet;

pub use bilateral::{BilateralParams, GuideImage};
pub use chroma::{ChromaDistributionMap, ChromaGrid, DecodeMode, EncodeParams, RebalanceWeights};
pub use color_space::{ChromaPlanes, LabImage, Plane, RgbImage};
pub use error::{Error, Result};
pub use loss::{LogitsMap, LossWeights, Reduction, SegClassWeights, SegLabelMap, SegLogitsMap};
pub use metrics::{IoUReport, Psnr};
pub use run_config::RunConfig;
pub use synth::{SynthSample, SynthSpec};
pub use tensorfile::Tensor;
pub use toynet::{ToyNet, ToyNetConfig, TrainReport};
