//! Full-resolution colorization with the trained network.

use super::ToyNet;
use crate::bilateral::{joint_bilateral_upsample, BilateralParams, GuideImage};
use crate::chroma::{decode, ChromaGrid, DecodeMode, DEFAULT_TEMPERATURE};
use crate::color_space::{merge_channels, ChromaPlanes, LabImage, Plane};
use crate::loss::SegLabelMap;
use crate::resample::{area_plane, bilinear_chroma};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferOptions {
    pub decode_mode: DecodeMode,
    pub temperature: f64,
    /// Edge-aware upsampling when set, bilinear otherwise.
    pub jbu: Option<BilateralParams>,
}

impl Default for InferOptions {
    fn default() -> Self {
        Self {
            decode_mode: DecodeMode::Annealed,
            temperature: DEFAULT_TEMPERATURE,
            jbu: Some(BilateralParams::default()),
        }
    }
}

/// Brings low-resolution chroma to the resolution of `lightness`, guided by
/// it when `jbu` is set.
pub fn upsample_chroma(
    low: &ChromaPlanes,
    lightness: &Plane,
    jbu: Option<&BilateralParams>,
) -> Result<ChromaPlanes> {
    match jbu {
        Some(params) => joint_bilateral_upsample(low, &GuideImage::from_lightness(lightness), params),
        None => bilinear_chroma(low, lightness.width, lightness.height),
    }
}

fn network_input(net: &ToyNet, lightness: &Plane) -> Result<Plane> {
    let s = net.config().input_size;
    if lightness.width < s || lightness.height < s {
        return Err(Error::shape(format!(
            "image {}x{} is smaller than the network input {s}x{s}",
            lightness.width, lightness.height
        )));
    }
    if lightness.width == s && lightness.height == s {
        return Ok(lightness.clone());
    }
    area_plane(lightness, s, s)
}

/// Predicts chroma for a lightness plane of any size at least the network
/// input. The original lightness is kept untouched in the output.
pub fn infer_color(
    net: &ToyNet,
    lightness: &Plane,
    grid: &ChromaGrid,
    opts: &InferOptions,
) -> Result<LabImage> {
    if grid.q() != net.config().q {
        return Err(Error::shape(format!(
            "network predicts {} bins, grid has {}",
            net.config().q,
            grid.q()
        )));
    }
    let input = network_input(net, lightness)?;
    let (dist, _) = net.forward(&input)?;
    let low = decode(&dist, grid, opts.decode_mode, opts.temperature)?;
    let chroma = upsample_chroma(&low, lightness, opts.jbu.as_ref())?;
    merge_channels(lightness, &chroma)
}

/// Argmax segmentation at network resolution.
pub fn predict_segmentation(net: &ToyNet, lightness: &Plane) -> Result<SegLabelMap> {
    let input = network_input(net, lightness)?;
    let (_, logits) = net.forward(&input)?;
    SegLabelMap::new(logits.width, logits.height, logits.argmax())
}
