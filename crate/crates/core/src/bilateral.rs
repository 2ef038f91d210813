//! Joint bilateral filtering and joint bilateral upsampling of chroma planes.
//!
//! Both operations weight each window sample by a Gaussian of its spatial
//! distance (`sigma_s`) times a Gaussian of the guide intensity difference
//! (`sigma_r`), then normalize by the sum of weights. Guide intensities live on
//! the 8-bit scale `[0, 255]`, so lightness `L` enters as `2.55 * L`.

use crate::color_space::{ChromaPlanes, Plane};
use crate::resample::source_coord;
use crate::{Error, Result};

pub const DEFAULT_SIGMA_S: f64 = 3.0;
pub const DEFAULT_SIGMA_R: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilateralParams {
    /// Spatial Gaussian width, in (low-resolution) pixels.
    pub sigma_s: f64,
    /// Range Gaussian width, in 8-bit intensity units.
    pub sigma_r: f64,
    /// Window half-width.
    pub radius: usize,
}

impl Default for BilateralParams {
    fn default() -> Self {
        Self::new(DEFAULT_SIGMA_S, DEFAULT_SIGMA_R).expect("default parameters are valid")
    }
}

impl BilateralParams {
    /// Window radius defaults to `ceil(3 * sigma_s)`.
    pub fn new(sigma_s: f64, sigma_r: f64) -> Result<Self> {
        Self::with_radius(sigma_s, sigma_r, (3.0 * sigma_s).ceil().max(1.0) as usize)
    }

    pub fn with_radius(sigma_s: f64, sigma_r: f64, radius: usize) -> Result<Self> {
        if !(sigma_s > 0.0 && sigma_s.is_finite()) {
            return Err(Error::invalid(format!("sigma_s must be positive, got {sigma_s}")));
        }
        if !(sigma_r > 0.0 && sigma_r.is_finite()) {
            return Err(Error::invalid(format!("sigma_r must be positive, got {sigma_r}")));
        }
        if radius == 0 {
            return Err(Error::invalid("radius must be at least 1"));
        }
        Ok(Self {
            sigma_s,
            sigma_r,
            radius,
        })
    }
}

/// Full-resolution guidance intensities on the 8-bit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideImage {
    pub width: usize,
    pub height: usize,
    pub intensity: Vec<f64>,
}

impl GuideImage {
    pub fn new(width: usize, height: usize, intensity: Vec<f64>) -> Result<Self> {
        if intensity.len() != width * height {
            return Err(Error::shape(format!(
                "guide {width}x{height} needs {} values, got {}",
                width * height,
                intensity.len()
            )));
        }
        if intensity.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("guide intensities must be finite"));
        }
        Ok(Self {
            width,
            height,
            intensity,
        })
    }

    /// Scales lightness `[0,100]` to `[0,255]`.
    pub fn from_lightness(l: &Plane) -> Self {
        Self {
            width: l.width,
            height: l.height,
            intensity: l.data.iter().map(|v| v * 2.55).collect(),
        }
    }

    pub fn from_gray_u8(width: usize, height: usize, gray: &[u8]) -> Result<Self> {
        Self::new(width, height, gray.iter().map(|&g| g as f64).collect())
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.intensity[y * self.width + x]
    }
}

#[inline]
fn gaussian(d2: f64, sigma: f64) -> f64 {
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Joint bilateral filter of both chroma planes against a same-size guide.
/// The window is clamped at the image borders.
pub fn joint_bilateral_filter(
    chroma: &ChromaPlanes,
    guide: &GuideImage,
    params: &BilateralParams,
) -> Result<ChromaPlanes> {
    let (w, h) = (chroma.width, chroma.height);
    if guide.width != w || guide.height != h {
        return Err(Error::shape(format!(
            "chroma {w}x{h} vs guide {}x{}",
            guide.width, guide.height
        )));
    }
    let r = params.radius as isize;
    let side = 2 * params.radius + 1;
    let spatial: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx * dx + dy * dy) as f64))
        .map(|d2| gaussian(d2, params.sigma_s))
        .collect();
    let range_denom = 2.0 * params.sigma_r * params.sigma_r;

    let mut out_a = vec![0.0; w * h];
    let mut out_b = vec![0.0; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(params.radius);
        let y1 = (y + params.radius).min(h - 1);
        for x in 0..w {
            let x0 = x.saturating_sub(params.radius);
            let x1 = (x + params.radius).min(w - 1);
            let center = guide.at(x, y);
            let (mut sa, mut sb, mut k) = (0.0, 0.0, 0.0);
            for qy in y0..=y1 {
                let srow = (qy + params.radius - y) * side;
                let row = qy * w;
                for qx in x0..=x1 {
                    let d = center - guide.intensity[row + qx];
                    let wgt = spatial[srow + qx + params.radius - x] * (-d * d / range_denom).exp();
                    sa += wgt * chroma.a[row + qx];
                    sb += wgt * chroma.b[row + qx];
                    k += wgt;
                }
            }
            out_a[y * w + x] = sa / k;
            out_b[y * w + x] = sb / k;
        }
    }
    ChromaPlanes::new(w, h, out_a, out_b)
}

/// Per-axis precomputation for the upsampler.
struct AxisPlan {
    /// Inclusive low-res window `[lo, hi]` for each high-res coordinate.
    window: Vec<(usize, usize)>,
    /// Spatial weights for each window entry, flattened; `offset[x]` indexes the start.
    weights: Vec<f64>,
    offset: Vec<usize>,
    /// High-res guide coordinate sampled for each low-res index.
    guide_at: Vec<usize>,
}

fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

fn plan_axis(len_lo: usize, len_hi: usize, params: &BilateralParams) -> AxisPlan {
    let scale = len_hi as f64 / len_lo as f64;
    let radius = params.radius as f64;
    let last = (len_lo - 1) as f64;
    let mut window = Vec::with_capacity(len_hi);
    let mut weights = Vec::new();
    let mut offset = Vec::with_capacity(len_hi);
    for x in 0..len_hi {
        let p = source_coord(x, scale);
        let lo = (p - radius).ceil().clamp(0.0, last) as usize;
        let hi = (p + radius).floor().clamp(0.0, last) as usize;
        offset.push(weights.len());
        for q in lo..=hi {
            let d = p - q as f64;
            weights.push(gaussian(d * d, params.sigma_s));
        }
        window.push((lo, hi));
    }
    let guide_at = (0..len_lo)
        .map(|q| {
            round_half_up((q as f64 + 0.5) * scale - 0.5).clamp(0.0, (len_hi - 1) as f64) as usize
        })
        .collect();
    AxisPlan {
        window,
        weights,
        offset,
        guide_at,
    }
}

/// Joint bilateral upsampling of low-resolution chroma to the guide's resolution.
///
/// High-res pixel `p` maps to the fractional low-res coordinate
/// `p↓ = (p + 0.5) / s - 0.5` per axis. Low-res samples `q↓` with
/// `|q↓ - p↓| <= radius` on both axes contribute with the spatial Gaussian of
/// `‖p↓ - q↓‖` (low-res pixel units) times the range Gaussian between the
/// guide at `p` and the guide at the high-res pixel nearest to `q↓`.
pub fn joint_bilateral_upsample(
    low: &ChromaPlanes,
    guide: &GuideImage,
    params: &BilateralParams,
) -> Result<ChromaPlanes> {
    if low.width == 0 || low.height == 0 {
        return Err(Error::shape("low-resolution chroma is empty"));
    }
    if guide.width < low.width || guide.height < low.height {
        return Err(Error::shape(format!(
            "guide {}x{} is smaller than chroma {}x{}",
            guide.width, guide.height, low.width, low.height
        )));
    }
    let (w_hi, h_hi) = (guide.width, guide.height);
    let xp = plan_axis(low.width, w_hi, params);
    let yp = plan_axis(low.height, h_hi, params);
    let range_denom = 2.0 * params.sigma_r * params.sigma_r;
    let w_lo = low.width;

    let mut out_a = vec![0.0; w_hi * h_hi];
    let mut out_b = vec![0.0; w_hi * h_hi];
    for y in 0..h_hi {
        let (qy0, qy1) = yp.window[y];
        let wy = &yp.weights[yp.offset[y]..];
        for x in 0..w_hi {
            let (qx0, qx1) = xp.window[x];
            let wx = &xp.weights[xp.offset[x]..];
            let center = guide.at(x, y);
            let (mut sa, mut sb, mut k) = (0.0, 0.0, 0.0);
            for qy in qy0..=qy1 {
                let fy = wy[qy - qy0];
                let gy = yp.guide_at[qy];
                for qx in qx0..=qx1 {
                    let d = center - guide.at(xp.guide_at[qx], gy);
                    let wgt = fy * wx[qx - qx0] * (-d * d / range_denom).exp();
                    let i = qy * w_lo + qx;
                    sa += wgt * low.a[i];
                    sb += wgt * low.b[i];
                    k += wgt;
                }
            }
            out_a[y * w_hi + x] = sa / k;
            out_b[y * w_hi + x] = sb / k;
        }
    }
    ChromaPlanes::new(w_hi, h_hi, out_a, out_b)
}

/// Widest per-row count of pixels strictly between 10% and 90% of the
/// `low -> high` step.
pub fn edge_transition_width(values: &[f64], width: usize, low: f64, high: f64) -> usize {
    let (a, b) = (low + 0.1 * (high - low), low + 0.9 * (high - low));
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    values
        .chunks_exact(width)
        .map(|row| row.iter().filter(|v| **v > lo && **v < hi).count())
        .max()
        .unwrap_or(0)
}
