//! Quantized ab space: grid construction, soft-encoding, priors, rebalance
//! weights and decoding of predicted distributions back to chroma.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::color_space::{rgb_unit_to_lab, ChromaPlanes};
use crate::{Error, LabImage, Result};

/// Half-extent of the ab lattice in Lab units.
pub const AB_EXTENT: f64 = 110.0;

pub const DEFAULT_GRID_STEP: f64 = 10.0;
pub const DEFAULT_GAMUT_SAMPLES: usize = 18;

const NORM_TOL: f64 = 1e-6;

/// The set of in-gamut ab bin centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaGrid {
    grid_step: f64,
    centers: Vec<[f64; 2]>,
}

impl ChromaGrid {
    /// Builds the default grid (step 10, 18³ gamut samples).
    pub fn default_grid() -> Self {
        Self::build(DEFAULT_GRID_STEP, DEFAULT_GAMUT_SAMPLES)
            .expect("default grid parameters are valid")
    }

    /// Lattice centers `k * grid_step` with `|k * grid_step| <= 110` on both axes
    /// are kept when some sampled sRGB color lies within one diagonal lattice
    /// step (`grid_step * sqrt(2)`) of the center.
    ///
    /// The sRGB cube is sampled on a `gamut_samples³` lattice. Keeping every
    /// bin within a diagonal step of the gamut keeps all cells the gamut
    /// touches plus a one-cell margin; at step 10 this yields 313 bins for any
    /// sampling density from 18³ up.
    pub fn build(grid_step: f64, gamut_samples: usize) -> Result<Self> {
        if !(grid_step.is_finite() && grid_step > 0.0) {
            return Err(Error::invalid(format!("grid step must be positive, got {grid_step}")));
        }
        if gamut_samples < 2 {
            return Err(Error::invalid("gamut_samples must be at least 2"));
        }
        let gamut = sample_gamut(gamut_samples);
        let kmax = (AB_EXTENT / grid_step + 1e-9).floor() as i64;
        let reach2 = 2.0 * grid_step * grid_step * (1.0 + 1e-12);
        let mut centers = Vec::new();
        for ka in -kmax..=kmax {
            for kb in -kmax..=kmax {
                let c = [ka as f64 * grid_step, kb as f64 * grid_step];
                let hit = gamut.iter().any(|g| {
                    let da = g[0] - c[0];
                    let db = g[1] - c[1];
                    da * da + db * db <= reach2
                });
                if hit {
                    centers.push(c);
                }
            }
        }
        // A single achromatic bin cannot represent any color.
        if centers.len() < 2 {
            return Err(Error::EmptyGrid(grid_step));
        }
        Ok(Self { grid_step, centers })
    }

    pub fn from_centers(grid_step: f64, centers: Vec<[f64; 2]>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::EmptyGrid(grid_step));
        }
        if !(grid_step > 0.0) {
            return Err(Error::invalid("grid step must be positive"));
        }
        for (i, a) in centers.iter().enumerate() {
            if centers[..i].contains(a) {
                return Err(Error::invalid(format!("duplicate bin center {a:?}")));
            }
        }
        Ok(Self { grid_step, centers })
    }

    pub fn q(&self) -> usize {
        self.centers.len()
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    /// Index of the nearest center, lowest index on ties.
    pub fn nearest(&self, ab: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d = sq_dist(ab, *c);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Text form: `grid_step q` header then one `a b` line per center.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.grid_step, self.q());
        for c in &self.centers {
            let _ = writeln!(s, "{} {}", c[0], c[1]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Format("empty grid file".into()))?;
        let mut it = header.split_whitespace();
        let step: f64 = parse_field(it.next(), "grid_step")?;
        let q: usize = parse_field(it.next(), "q")?;
        let mut centers = Vec::with_capacity(q);
        for line in lines {
            let mut it = line.split_whitespace();
            let a: f64 = parse_field(it.next(), "a")?;
            let b: f64 = parse_field(it.next(), "b")?;
            centers.push([a, b]);
        }
        if centers.len() != q {
            return Err(Error::Format(format!(
                "grid header says {q} bins, found {}",
                centers.len()
            )));
        }
        Self::from_centers(step, centers)
    }
}

fn parse_field<T: FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad or missing {what}")))
}

fn sample_gamut(n: usize) -> Vec<[f64; 2]> {
    let step = 1.0 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n * n);
    for r in 0..n {
        for g in 0..n {
            for b in 0..n {
                let lab = rgb_unit_to_lab([r as f64 * step, g as f64 * step, b as f64 * step]);
                out.push([lab[1], lab[2]]);
            }
        }
    }
    out
}

#[inline]
fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let da = a[0] - b[0];
    let db = a[1] - b[1];
    da * da + db * db
}

/// Soft-encoding parameters: Gaussian of width `sigma` over the `k` nearest bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeParams {
    pub k: usize,
    pub sigma: f64,
}

impl Default for EncodeParams {
    fn default() -> Self {
        Self { k: 5, sigma: 5.0 }
    }
}

impl EncodeParams {
    pub fn new(k: usize, sigma: f64) -> Result<Self> {
        let p = Self { k, sigma };
        p.validate(usize::MAX)?;
        Ok(p)
    }

    fn validate(&self, q: usize) -> Result<()> {
        if self.k == 0 || self.k > q {
            return Err(Error::invalid(format!("k must be in 1..={q}, got {}", self.k)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Soft-encodes one ab pair into a dense probability vector of length `q`.
pub fn encode_soft(ab: [f64; 2], grid: &ChromaGrid, params: EncodeParams) -> Result<Vec<f64>> {
    params.validate(grid.q())?;
    let mut out = vec![0.0; grid.q()];
    encode_into(ab, grid, params, &mut out);
    Ok(out)
}

fn encode_into(ab: [f64; 2], grid: &ChromaGrid, params: EncodeParams, out: &mut [f64]) {
    let mut dist: Vec<(f64, usize)> = grid
        .centers
        .iter()
        .enumerate()
        .map(|(i, c)| (sq_dist(ab, *c), i))
        .collect();
    dist.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let nearest = &dist[..params.k];
    // Shift by the smallest distance so far-away colors do not underflow.
    let d0 = nearest[0].0;
    let denom = 2.0 * params.sigma * params.sigma;
    let weights: Vec<f64> = nearest.iter().map(|&(d, _)| (-(d - d0) / denom).exp()).collect();
    let total: f64 = weights.iter().sum();
    out.iter_mut().for_each(|v| *v = 0.0);
    for (&(_, i), w) in nearest.iter().zip(weights) {
        out[i] = w / total;
    }
}

/// Per-pixel probability vectors over the `q` bins, pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaDistributionMap {
    pub width: usize,
    pub height: usize,
    pub q: usize,
    pub probs: Vec<f64>,
}

impl ChromaDistributionMap {
    pub fn new(width: usize, height: usize, q: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != width * height * q {
            return Err(Error::shape(format!(
                "distribution {width}x{height}x{q} needs {} values, got {}",
                width * height * q,
                probs.len()
            )));
        }
        let map = Self {
            width,
            height,
            q,
            probs,
        };
        map.check_normalized()?;
        Ok(map)
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn row(&self, pixel: usize) -> &[f64] {
        &self.probs[pixel * self.q..(pixel + 1) * self.q]
    }

    pub fn check_normalized(&self) -> Result<()> {
        for (pixel, row) in self.probs.chunks_exact(self.q.max(1)).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORM_TOL || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::NotNormalized { pixel, sum });
            }
        }
        Ok(())
    }

    /// Averages `factor × factor` blocks of distributions; the result stays normalized.
    pub fn block_average(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.width % factor != 0 || self.height % factor != 0 {
            return Err(Error::shape(format!(
                "{}x{} is not divisible by {factor}",
                self.width, self.height
            )));
        }
        let (w, h, q) = (self.width / factor, self.height / factor, self.q);
        let mut probs = vec![0.0; w * h * q];
        let scale = 1.0 / (factor * factor) as f64;
        for y in 0..self.height {
            for x in 0..self.width {
                let dst = ((y / factor) * w + x / factor) * q;
                for (d, s) in probs[dst..dst + q].iter_mut().zip(self.row(y * self.width + x)) {
                    *d += s * scale;
                }
            }
        }
        Ok(Self {
            width: w,
            height: h,
            q,
            probs,
        })
    }
}

/// Soft-encodes every pixel of a chroma image.
pub fn encode_map(
    chroma: &ChromaPlanes,
    grid: &ChromaGrid,
    params: EncodeParams,
) -> Result<ChromaDistributionMap> {
    params.validate(grid.q())?;
    let q = grid.q();
    let n = chroma.width * chroma.height;
    let mut probs = vec![0.0; n * q];
    // Synthetic and flat regions repeat the same color many times.
    let mut cache: HashMap<(u64, u64), usize> = HashMap::new();
    for i in 0..n {
        let key = (chroma.a[i].to_bits(), chroma.b[i].to_bits());
        if let Some(&src) = cache.get(&key) {
            probs.copy_within(src * q..(src + 1) * q, i * q);
        } else {
            encode_into([chroma.a[i], chroma.b[i]], grid, params, &mut probs[i * q..(i + 1) * q]);
            cache.insert(key, i);
        }
    }
    Ok(ChromaDistributionMap {
        width: chroma.width,
        height: chroma.height,
        q,
        probs,
    })
}

/// Normalized histogram of soft-encoded chroma over every pixel of the dataset.
pub fn empirical_prior(
    dataset: &[LabImage],
    grid: &ChromaGrid,
    params: EncodeParams,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::invalid("empirical prior needs a non-empty dataset"));
    }
    let q = grid.q();
    let mut hist = vec![0.0; q];
    let mut count = 0usize;
    for img in dataset {
        let chroma = ChromaPlanes {
            width: img.width,
            height: img.height,
            a: img.a.clone(),
            b: img.b.clone(),
        };
        let dist = encode_map(&chroma, grid, params)?;
        for row in dist.probs.chunks_exact(q) {
            for (h, p) in hist.iter_mut().zip(row) {
                *h += p;
            }
        }
        count += img.len();
    }
    if count == 0 {
        return Err(Error::invalid("dataset has no pixels"));
    }
    let total: f64 = hist.iter().sum();
    hist.iter_mut().for_each(|h| *h /= total);
    Ok(hist)
}

/// Per-bin loss weights inversely related to prior mass.
#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceWeights {
    pub w: Vec<f64>,
    pub mix_lambda: f64,
}

impl RebalanceWeights {
    pub fn uniform(q: usize) -> Self {
        Self {
            w: vec![1.0; q],
            mix_lambda: 1.0,
        }
    }

    pub fn q(&self) -> usize {
        self.w.len()
    }
}

/// `w_q ∝ 1 / ((1-λ)·prior_q + λ/Q)`, scaled so that `Σ prior_q·w_q = 1`.
pub fn rebalance_weights(prior: &[f64], mix_lambda: f64) -> Result<RebalanceWeights> {
    if prior.is_empty() {
        return Err(Error::invalid("empty prior"));
    }
    if !(0.0..=1.0).contains(&mix_lambda) {
        return Err(Error::invalid(format!("mix_lambda must be in [0,1], got {mix_lambda}")));
    }
    let sum: f64 = prior.iter().sum();
    if (sum - 1.0).abs() > NORM_TOL || prior.iter().any(|p| *p < 0.0) {
        return Err(Error::NotNormalized { pixel: 0, sum });
    }
    let q = prior.len() as f64;
    let mut w = Vec::with_capacity(prior.len());
    for &p in prior {
        let mixed = (1.0 - mix_lambda) * p + mix_lambda / q;
        if mixed <= 0.0 {
            return Err(Error::invalid(
                "prior has zero-mass bins; use mix_lambda > 0 to smooth it",
            ));
        }
        w.push(1.0 / mixed);
    }
    let expectation: f64 = prior.iter().zip(&w).map(|(p, w)| p * w).sum();
    w.iter_mut().for_each(|v| *v /= expectation);
    Ok(RebalanceWeights { w, mix_lambda })
}

/// Point estimate used to turn a per-pixel distribution into one ab value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Mode,
    Mean,
    Annealed,
}

impl FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mode" => Ok(Self::Mode),
            "mean" => Ok(Self::Mean),
            "annealed" => Ok(Self::Annealed),
            other => Err(Error::invalid(format!(
                "unknown decode mode {other:?} (expected mode, mean or annealed)"
            ))),
        }
    }
}

impl std::fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mode => "mode",
            Self::Mean => "mean",
            Self::Annealed => "annealed",
        })
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 0.38;

pub fn decode_row(row: &[f64], grid: &ChromaGrid, mode: DecodeMode, temperature: f64) -> [f64; 2] {
    let centers = grid.centers();
    match mode {
        DecodeMode::Mode => {
            let mut best = 0;
            for (i, p) in row.iter().enumerate() {
                if *p > row[best] {
                    best = i;
                }
            }
            centers[best]
        }
        DecodeMode::Mean => weighted_center(row.iter().copied(), centers),
        DecodeMode::Annealed => {
            let inv_t = 1.0 / temperature;
            let max_log = row
                .iter()
                .filter(|p| **p > 0.0)
                .map(|p| p.ln() * inv_t)
                .fold(f64::NEG_INFINITY, f64::max);
            let tempered: Vec<f64> = row
                .iter()
                .map(|&p| {
                    if p > 0.0 {
                        (p.ln() * inv_t - max_log).exp()
                    } else {
                        0.0
                    }
                })
                .collect();
            let total: f64 = tempered.iter().sum();
            weighted_center(tempered.into_iter().map(|t| t / total), centers)
        }
    }
}

fn weighted_center(weights: impl Iterator<Item = f64>, centers: &[[f64; 2]]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (w, c) in weights.zip(centers) {
        out[0] += w * c[0];
        out[1] += w * c[1];
    }
    out
}

pub fn decode(
    dist: &ChromaDistributionMap,
    grid: &ChromaGrid,
    mode: DecodeMode,
    temperature: f64,
) -> Result<ChromaPlanes> {
    if dist.q != grid.q() {
        return Err(Error::shape(format!("distribution has {} bins, grid {}", dist.q, grid.q())));
    }
    if mode == DecodeMode::Annealed && !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    dist.check_normalized()?;
    let n = dist.pixels();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for p in 0..n {
        let ab = decode_row(dist.row(p), grid, mode, temperature);
        a.push(ab[0]);
        b.push(ab[1]);
    }
    Ok(ChromaPlanes {
        width: dist.width,
        height: dist.height,
        a,
        b,
    })
}
