//! Training objectives.
//!
//! Both cross-entropies take pre-softmax scores and return their gradient with
//! respect to those scores, with the softmax Jacobian folded in analytically.

use crate::chroma::{ChromaDistributionMap, RebalanceWeights};
use crate::{Error, Result};

/// Per-pixel pre-softmax scores, pixel-major (`data[pixel * channels + k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

pub type SegLogitsMap = LogitsMap;

impl LogitsMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::shape(format!(
                "logits {width}x{height}x{channels} need {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("logits must be finite"));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn row(&self, pixel: usize) -> &[f64] {
        &self.data[pixel * self.channels..(pixel + 1) * self.channels]
    }

    /// Row-wise softmax.
    pub fn softmax(&self) -> ChromaDistributionMap {
        let mut probs = self.data.clone();
        for row in probs.chunks_exact_mut(self.channels) {
            softmax_in_place(row);
        }
        ChromaDistributionMap {
            width: self.width,
            height: self.height,
            q: self.channels,
            probs,
        }
    }

    /// Per-pixel argmax, lowest index on ties.
    pub fn argmax(&self) -> Vec<usize> {
        self.data
            .chunks_exact(self.channels)
            .map(|row| {
                let mut best = 0;
                for (i, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Per-pixel object class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegLabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<usize>,
}

impl SegLabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::shape(format!(
                "label map {width}x{height} needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn check_classes(&self, n_classes: usize) -> Result<()> {
        match self.labels.iter().enumerate().find(|(_, l)| **l >= n_classes) {
            Some((pixel, &label)) => Err(Error::LabelOutOfRange {
                pixel,
                label,
                n_classes,
            }),
            None => Ok(()),
        }
    }
}

/// `λ_c` and `λ_s` of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_c: f64,
    pub lambda_s: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_c: 1.0,
            lambda_s: 100.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_c: f64, lambda_s: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(lambda_c) || !ok(lambda_s) {
            return Err(Error::invalid("loss weights must be finite and non-negative"));
        }
        if lambda_c == 0.0 && lambda_s == 0.0 {
            return Err(Error::invalid("lambda_c and lambda_s cannot both be zero"));
        }
        Ok(Self { lambda_c, lambda_s })
    }
}

/// Per-class segmentation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SegClassWeights {
    pub w: Vec<f64>,
}

impl SegClassWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("class weights must be positive and finite"));
        }
        Ok(Self { w })
    }

    pub fn uniform(n_classes: usize) -> Self {
        Self {
            w: vec![1.0; n_classes],
        }
    }

    /// Rarity weights from pixel class frequencies, smoothed toward uniform
    /// by `mix_lambda` the same way as the chroma rebalance weights.
    pub fn from_label_frequencies(maps: &[SegLabelMap], n_classes: usize, mix_lambda: f64) -> Result<Self> {
        let mut counts = vec![0u64; n_classes];
        for m in maps {
            m.check_classes(n_classes)?;
            for &c in &m.labels {
                counts[c] += 1;
            }
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid("no labeled pixels"));
        }
        let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(crate::chroma::rebalance_weights(&freq, mix_lambda)?.w)
    }
}

/// How per-pixel terms are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Sum over pixels.
    #[default]
    Sum,
    /// Sum divided by the pixel count.
    Mean,
}

impl Reduction {
    fn scale(self, pixels: usize) -> f64 {
        match self {
            Reduction::Sum => 1.0,
            Reduction::Mean => 1.0 / pixels as f64,
        }
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Rebalanced multinomial cross-entropy between `softmax(logits)` and a soft target.
///
/// Each pixel is weighted by `weights.w` at the argmax bin of its target row.
/// Returns the loss and its gradient with respect to `logits`.
pub fn colorization_loss(
    logits: &LogitsMap,
    target: &ChromaDistributionMap,
    weights: &RebalanceWeights,
    reduction: Reduction,
) -> Result<(f64, LogitsMap)> {
    if logits.width != target.width || logits.height != target.height || logits.channels != target.q
    {
        return Err(Error::shape(format!(
            "prediction {}x{}x{} vs target {}x{}x{}",
            logits.width, logits.height, logits.channels, target.width, target.height, target.q
        )));
    }
    if weights.q() != target.q {
        return Err(Error::shape(format!(
            "{} rebalance weights for {} bins",
            weights.q(),
            target.q
        )));
    }
    let q = target.q;
    let scale = reduction.scale(logits.pixels());
    let mut grad = LogitsMap::zeros(logits.width, logits.height, q);
    let mut loss = 0.0;
    for ((s, z), g) in logits
        .data
        .chunks_exact(q)
        .zip(target.probs.chunks_exact(q))
        .zip(grad.data.chunks_exact_mut(q))
    {
        let v = weights.w[argmax(z)] * scale;
        let lse = log_sum_exp(s);
        let z_sum: f64 = z.iter().sum();
        let mut term = 0.0;
        for k in 0..q {
            if z[k] != 0.0 {
                term += z[k] * (s[k] - lse);
            }
            g[k] = v * ((s[k] - lse).exp() * z_sum - z[k]);
        }
        loss -= v * term;
    }
    Ok((loss, grad))
}

/// Same objective evaluated on probabilities. Logits are taken as `ln(pred)`,
/// so a zero probability on a bin with target mass yields an infinite loss.
pub fn colorization_loss_from_probs(
    pred: &ChromaDistributionMap,
    target: &ChromaDistributionMap,
    weights: &RebalanceWeights,
    reduction: Reduction,
) -> Result<(f64, LogitsMap)> {
    if pred.width != target.width || pred.height != target.height || pred.q != target.q {
        return Err(Error::shape("prediction and target shapes differ"));
    }
    if weights.q() != target.q {
        return Err(Error::shape("rebalance weights do not match the bin count"));
    }
    let q = target.q;
    let scale = reduction.scale(pred.pixels());
    let mut grad = LogitsMap::zeros(pred.width, pred.height, q);
    let mut loss = 0.0;
    for ((p, z), g) in pred
        .probs
        .chunks_exact(q)
        .zip(target.probs.chunks_exact(q))
        .zip(grad.data.chunks_exact_mut(q))
    {
        let v = weights.w[argmax(z)] * scale;
        let z_sum: f64 = z.iter().sum();
        for k in 0..q {
            if z[k] != 0.0 {
                loss -= v * z[k] * p[k].ln();
            }
            g[k] = v * (p[k] * z_sum - z[k]);
        }
    }
    Ok((loss, grad))
}

/// Class-weighted softmax cross-entropy against hard labels.
pub fn segmentation_loss(
    logits: &SegLogitsMap,
    labels: &SegLabelMap,
    weights: &SegClassWeights,
    reduction: Reduction,
) -> Result<(f64, SegLogitsMap)> {
    if logits.width != labels.width || logits.height != labels.height {
        return Err(Error::shape(format!(
            "logits {}x{} vs labels {}x{}",
            logits.width, logits.height, labels.width, labels.height
        )));
    }
    let c = logits.channels;
    if weights.w.len() != c {
        return Err(Error::shape(format!("{} class weights for {c} classes", weights.w.len())));
    }
    labels.check_classes(c)?;
    let scale = reduction.scale(logits.pixels());
    let mut grad = LogitsMap::zeros(logits.width, logits.height, c);
    let mut loss = 0.0;
    for ((s, &label), g) in logits
        .data
        .chunks_exact(c)
        .zip(&labels.labels)
        .zip(grad.data.chunks_exact_mut(c))
    {
        let v = weights.w[label] * scale;
        let lse = log_sum_exp(s);
        loss -= v * (s[label] - lse);
        for k in 0..c {
            g[k] = v * (s[k] - lse).exp();
        }
        g[label] -= v;
    }
    Ok((loss, grad))
}

/// `λ_c·lc + λ_s·ls`.
pub fn total_loss(lc: f64, ls: f64, lw: LossWeights) -> f64 {
    lw.lambda_c * lc + lw.lambda_s * ls
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chroma::ChromaGrid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_hot_map(idx: &[usize], q: usize) -> ChromaDistributionMap {
        let mut probs = vec![0.0; idx.len() * q];
        for (p, &i) in idx.iter().enumerate() {
            probs[p * q + i] = 1.0;
        }
        ChromaDistributionMap::new(idx.len(), 1, q, probs).unwrap()
    }

    #[test]
    fn colorization_analytic_cases() {
        let target = one_hot_map(&[0], 2);
        let logits = LogitsMap::new(1, 1, 2, vec![0.0, 0.0]).unwrap();
        let (l, g) =
            colorization_loss(&logits, &target, &RebalanceWeights::uniform(2), Reduction::Sum)
                .unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((g.data[0] + 0.5).abs() < 1e-12 && (g.data[1] - 0.5).abs() < 1e-12);

        let probs = one_hot_map(&[1, 0], 3);
        let (l, _) = colorization_loss_from_probs(
            &probs,
            &probs,
            &RebalanceWeights::uniform(3),
            Reduction::Sum,
        )
        .unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn saturated_logits_give_near_zero_loss() {
        let logits = LogitsMap::new(1, 1, 3, vec![0.0, 100.0, 0.0]).unwrap();
        let (l, _) = colorization_loss(
            &logits,
            &one_hot_map(&[1], 3),
            &RebalanceWeights::uniform(3),
            Reduction::Sum,
        )
        .unwrap();
        assert!(l < 1e-6);
        let labels = SegLabelMap::new(1, 1, vec![1]).unwrap();
        let (l, _) =
            segmentation_loss(&logits, &labels, &SegClassWeights::uniform(3), Reduction::Sum)
                .unwrap();
        assert!(l < 1e-6);
    }

    #[test]
    fn segmentation_two_class_ln2() {
        let logits = LogitsMap::new(1, 1, 2, vec![0.0, 0.0]).unwrap();
        let labels = SegLabelMap::new(1, 1, vec![0]).unwrap();
        let (l, _) =
            segmentation_loss(&logits, &labels, &SegClassWeights::uniform(2), Reduction::Sum)
                .unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let logits = LogitsMap::zeros(2, 1, 3);
        let bad = SegLabelMap::new(2, 1, vec![0, 3]).unwrap();
        assert!(matches!(
            segmentation_loss(&logits, &bad, &SegClassWeights::uniform(3), Reduction::Sum),
            Err(Error::LabelOutOfRange { label: 3, .. })
        ));
        let target = one_hot_map(&[0], 3);
        assert!(colorization_loss(
            &logits,
            &target,
            &RebalanceWeights::uniform(3),
            Reduction::Sum
        )
        .is_err());
        assert!(LossWeights::new(0.0, 0.0).is_err());
        assert!(LossWeights::new(-1.0, 1.0).is_err());
        assert!(SegClassWeights::new(vec![1.0, 0.0]).is_err());
        assert!(LogitsMap::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn total_loss_cases() {
        assert_eq!(total_loss(2.5, 7.0, LossWeights::new(1.0, 0.0).unwrap()), 2.5);
        assert!((total_loss(2.0, 0.03, LossWeights::default()) - 5.0).abs() < 1e-12);
        let lw = LossWeights::new(0.7, 3.0).unwrap();
        let (a, b) = ((1.5, 0.2), (0.25, 4.0));
        let sum = total_loss(a.0 + b.0, a.1 + b.1, lw);
        assert!((sum - total_loss(a.0, a.1, lw) - total_loss(b.0, b.1, lw)).abs() < 1e-12);
    }

    #[test]
    fn zeroing_a_pixel_weight_removes_its_term() {
        // pixel 0 targets bin 0, pixel 1 targets bin 1
        let target = one_hot_map(&[0, 1], 2);
        let logits = LogitsMap::new(2, 1, 2, vec![0.3, -0.2, 1.1, 0.4]).unwrap();
        let full = RebalanceWeights {
            w: vec![1.0, 2.0],
            mix_lambda: 0.5,
        };
        let zeroed = RebalanceWeights {
            w: vec![1.0, 0.0],
            mix_lambda: 0.5,
        };
        let (l_full, _) = colorization_loss(&logits, &target, &full, Reduction::Sum).unwrap();
        let (l_zero, g) = colorization_loss(&logits, &target, &zeroed, Reduction::Sum).unwrap();
        let pixel1 = 2.0 * -(0.4 - log_sum_exp(&[1.1, 0.4]));
        assert!((l_full - l_zero - pixel1).abs() < 1e-12);
        assert!(g.data[2..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mean_reduction_divides_by_pixels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let logits =
            LogitsMap::new(3, 2, 4, (0..24).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let labels = SegLabelMap::new(3, 2, (0..6).map(|i| i % 4).collect()).unwrap();
        let w = SegClassWeights::uniform(4);
        let (s, gs) = segmentation_loss(&logits, &labels, &w, Reduction::Sum).unwrap();
        let (m, gm) = segmentation_loss(&logits, &labels, &w, Reduction::Mean).unwrap();
        assert!((s / 6.0 - m).abs() < 1e-12);
        for (a, b) in gs.data.iter().zip(&gm.data) {
            assert!((a / 6.0 - b).abs() < 1e-15);
        }
    }

    const FD_STEP: f64 = 1e-5;

    fn finite_difference(logits: &LogitsMap, f: impl Fn(&LogitsMap) -> f64) -> Vec<f64> {
        (0..logits.data.len())
            .map(|i| {
                let mut up = logits.clone();
                up.data[i] += FD_STEP;
                let mut down = logits.clone();
                down.data[i] -= FD_STEP;
                (f(&up) - f(&down)) / (2.0 * FD_STEP)
            })
            .collect()
    }

    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` in the 2-norm.
    ///
    /// Per-component ratios are not used: central-difference roundoff is about
    /// `ε·|L| / h`, which swamps components that are nearly zero.
    fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
        let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
        let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
        let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
        diff / scale
    }

    #[test]
    fn colorization_gradient_matches_finite_difference() {
        let grid = ChromaGrid::default_grid();
        let q = grid.q();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 16 * q;
        let logits = LogitsMap::new(4, 4, q, (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
        let mut probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        for row in probs.chunks_exact_mut(q) {
            row[rng.gen_range(0..q)] = 0.0;
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= z);
        }
        let target = ChromaDistributionMap::new(4, 4, q, probs).unwrap();
        let w = RebalanceWeights {
            w: (0..q).map(|_| rng.gen_range(0.2..3.0)).collect(),
            mix_lambda: 0.5,
        };
        for red in [Reduction::Sum, Reduction::Mean] {
            let (_, g) = colorization_loss(&logits, &target, &w, red).unwrap();
            let num = finite_difference(&logits, |l| colorization_loss(l, &target, &w, red).unwrap().0);
            let err = relative_error(&g.data, &num);
            assert!(err < 1e-6, "{red:?}: relative error {err:e}");
        }
    }

    #[test]
    fn segmentation_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let logits = LogitsMap::new(4, 4, 5, (0..80).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
        let labels = SegLabelMap::new(4, 4, (0..16).map(|_| rng.gen_range(0..5)).collect()).unwrap();
        let w = SegClassWeights::new(vec![0.3, 1.0, 4.0, 0.7, 2.2]).unwrap();
        for red in [Reduction::Sum, Reduction::Mean] {
            let (_, g) = segmentation_loss(&logits, &labels, &w, red).unwrap();
            let num = finite_difference(&logits, |l| segmentation_loss(l, &labels, &w, red).unwrap().0);
            let err = relative_error(&g.data, &num);
            assert!(err < 1e-6, "{red:?}: relative error {err:e}");
        }
    }

    #[test]
    fn class_frequency_weights_favor_rare_classes() {
        let maps = [SegLabelMap::new(4, 2, vec![0, 0, 0, 0, 0, 0, 1, 2]).unwrap()];
        let w = SegClassWeights::from_label_frequencies(&maps, 3, 0.5).unwrap();
        // frequencies 3/4, 1/8, 1/8; raw weights 1/(f/2 + 1/6)
        let raw = [1.0 / (0.375 + 1.0 / 6.0), 1.0 / (0.0625 + 1.0 / 6.0), 1.0 / (0.0625 + 1.0 / 6.0)];
        let norm = 0.75 * raw[0] + 0.125 * raw[1] + 0.125 * raw[2];
        for (got, r) in w.w.iter().zip(raw) {
            assert!((got - r / norm).abs() < 1e-12);
        }
        assert!(w.w[1] > w.w[0]);
        assert!(SegClassWeights::from_label_frequencies(&maps, 4, 0.0).is_err());
        assert!(SegClassWeights::from_label_frequencies(&maps, 2, 0.5).is_err());
        assert!(SegClassWeights::from_label_frequencies(&[], 2, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn losses_nonnegative_and_homogeneous(
            raw in proptest::collection::vec(-5.0f64..5.0, 12),
            tgt in proptest::collection::vec(0.01f64..1.0, 12),
            c in 0.1f64..10.0,
        ) {
            let logits = LogitsMap::new(2, 2, 3, raw).unwrap();
            let mut probs = tgt;
            for row in probs.chunks_exact_mut(3) {
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= z);
            }
            let target = ChromaDistributionMap::new(2, 2, 3, probs).unwrap();
            let unit = RebalanceWeights::uniform(3);
            let (l1, _) = colorization_loss(&logits, &target, &unit, Reduction::Sum).unwrap();
            prop_assert!(l1 >= 0.0);
            let scaled = RebalanceWeights { w: vec![c; 3], mix_lambda: 0.5 };
            let (lc, _) = colorization_loss(&logits, &target, &scaled, Reduction::Sum).unwrap();
            prop_assert!((lc - c * l1).abs() <= 1e-9 * lc.abs().max(1.0));

            let labels = SegLabelMap::new(2, 2, vec![0, 1, 2, 1]).unwrap();
            let (ls, _) = segmentation_loss(&logits, &labels, &SegClassWeights::uniform(3), Reduction::Sum).unwrap();
            prop_assert!(ls >= 0.0);
        }
    }
}
