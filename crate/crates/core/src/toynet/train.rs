//! Per-sample SGD on the joint objective and held-out evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Gradients, LossBreakdown, Objective, ToyNet};
use crate::chroma::{encode_map, ChromaDistributionMap, ChromaGrid, EncodeParams, RebalanceWeights};
use crate::color_space::{split_channels, Plane};
use crate::loss::{colorization_loss, LossWeights, Reduction, SegClassWeights, SegLabelMap};
use crate::metrics::{ConfusionCounts, IoUReport};
use crate::synth::SynthSample;
use crate::{Error, Result};

/// One training example at network resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub lightness: Plane,
    /// Soft-encoded chroma at the colorization head's resolution.
    pub target: ChromaDistributionMap,
    pub labels: SegLabelMap,
}

impl TrainSample {
    /// Soft-encodes the sample's chroma at full resolution and averages the
    /// distributions over `stride × stride` blocks.
    pub fn from_synth(
        sample: &SynthSample,
        grid: &ChromaGrid,
        params: EncodeParams,
        stride: usize,
    ) -> Result<Self> {
        let (lightness, chroma) = split_channels(&sample.lab);
        let target = encode_map(&chroma, grid, params)?.block_average(stride)?;
        Ok(Self {
            lightness,
            target,
            labels: sample.labels.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub weights: LossWeights,
    pub reduction: Reduction,
    /// Samples whose gradients are averaged into one update.
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

/// Mean per-sample losses over one epoch, measured before each update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub color: f64,
    pub seg: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Mean per-pixel unweighted cross-entropy of the chroma distribution.
    pub color_ce: f64,
    /// Mean IoU of the argmax segmentation, counted over the whole set.
    pub iou: IoUReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub held_out: Option<EvalReport>,
}

impl TrainReport {
    /// One header line, then one whitespace-separated row per epoch.
    pub fn table(&self) -> String {
        let mut out = String::from("epoch color seg total\n");
        for e in &self.epochs {
            out.push_str(&format!("{} {:.6} {:.6} {:.6}\n", e.epoch, e.color, e.seg, e.total));
        }
        out
    }
}

/// Trains `net` in place. Stops with [`Error::Diverged`] as soon as a loss
/// becomes non-finite; the error carries the epochs completed so far.
pub fn train(
    net: &mut ToyNet,
    data: &[TrainSample],
    held_out: &[TrainSample],
    rebalance: &RebalanceWeights,
    seg_weights: &SegClassWeights,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if !(opts.lr >= 0.0 && opts.lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be non-negative, got {}", opts.lr)));
    }
    if opts.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let obj = Objective {
        weights: opts.weights,
        rebalance,
        seg_weights,
        reduction: opts.reduction,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport {
        epochs: Vec::with_capacity(opts.epochs),
        held_out: None,
    };
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        // per-sample losses, summed in index order so the curve does not depend on the shuffle
        let mut losses = vec![LossBreakdown::default(); data.len()];
        for batch in order.chunks(opts.batch_size) {
            let mut sum: Option<Gradients> = None;
            for &i in batch {
                let s = &data[i];
                let (loss, grads) = net.backward(&s.lightness, &s.target, &s.labels, &obj)?;
                if !loss.total.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        report: Box::new(report),
                    });
                }
                losses[i] = loss;
                match sum.as_mut() {
                    Some(acc) => acc.add(&grads),
                    None => sum = Some(grads),
                }
            }
            if let Some(g) = sum {
                net.apply_sgd(&g, opts.lr / batch.len() as f64);
            }
        }
        let n = data.len() as f64;
        report.epochs.push(EpochStats {
            epoch,
            color: losses.iter().map(|l| l.color).sum::<f64>() / n,
            seg: losses.iter().map(|l| l.seg).sum::<f64>() / n,
            total: losses.iter().map(|l| l.total).sum::<f64>() / n,
        });
    }
    if !held_out.is_empty() {
        report.held_out = Some(evaluate(net, held_out)?);
    }
    Ok(report)
}

/// Unweighted chroma cross-entropy and segmentation mIoU over `samples`.
pub fn evaluate(net: &ToyNet, samples: &[TrainSample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    let uniform = RebalanceWeights::uniform(net.config().q);
    let mut counts = ConfusionCounts::new(net.config().n_classes);
    let mut ce = 0.0;
    for s in samples {
        let cache = net.forward_cached(&s.lightness)?;
        ce += colorization_loss(&cache.color_logits, &s.target, &uniform, Reduction::Mean)?.0;
        let pred = SegLabelMap::new(
            cache.seg_logits.width,
            cache.seg_logits.height,
            cache.seg_logits.argmax(),
        )?;
        counts.add(&pred, &s.labels)?;
    }
    Ok(EvalReport {
        color_ce: ce / samples.len() as f64,
        iou: counts.report(),
    })
}
