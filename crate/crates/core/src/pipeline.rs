//! Training runs driven by a [`RunConfig`]: grid, priors, class weights,
//! network construction and SGD.

use crate::chroma::{empirical_prior, rebalance_weights, ChromaGrid, RebalanceWeights};
use crate::loss::{Reduction, SegClassWeights};
use crate::run_config::RunConfig;
use crate::synth::SynthSample;
use crate::toynet::{train, InferOptions, ToyNet, ToyNetConfig, TrainOptions, TrainReport, TrainSample};
use crate::{Error, Result};

/// Samples per SGD update.
pub const BATCH_SIZE: usize = 1;

/// Everything derived from the training set before the first update.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub grid: ChromaGrid,
    pub rebalance: RebalanceWeights,
    pub seg_weights: SegClassWeights,
}

impl Setup {
    pub fn new(cfg: &RunConfig, train_set: &[SynthSample], n_classes: usize) -> Result<Self> {
        if train_set.is_empty() {
            return Err(Error::invalid("training set is empty"));
        }
        let grid = ChromaGrid::default_grid();
        let labs: Vec<_> = train_set.iter().map(|s| s.lab.clone()).collect();
        let prior = empirical_prior(&labs, &grid, cfg.encode_params()?)?;
        let rebalance = rebalance_weights(&prior, cfg.mix_lambda)?;
        let labels: Vec<_> = train_set.iter().map(|s| s.labels.clone()).collect();
        let seg_weights = SegClassWeights::from_label_frequencies(&labels, n_classes, cfg.mix_lambda)?;
        Ok(Self {
            grid,
            rebalance,
            seg_weights,
        })
    }

    pub fn samples(&self, cfg: &RunConfig, samples: &[SynthSample], net: &ToyNetConfig) -> Result<Vec<TrainSample>> {
        samples
            .iter()
            .map(|s| {
                if (s.lab.width, s.lab.height) != (net.input_size, net.input_size) {
                    return Err(Error::shape(format!(
                        "corpus images are {}x{}, input_size is {}",
                        s.lab.width, s.lab.height, net.input_size
                    )));
                }
                TrainSample::from_synth(s, &self.grid, cfg.encode_params()?, net.color_head_stride)
            })
            .collect()
    }
}

impl RunConfig {
    pub fn net_config(&self, n_classes: usize, q: usize) -> ToyNetConfig {
        ToyNetConfig {
            input_size: self.input_size,
            n_classes,
            q,
            seed: self.seed,
            ..ToyNetConfig::default()
        }
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        Ok(TrainOptions {
            epochs: self.epochs,
            lr: self.lr,
            weights: self.loss_weights()?,
            reduction: Reduction::Mean,
            batch_size: BATCH_SIZE,
            seed: self.seed,
        })
    }

    pub fn infer_options(&self, jbu: bool) -> Result<InferOptions> {
        Ok(InferOptions {
            decode_mode: self.decode_mode,
            temperature: self.temperature,
            jbu: if jbu { Some(self.bilateral_params()?) } else { None },
        })
    }
}

/// Builds and trains a network on `train_set`, evaluating on `held_out` when
/// it is non-empty.
pub fn train_run(
    cfg: &RunConfig,
    n_classes: usize,
    train_set: &[SynthSample],
    held_out: &[SynthSample],
) -> Result<(ToyNet, TrainReport)> {
    cfg.validate()?;
    let setup = Setup::new(cfg, train_set, n_classes)?;
    let net_cfg = cfg.net_config(n_classes, setup.grid.q());
    let data = setup.samples(cfg, train_set, &net_cfg)?;
    let eval = setup.samples(cfg, held_out, &net_cfg)?;
    let mut net = ToyNet::build(net_cfg)?;
    let report = train(
        &mut net,
        &data,
        &eval,
        &setup.rebalance,
        &setup.seg_weights,
        &cfg.train_options()?,
    )?;
    Ok((net, report))
}
