//! A small two-branch CNN with hand-written backpropagation.
//!
//! A shared trunk of seven 3×3 convolutions (three of them stride 2) feeds two
//! heads. The segmentation head upsamples each of the last three trunk
//! activations back to input resolution with its own transposed convolution,
//! concatenates them and classifies every pixel with a 1×1 convolution. The
//! colorization head upsamples the final trunk activation to
//! `input_size / color_head_stride` and predicts a distribution over the `q`
//! chroma bins.

mod checkpoint;
mod infer;
pub mod layers;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chroma::{ChromaDistributionMap, RebalanceWeights};
use crate::color_space::Plane;
use crate::loss::{
    colorization_loss, segmentation_loss, LogitsMap, LossWeights, Reduction, SegClassWeights,
    SegLabelMap, SegLogitsMap,
};
use crate::{Error, Result};
use layers::{FeatureMap, Layer, LayerGrad, LayerKind};

pub use infer::{infer_color, predict_segmentation, upsample_chroma, InferOptions};
pub use train::{evaluate, train, EpochStats, EvalReport, TrainOptions, TrainReport, TrainSample};

const N_TRUNK: usize = 7;
const SEG_UP: usize = N_TRUNK;
const SEG_OUT: usize = SEG_UP + 3;
const COLOR_UP: usize = SEG_OUT + 1;
const COLOR_OUT: usize = COLOR_UP + 1;
const TRUNK_STRIDES: [usize; N_TRUNK] = [1, 2, 2, 2, 1, 1, 1];

#[derive(Debug, Clone, PartialEq)]
pub struct ToyNetConfig {
    /// Side length of the square input; a multiple of 8.
    pub input_size: usize,
    /// Output channels of the seven trunk convolutions.
    pub channels: [usize; N_TRUNK],
    /// Channels of each segmentation upsampling path.
    pub seg_channels: usize,
    /// Channels of the colorization upsampling layer.
    pub color_channels: usize,
    /// Colorization output is `input_size / color_head_stride` on a side.
    pub color_head_stride: usize,
    /// Transposed convolution kernel is `factor * stride` (1 or 2).
    pub deconv_kernel_factor: usize,
    pub n_classes: usize,
    pub q: usize,
    pub seed: u64,
}

impl Default for ToyNetConfig {
    fn default() -> Self {
        Self {
            input_size: 32,
            channels: [8, 16, 16, 32, 32, 32, 32],
            seg_channels: 8,
            color_channels: 32,
            color_head_stride: 4,
            deconv_kernel_factor: 2,
            n_classes: 4,
            q: 313,
            seed: 1,
        }
    }
}

impl ToyNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 8 != 0 {
            return Err(Error::invalid(format!(
                "input_size must be a positive multiple of 8, got {}",
                self.input_size
            )));
        }
        if self.channels.contains(&0) || self.seg_channels == 0 || self.color_channels == 0 {
            return Err(Error::invalid("channel counts must be positive"));
        }
        if ![1, 2, 4, 8].contains(&self.color_head_stride) {
            return Err(Error::invalid(format!(
                "color_head_stride must be 1, 2, 4 or 8, got {}",
                self.color_head_stride
            )));
        }
        if ![1, 2].contains(&self.deconv_kernel_factor) {
            return Err(Error::invalid("deconv_kernel_factor must be 1 or 2"));
        }
        if self.n_classes < 2 || self.q < 2 {
            return Err(Error::invalid("need at least two classes and two chroma bins"));
        }
        Ok(())
    }

    pub fn color_size(&self) -> usize {
        self.input_size / self.color_head_stride
    }

    fn upsampler(&self, name: &str, in_ch: usize, out_ch: usize, factor: usize) -> Layer {
        let (kernel, pad) = if factor == 1 {
            let k = 2 * self.deconv_kernel_factor - 1;
            (k, k / 2)
        } else {
            let k = self.deconv_kernel_factor * factor;
            (k, (k - factor) / 2)
        };
        Layer::new(name, LayerKind::Deconv, in_ch, out_ch, kernel, factor, pad)
    }
}

/// Per-term loss values of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub color: f64,
    pub seg: f64,
    pub total: f64,
}

/// Everything the joint objective needs besides the network and the sample.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub weights: LossWeights,
    pub rebalance: &'a RebalanceWeights,
    pub seg_weights: &'a SegClassWeights,
    pub reduction: Reduction,
}

/// Parameter gradients, aligned with [`ToyNet::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|g| g.weight.iter().chain(&g.bias).copied())
            .collect()
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: FeatureMap,
    trunk: Vec<FeatureMap>,
    seg_up: Vec<FeatureMap>,
    seg_cat: FeatureMap,
    color_up: FeatureMap,
    pub seg_logits: SegLogitsMap,
    pub color_logits: LogitsMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyNet {
    config: ToyNetConfig,
    layers: Vec<Layer>,
}

fn to_pixel_major(fm: &FeatureMap) -> LogitsMap {
    let n = fm.height * fm.width;
    let c = fm.channels;
    let mut data = vec![0.0; n * c];
    for ch in 0..c {
        for (p, v) in fm.plane(ch).iter().enumerate() {
            data[p * c + ch] = *v;
        }
    }
    LogitsMap {
        width: fm.width,
        height: fm.height,
        channels: c,
        data,
    }
}

fn to_channel_major(m: &LogitsMap) -> FeatureMap {
    let n = m.width * m.height;
    let c = m.channels;
    let mut out = FeatureMap::zeros(c, m.height, m.width);
    for (p, row) in m.data.chunks_exact(c).enumerate() {
        for (ch, v) in row.iter().enumerate() {
            out.data[ch * n + p] = *v;
        }
    }
    out
}

/// Maps lightness in `[0, 100]` to roughly `[-1, 1]`.
fn normalize_input(l: &Plane) -> FeatureMap {
    FeatureMap {
        channels: 1,
        height: l.height,
        width: l.width,
        data: l.data.iter().map(|v| (v - 50.0) / 50.0).collect(),
    }
}

impl ToyNet {
    /// Builds the network with seeded He-uniform initialization.
    pub fn build(config: ToyNetConfig) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(COLOR_OUT + 1);
        let mut in_ch = 1;
        for (i, (&out_ch, &stride)) in config.channels.iter().zip(&TRUNK_STRIDES).enumerate() {
            layers.push(Layer::new(&format!("conv{}", i + 1), LayerKind::Conv, in_ch, out_ch, 3, stride, 1));
            in_ch = out_ch;
        }
        for i in 0..3 {
            let src = config.channels[4 + i];
            layers.push(config.upsampler(&format!("seg_up{}", i + 5), src, config.seg_channels, 8));
        }
        layers.push(Layer::new(
            "seg_out",
            LayerKind::Conv,
            3 * config.seg_channels,
            config.n_classes,
            1,
            1,
            0,
        ));
        layers.push(config.upsampler(
            "color_up",
            config.channels[N_TRUNK - 1],
            config.color_channels,
            8 / config.color_head_stride,
        ));
        layers.push(Layer::new("color_out", LayerKind::Conv, config.color_channels, config.q, 1, 1, 0));

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for (i, layer) in layers.iter_mut().enumerate() {
            let fan_in = layer.fan_in() as f64;
            let bound = if i == SEG_OUT || i == COLOR_OUT {
                (1.0 / fan_in).sqrt()
            } else {
                (6.0 / fan_in).sqrt()
            };
            layer.init_uniform(bound, &mut rng);
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &ToyNetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    fn check_input(&self, l: &Plane) -> Result<()> {
        let s = self.config.input_size;
        if l.width != s || l.height != s {
            return Err(Error::shape(format!(
                "network input must be {s}x{s}, got {}x{}",
                l.width, l.height
            )));
        }
        Ok(())
    }

    /// Runs both heads and keeps the activations needed by [`ToyNet::backward`].
    pub fn forward_cached(&self, lightness: &Plane) -> Result<ForwardCache> {
        self.check_input(lightness)?;
        let input = normalize_input(lightness);
        let mut trunk: Vec<FeatureMap> = Vec::with_capacity(N_TRUNK);
        for i in 0..N_TRUNK {
            let x = if i == 0 { &input } else { &trunk[i - 1] };
            let mut y = self.layers[i].forward(x);
            y.relu_in_place();
            trunk.push(y);
        }
        let seg_up: Vec<FeatureMap> = (0..3)
            .map(|i| {
                let mut y = self.layers[SEG_UP + i].forward(&trunk[4 + i]);
                y.relu_in_place();
                y
            })
            .collect();
        let seg_cat = FeatureMap::concat(&[&seg_up[0], &seg_up[1], &seg_up[2]]);
        let seg_logits = to_pixel_major(&self.layers[SEG_OUT].forward(&seg_cat));
        let mut color_up = self.layers[COLOR_UP].forward(&trunk[N_TRUNK - 1]);
        color_up.relu_in_place();
        let color_logits = to_pixel_major(&self.layers[COLOR_OUT].forward(&color_up));
        Ok(ForwardCache {
            input,
            trunk,
            seg_up,
            seg_cat,
            color_up,
            seg_logits,
            color_logits,
        })
    }

    /// Predicted chroma distribution (softmax over bins) and segmentation logits.
    pub fn forward(&self, lightness: &Plane) -> Result<(ChromaDistributionMap, SegLogitsMap)> {
        let cache = self.forward_cached(lightness)?;
        Ok((cache.color_logits.softmax(), cache.seg_logits))
    }

    /// Joint loss without gradients.
    pub fn loss(
        &self,
        lightness: &Plane,
        target: &ChromaDistributionMap,
        labels: &SegLabelMap,
        obj: &Objective,
    ) -> Result<LossBreakdown> {
        let cache = self.forward_cached(lightness)?;
        let (color, _) = colorization_loss(&cache.color_logits, target, obj.rebalance, obj.reduction)?;
        let (seg, _) = segmentation_loss(&cache.seg_logits, labels, obj.seg_weights, obj.reduction)?;
        Ok(LossBreakdown {
            color,
            seg,
            total: obj.weights.lambda_c * color + obj.weights.lambda_s * seg,
        })
    }

    /// Loss and gradient of `λ_c·L_col + λ_s·L_seg` for one sample.
    ///
    /// A head whose weight is zero contributes no gradient at all; its loss
    /// is still reported.
    pub fn backward(
        &self,
        lightness: &Plane,
        target: &ChromaDistributionMap,
        labels: &SegLabelMap,
        obj: &Objective,
    ) -> Result<(LossBreakdown, Gradients)> {
        let cache = self.forward_cached(lightness)?;
        let (color, g_color) = colorization_loss(&cache.color_logits, target, obj.rebalance, obj.reduction)?;
        let (seg, g_seg) = segmentation_loss(&cache.seg_logits, labels, obj.seg_weights, obj.reduction)?;
        let lw = obj.weights;
        let breakdown = LossBreakdown {
            color,
            seg,
            total: lw.lambda_c * color + lw.lambda_s * seg,
        };

        let mut grads: Vec<LayerGrad> = self.layers.iter().map(LayerGrad::zeros_like).collect();
        let mut d_trunk: Vec<Option<FeatureMap>> = vec![None; N_TRUNK];
        let accumulate = |slot: &mut Option<FeatureMap>, g: FeatureMap| match slot {
            Some(acc) => acc.data.iter_mut().zip(&g.data).for_each(|(a, b)| *a += b),
            None => *slot = Some(g),
        };

        if lw.lambda_c != 0.0 {
            let mut g = to_channel_major(&g_color);
            g.data.iter_mut().for_each(|v| *v *= lw.lambda_c);
            let mut d_up = self.layers[COLOR_OUT]
                .backward(&cache.color_up, &g, &mut grads[COLOR_OUT], true)
                .expect("input grad requested");
            d_up.mask_relu_grad(&cache.color_up);
            let d_h = self.layers[COLOR_UP]
                .backward(&cache.trunk[N_TRUNK - 1], &d_up, &mut grads[COLOR_UP], true)
                .expect("input grad requested");
            accumulate(&mut d_trunk[N_TRUNK - 1], d_h);
        }

        if lw.lambda_s != 0.0 {
            let mut g = to_channel_major(&g_seg);
            g.data.iter_mut().for_each(|v| *v *= lw.lambda_s);
            let d_cat = self.layers[SEG_OUT]
                .backward(&cache.seg_cat, &g, &mut grads[SEG_OUT], true)
                .expect("input grad requested");
            let parts = d_cat.split(&[self.config.seg_channels; 3]);
            for (i, mut d_up) in parts.into_iter().enumerate() {
                d_up.mask_relu_grad(&cache.seg_up[i]);
                let d_h = self.layers[SEG_UP + i]
                    .backward(&cache.trunk[4 + i], &d_up, &mut grads[SEG_UP + i], true)
                    .expect("input grad requested");
                accumulate(&mut d_trunk[4 + i], d_h);
            }
        }

        for i in (0..N_TRUNK).rev() {
            let Some(mut d) = d_trunk[i].take() else {
                continue;
            };
            d.mask_relu_grad(&cache.trunk[i]);
            let x = if i == 0 { &cache.input } else { &cache.trunk[i - 1] };
            if let Some(d_x) = self.layers[i].backward(x, &d, &mut grads[i], i > 0) {
                accumulate(&mut d_trunk[i - 1], d_x);
            }
        }
        Ok((breakdown, Gradients { layers: grads }))
    }

    /// Plain gradient descent step.
    pub fn apply_sgd(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, d) in layer.weight.iter_mut().zip(&g.weight) {
                *w -= lr * d;
            }
            for (b, d) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * d;
            }
        }
    }

    /// Parameter `(name, dims, values)` triples in a fixed order.
    pub fn named_params(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push((format!("{}.weight", l.name), l.weight_dims().to_vec(), l.weight.as_slice()));
            out.push((format!("{}.bias", l.name), vec![l.out_ch], l.bias.as_slice()));
        }
        out
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias).copied())
            .collect()
    }
}
