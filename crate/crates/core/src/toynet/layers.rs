//! Convolution and transposed convolution on CHW feature maps.

use rand::Rng;

/// Channel-major feature map: `data[(c * height + y) * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Stacks maps of equal spatial size along the channel axis.
    pub fn concat(maps: &[&FeatureMap]) -> Self {
        let (h, w) = (maps[0].height, maps[0].width);
        let channels = maps.iter().map(|m| m.channels).sum();
        let mut data = Vec::with_capacity(channels * h * w);
        for m in maps {
            debug_assert_eq!((m.height, m.width), (h, w));
            data.extend_from_slice(&m.data);
        }
        Self {
            channels,
            height: h,
            width: w,
            data,
        }
    }

    /// Inverse of [`FeatureMap::concat`] for the given channel counts.
    pub fn split(&self, channels: &[usize]) -> Vec<FeatureMap> {
        let n = self.height * self.width;
        let mut start = 0;
        channels
            .iter()
            .map(|&c| {
                let m = FeatureMap {
                    channels: c,
                    height: self.height,
                    width: self.width,
                    data: self.data[start * n..(start + c) * n].to_vec(),
                };
                start += c;
                m
            })
            .collect()
    }

    pub fn relu_in_place(&mut self) {
        for v in &mut self.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    /// Zeroes gradient entries where the post-activation output was not positive.
    pub fn mask_relu_grad(&mut self, activated: &FeatureMap) {
        for (g, a) in self.data.iter_mut().zip(&activated.data) {
            if *a <= 0.0 {
                *g = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Weight layout `[out][in][k][k]`.
    Conv,
    /// Transposed convolution, weight layout `[in][out][k][k]`.
    Deconv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &Layer) -> Self {
        Self {
            weight: vec![0.0; layer.weight.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }
}

/// Valid output range `[lo, hi)` of `o` such that `o * stride + k - pad` lies in `[0, n_in)`.
#[inline]
fn valid_range(n_out: usize, n_in: usize, stride: usize, k: usize, pad: usize) -> (usize, usize) {
    let k = k as isize;
    let pad = pad as isize;
    let s = stride as isize;
    // smallest o with o*s + k - pad >= 0
    let lo = ((pad - k).max(0) + s - 1) / s;
    // largest o with o*s + k - pad <= n_in - 1
    let top = n_in as isize - 1 - k + pad;
    let hi = if top < 0 { 0 } else { (top / s + 1).min(n_out as isize) };
    (lo as usize, hi.max(lo as isize) as usize)
}

/// `c = op(a) · op(b) + beta · c` for row-major `m × k` and `k × n` operands,
/// where `op` optionally transposes the stored matrix.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], beta: f64) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above guarantee every strided access stays inside
    // the slices, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Layer {
    pub fn new(
        name: &str,
        kind: LayerKind,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        Self {
            name: name.to_string(),
            kind,
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
            weight: vec![0.0; in_ch * out_ch * kernel * kernel],
            bias: vec![0.0; out_ch],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Weight dimensions in storage order.
    pub fn weight_dims(&self) -> [usize; 4] {
        match self.kind {
            LayerKind::Conv => [self.out_ch, self.in_ch, self.kernel, self.kernel],
            LayerKind::Deconv => [self.in_ch, self.out_ch, self.kernel, self.kernel],
        }
    }

    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv => self.in_ch * self.kernel * self.kernel,
            LayerKind::Deconv => {
                let taps = self.kernel.div_ceil(self.stride);
                self.in_ch * taps * taps
            }
        }
    }

    /// Uniform in `[-bound, bound]`, biases zero.
    pub fn init_uniform(&mut self, bound: f64, rng: &mut impl Rng) {
        for w in &mut self.weight {
            *w = rng.gen_range(-bound..=bound);
        }
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        let (k, s, p) = (self.kernel, self.stride, self.pad);
        match self.kind {
            LayerKind::Conv => ((h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1),
            LayerKind::Deconv => ((h - 1) * s + k - 2 * p, (w - 1) * s + k - 2 * p),
        }
    }

    /// Accumulates parameter gradients into `grad` and returns the input
    /// gradient when `need_input_grad` is set.

    /// Gathers kernel taps into a `(channels·k·k) × (sh·sw)` matrix.
    ///
    /// `big` is the `channels × bh × bw` map addressed at
    /// `small * stride + tap - pad`; out-of-range taps read zero.
    fn gather(&self, big: &[f64], channels: usize, big_hw: (usize, usize), small_hw: (usize, usize)) -> Vec<f64> {
        let (bh, bw) = big_hw;
        let (sh, sw) = small_hw;
        let (k, s, p) = (self.kernel, self.stride, self.pad);
        let n = sh * sw;
        let mut col = vec![0.0; channels * k * k * n];
        for c in 0..channels {
            let plane = &big[c * bh * bw..(c + 1) * bh * bw];
            for ky in 0..k {
                let (y0, y1) = valid_range(sh, bh, s, ky, p);
                for kx in 0..k {
                    let (x0, x1) = valid_range(sw, bw, s, kx, p);
                    let row = &mut col[((c * k + ky) * k + kx) * n..][..n];
                    for sy in y0..y1 {
                        let by = sy * s + ky - p;
                        let src = &plane[by * bw..(by + 1) * bw];
                        let dst = &mut row[sy * sw..(sy + 1) * sw];
                        for sx in x0..x1 {
                            dst[sx] = src[sx * s + kx - p];
                        }
                    }
                }
            }
        }
        col
    }

    /// Adjoint of [`Layer::gather`]: adds every column entry back onto `big`.
    fn scatter_add(&self, col: &[f64], big: &mut [f64], channels: usize, big_hw: (usize, usize), small_hw: (usize, usize)) {
        let (bh, bw) = big_hw;
        let (sh, sw) = small_hw;
        let (k, s, p) = (self.kernel, self.stride, self.pad);
        let n = sh * sw;
        for c in 0..channels {
            let plane = &mut big[c * bh * bw..(c + 1) * bh * bw];
            for ky in 0..k {
                let (y0, y1) = valid_range(sh, bh, s, ky, p);
                for kx in 0..k {
                    let (x0, x1) = valid_range(sw, bw, s, kx, p);
                    let row = &col[((c * k + ky) * k + kx) * n..][..n];
                    for sy in y0..y1 {
                        let by = sy * s + ky - p;
                        let src = &row[sy * sw..(sy + 1) * sw];
                        let dst = &mut plane[by * bw..(by + 1) * bw];
                        for sx in x0..x1 {
                            dst[sx * s + kx - p] += src[sx];
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, input: &FeatureMap) -> FeatureMap {
        debug_assert_eq!(input.channels, self.in_ch);
        let (ih, iw) = (input.height, input.width);
        let (oh, ow) = self.output_size(ih, iw);
        let taps = self.kernel * self.kernel;
        let mut out = FeatureMap::zeros(self.out_ch, oh, ow);
        match self.kind {
            LayerKind::Conv => {
                let col = self.gather(&input.data, self.in_ch, (ih, iw), (oh, ow));
                // out[oc × P] = W[oc × (ic·k·k)] · col
                gemm(self.out_ch, self.in_ch * taps, oh * ow, &self.weight, false, &col, false, &mut out.data, 0.0);
            }
            LayerKind::Deconv => {
                // col[(oc·k·k) × P_in] = W[ic × (oc·k·k)]ᵀ · x
                let mut col = vec![0.0; self.out_ch * taps * ih * iw];
                gemm(self.out_ch * taps, self.in_ch, ih * iw, &self.weight, true, &input.data, false, &mut col, 0.0);
                self.scatter_add(&col, &mut out.data, self.out_ch, (oh, ow), (ih, iw));
            }
        }
        let n = oh * ow;
        for (oc, plane) in out.data.chunks_exact_mut(n).enumerate() {
            let b = self.bias[oc];
            plane.iter_mut().for_each(|v| *v += b);
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the input
    /// gradient when `need_input_grad` is set.
    pub fn backward(
        &self,
        input: &FeatureMap,
        grad_out: &FeatureMap,
        grad: &mut LayerGrad,
        need_input_grad: bool,
    ) -> Option<FeatureMap> {
        let (ih, iw) = (input.height, input.width);
        let (oh, ow) = (grad_out.height, grad_out.width);
        let taps = self.kernel * self.kernel;
        for (oc, g) in grad_out.data.chunks_exact(oh * ow).enumerate() {
            grad.bias[oc] += g.iter().sum::<f64>();
        }
        let mut grad_in = need_input_grad.then(|| FeatureMap::zeros(input.channels, ih, iw));
        match self.kind {
            LayerKind::Conv => {
                let k_dim = self.in_ch * taps;
                let col = self.gather(&input.data, self.in_ch, (ih, iw), (oh, ow));
                gemm(self.out_ch, oh * ow, k_dim, &grad_out.data, false, &col, true, &mut grad.weight, 1.0);
                if let Some(gi) = grad_in.as_mut() {
                    let mut d_col = vec![0.0; k_dim * oh * ow];
                    gemm(k_dim, self.out_ch, oh * ow, &self.weight, true, &grad_out.data, false, &mut d_col, 0.0);
                    self.scatter_add(&d_col, &mut gi.data, self.in_ch, (ih, iw), (oh, ow));
                }
            }
            LayerKind::Deconv => {
                let d_col = self.gather(&grad_out.data, self.out_ch, (oh, ow), (ih, iw));
                gemm(self.in_ch, ih * iw, self.out_ch * taps, &input.data, false, &d_col, true, &mut grad.weight, 1.0);
                if let Some(gi) = grad_in.as_mut() {
                    gemm(self.in_ch, self.out_ch * taps, ih * iw, &self.weight, false, &d_col, false, &mut gi.data, 0.0);
                }
            }
        }
        grad_in
    }
}
