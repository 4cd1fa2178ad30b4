//! Small CNN building blocks with explicit forward/backward passes.
//!
//! Tensors are NHWC `f32`. Convolutions use "same" padding, so the output
//! side is `ceil(in / stride)` regardless of kernel size. This is enough
//! to train the tiny stand-in backbones and the shared classification head
//! on CPU; there is no autograd, each layer implements its own gradient.

use ndarray::{Array1, Array2, Array4, ArrayView2, ArrayView4};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// Uniform He-style init: bound = sqrt(6 / fan_in).
fn he_uniform(rng: &mut ChaCha20Rng, fan_in: usize) -> impl FnMut() -> f32 + '_ {
    let bound = (6.0 / fan_in as f32).sqrt();
    move || rng.gen_range(-bound..bound)
}

pub fn same_pad_out(input: usize, stride: usize) -> usize {
    input.div_ceil(stride)
}

fn pad_before(input: usize, kernel: usize, stride: usize) -> usize {
    let out = same_pad_out(input, stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    total / 2
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// (kh, kw, cin, cout)
    pub weight: Array4<f32>,
    pub bias: Array1<f32>,
    pub grad_weight: Array4<f32>,
    pub grad_bias: Array1<f32>,
    cached_input: Option<Array4<f32>>,
}

impl Conv2d {
    pub fn new(
        kernel: usize,
        stride: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut ChaCha20Rng,
    ) -> Conv2d {
        let fan_in = kernel * kernel * in_channels;
        let mut init = he_uniform(rng, fan_in);
        let weight = Array4::from_shape_simple_fn(
            (kernel, kernel, in_channels, out_channels),
            &mut init,
        );
        Conv2d {
            kernel,
            stride,
            in_channels,
            out_channels,
            grad_weight: Array4::zeros(weight.raw_dim()),
            weight,
            bias: Array1::zeros(out_channels),
            grad_bias: Array1::zeros(out_channels),
            cached_input: None,
        }
    }

    pub fn out_shape(&self, h: usize, w: usize) -> (usize, usize, usize) {
        (
            same_pad_out(h, self.stride),
            same_pad_out(w, self.stride),
            self.out_channels,
        )
    }

    pub fn forward(&mut self, input: ArrayView4<f32>, train: bool) -> Array4<f32> {
        let (n, h, w, _c) = input.dim();
        let (oh, ow, oc) = self.out_shape(h, w);
        let ph = pad_before(h, self.kernel, self.stride);
        let pw = pad_before(w, self.kernel, self.stride);
        let mut out = Array4::zeros((n, oh, ow, oc));
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    for ky in 0..self.kernel {
                        let iy = (oy * self.stride + ky) as isize - ph as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        for kx in 0..self.kernel {
                            let ix = (ox * self.stride + kx) as isize - pw as isize;
                            if ix < 0 || ix as usize >= w {
                                continue;
                            }
                            for ci in 0..self.in_channels {
                                let x = input[[b, iy as usize, ix as usize, ci]];
                                if x == 0.0 {
                                    continue;
                                }
                                for co in 0..oc {
                                    out[[b, oy, ox, co]] += x * self.weight[[ky, kx, ci, co]];
                                }
                            }
                        }
                    }
                    for co in 0..oc {
                        out[[b, oy, ox, co]] += self.bias[co];
                    }
                }
            }
        }
        if train {
            self.cached_input = Some(input.to_owned());
        }
        out
    }

    /// Returns the gradient w.r.t. the input; accumulates weight/bias
    /// gradients into `grad_weight`/`grad_bias`.
    pub fn backward(&mut self, grad_out: ArrayView4<f32>) -> Array4<f32> {
        let input = self
            .cached_input
            .take()
            .expect("backward without a training forward");
        let (n, h, w, _c) = input.dim();
        let (oh, ow, oc) = self.out_shape(h, w);
        let ph = pad_before(h, self.kernel, self.stride);
        let pw = pad_before(w, self.kernel, self.stride);
        let mut grad_in = Array4::zeros(input.raw_dim());
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    for co in 0..oc {
                        let g = grad_out[[b, oy, ox, co]];
                        if g == 0.0 {
                            continue;
                        }
                        self.grad_bias[co] += g;
                        for ky in 0..self.kernel {
                            let iy = (oy * self.stride + ky) as isize - ph as isize;
                            if iy < 0 || iy as usize >= h {
                                continue;
                            }
                            for kx in 0..self.kernel {
                                let ix = (ox * self.stride + kx) as isize - pw as isize;
                                if ix < 0 || ix as usize >= w {
                                    continue;
                                }
                                for ci in 0..self.in_channels {
                                    let x = input[[b, iy as usize, ix as usize, ci]];
                                    self.grad_weight[[ky, kx, ci, co]] += g * x;
                                    grad_in[[b, iy as usize, ix as usize, ci]] +=
                                        g * self.weight[[ky, kx, ci, co]];
                                }
                            }
                        }
                    }
                }
            }
        }
        grad_in
    }
}

/// ReLU with the activation mask cached for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Array4<f32>>,
}

impl Relu {
    pub fn forward(&mut self, mut x: Array4<f32>, train: bool) -> Array4<f32> {
        x.mapv_inplace(|v| v.max(0.0));
        if train {
            self.mask = Some(x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }));
        }
        x
    }

    pub fn backward(&mut self, grad_out: Array4<f32>) -> Array4<f32> {
        let mask = self.mask.take().expect("backward without forward");
        grad_out * &mask
    }
}

/// Spatial global average pooling: (N,H,W,C) -> (N,C).
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    in_shape: Option<(usize, usize, usize, usize)>,
}

impl GlobalAvgPool {
    pub fn forward(&mut self, x: ArrayView4<f32>, train: bool) -> Array2<f32> {
        let (n, h, w, c) = x.dim();
        if train {
            self.in_shape = Some((n, h, w, c));
        }
        let mut out = Array2::zeros((n, c));
        let scale = 1.0 / (h * w) as f32;
        for b in 0..n {
            for y in 0..h {
                for xx in 0..w {
                    for ch in 0..c {
                        out[[b, ch]] += x[[b, y, xx, ch]] * scale;
                    }
                }
            }
        }
        out
    }

    pub fn backward(&mut self, grad_out: ArrayView2<f32>) -> Array4<f32> {
        let (n, h, w, c) = self.in_shape.take().expect("backward without forward");
        let scale = 1.0 / (h * w) as f32;
        let mut grad_in = Array4::zeros((n, h, w, c));
        for b in 0..n {
            for y in 0..h {
                for xx in 0..w {
                    for ch in 0..c {
                        grad_in[[b, y, xx, ch]] = grad_out[[b, ch]] * scale;
                    }
                }
            }
        }
        grad_in
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    /// (in, out)
    pub weight: Array2<f32>,
    pub bias: Array1<f32>,
    pub grad_weight: Array2<f32>,
    pub grad_bias: Array1<f32>,
    cached_input: Option<Array2<f32>>,
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize, rng: &mut ChaCha20Rng) -> Dense {
        let mut init = he_uniform(rng, in_features);
        let weight = Array2::from_shape_simple_fn((in_features, out_features), &mut init);
        Dense {
            in_features,
            out_features,
            grad_weight: Array2::zeros(weight.raw_dim()),
            weight,
            bias: Array1::zeros(out_features),
            grad_bias: Array1::zeros(out_features),
            cached_input: None,
        }
    }

    pub fn forward(&mut self, x: ArrayView2<f32>, train: bool) -> Array2<f32> {
        if train {
            self.cached_input = Some(x.to_owned());
        }
        x.dot(&self.weight) + &self.bias
    }

    pub fn backward(&mut self, grad_out: ArrayView2<f32>) -> Array2<f32> {
        let input = self.cached_input.take().expect("backward without forward");
        self.grad_weight += &input.t().dot(&grad_out);
        self.grad_bias += &grad_out.sum_axis(ndarray::Axis(0));
        grad_out.dot(&self.weight.t())
    }
}

/// Row-wise softmax.
pub fn softmax(logits: ArrayView2<f32>) -> Array2<f32> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f32 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean categorical cross-entropy plus the logit gradient in one step
/// (`softmax - onehot`, averaged over the batch).
pub fn cross_entropy_with_grad(
    logits: ArrayView2<f32>,
    targets: &[usize],
) -> (f32, Array2<f32>) {
    let probs = softmax(logits);
    let n = targets.len();
    assert_eq!(probs.nrows(), n);
    let mut loss = 0.0f32;
    let mut grad = probs.clone();
    for (i, &t) in targets.iter().enumerate() {
        loss -= probs[[i, t]].max(1e-12).ln();
        grad[[i, t]] -= 1.0;
    }
    grad.mapv_inplace(|v| v / n as f32);
    (loss / n as f32, grad)
}

/// Nadam (Nesterov-momentum Adam) with bias correction.
#[derive(Debug, Clone)]
pub struct Nadam {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    step: u64,
    // First/second moments, one flat buffer per registered parameter.
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Nadam {
    pub fn new(learning_rate: f32) -> Nadam {
        Nadam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Call once per optimizer step before `update_param`.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one Nadam update to the `slot`-th parameter tensor.
    pub fn update_param(&mut self, slot: usize, param: &mut [f32], grad: &[f32]) {
        assert_eq!(param.len(), grad.len());
        while self.m.len() <= slot {
            self.m.push(Vec::new());
            self.v.push(Vec::new());
        }
        if self.m[slot].len() != param.len() {
            self.m[slot] = vec![0.0; param.len()];
            self.v[slot] = vec![0.0; param.len()];
        }
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for i in 0..param.len() {
            let g = grad[i];
            let m = &mut self.m[slot][i];
            let v = &mut self.v[slot][i];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            let nesterov = self.beta1 * m_hat + (1.0 - self.beta1) * g / bias1;
            param[i] -= self.learning_rate * nesterov / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;
    use ndarray::Array2;

    #[test]
    fn same_padding_shapes() {
        assert_eq!(same_pad_out(300, 32), 10);
        assert_eq!(same_pad_out(32, 2), 16);
        assert_eq!(same_pad_out(7, 2), 4);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Array2::from_shape_vec((2, 3), vec![1.0, 2.0, 3.0, -5.0, 0.0, 5.0]).unwrap();
        let p = softmax(logits.view());
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|v| *v >= 0.0));
        }
    }

    /// Finite-difference check of the conv gradient: the analytic
    /// weight/input gradients must match (loss(w+e)-loss(w-e))/2e.
    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = stream_rng(1, "gradcheck", &[]);
        let mut conv = Conv2d::new(3, 2, 2, 3, &mut rng);
        let input = Array4::from_shape_simple_fn((2, 5, 5, 2), || rng.gen_range(-1.0..1.0f32));
        let target = Array4::from_shape_simple_fn((2, 3, 3, 3), || rng.gen_range(-1.0..1.0f32));

        // loss = 0.5 * sum((conv(x) - target)^2)
        let out = conv.forward(input.view(), true);
        let diff = &out - &target;
        let _ = conv.backward(diff.view());

        let eps = 1e-3f32;
        let mut worst = 0.0f32;
        for idx in [[0, 0, 0, 0], [1, 2, 1, 2], [2, 1, 0, 1]] {
            let orig = conv.weight[idx];
            let eval = |w: f32, conv: &mut Conv2d| {
                conv.weight[idx] = w;
                let out = conv.forward(input.view(), false);
                let d = &out - &target;
                0.5 * d.mapv(|v| v * v).sum()
            };
            let plus = eval(orig + eps, &mut conv);
            let minus = eval(orig - eps, &mut conv);
            conv.weight[idx] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = conv.grad_weight[idx];
            worst = worst.max((numeric - analytic).abs() / numeric.abs().max(1.0));
        }
        assert!(worst < 1e-2, "conv weight gradient off by {worst}");
    }

    #[test]
    fn dense_gradient_matches_finite_differences() {
        let mut rng = stream_rng(2, "gradcheck", &[]);
        let mut dense = Dense::new(4, 3, &mut rng);
        let input = Array2::from_shape_simple_fn((5, 4), || rng.gen_range(-1.0..1.0f32));
        let targets = vec![0usize, 2, 1, 1, 0];

        let logits = dense.forward(input.view(), true);
        let (_, grad_logits) = cross_entropy_with_grad(logits.view(), &targets);
        let _ = dense.backward(grad_logits.view());

        let eps = 1e-3f32;
        for idx in [[0, 0], [3, 2], [1, 1]] {
            let orig = dense.weight[idx];
            let eval = |w: f32, dense: &mut Dense| {
                dense.weight[idx] = w;
                let logits = dense.forward(input.view(), false);
                cross_entropy_with_grad(logits.view(), &targets).0
            };
            let plus = eval(orig + eps, &mut dense);
            let minus = eval(orig - eps, &mut dense);
            dense.weight[idx] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = dense.grad_weight[idx];
            assert!(
                (numeric - analytic).abs() < 1e-3,
                "dense grad {idx:?}: numeric {numeric} analytic {analytic}"
            );
        }
    }

    #[test]
    fn nadam_reduces_quadratic() {
        let mut opt = Nadam::new(0.05);
        let mut x = vec![3.0f32, -2.0];
        for _ in 0..300 {
            opt.begin_step();
            let grad: Vec<f32> = x.iter().map(|v| 2.0 * v).collect();
            opt.update_param(0, &mut x, &grad);
        }
        assert!(x.iter().all(|v| v.abs() < 0.05), "did not converge: {x:?}");
    }
}
