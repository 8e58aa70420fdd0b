//! Minimal dense networks with Adam, shared by the color corrector and the
//! facial regressor.
//!
//! Parameters live in one flat vector (per layer: row-major weights, then
//! bias) so optimizers and gradient reductions work on plain slices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{par, Error, Result};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => {
                // One `exp` instead of libm `tanh`; absolute error stays
                // below 1e-15, at a fraction of the cost in training loops.
                let e = (-2.0 * z.abs()).exp();
                ((1.0 - e) / (1.0 + e)).copysign(z)
            }
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Fully connected network with a nonlinearity on hidden layers and a linear
/// output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Serialized layer: `outputs x inputs` row-major weights plus bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Mlp {
    /// Uniform initialisation for layer widths `sizes` (input first): He
    /// bounds for ReLU, Glorot bounds for tanh.
    pub fn new<R: Rng>(sizes: &[usize], activation: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = match activation {
                Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                Activation::Tanh => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self {
            sizes: sizes.to_vec(),
            activation,
            params,
        }
    }

    pub fn from_layers(layers: &[LayerRecord], activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Model("network has no layers".into()));
        }
        let mut sizes = vec![layers[0].inputs];
        let mut params = Vec::new();
        for (i, l) in layers.iter().enumerate() {
            if l.inputs != *sizes.last().unwrap() {
                return Err(Error::Model(format!(
                    "layer {i} expects {} inputs, previous layer gives {}",
                    l.inputs,
                    sizes.last().unwrap()
                )));
            }
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Model(format!("layer {i} has inconsistent array sizes")));
            }
            if l.weights.iter().chain(&l.bias).any(|x| !x.is_finite()) {
                return Err(Error::Model(format!("layer {i} has non-finite parameters")));
            }
            params.extend_from_slice(&l.weights);
            params.extend_from_slice(&l.bias);
            sizes.push(l.outputs);
        }
        Ok(Self {
            sizes,
            activation,
            params,
        })
    }

    /// Scales the output layer's weights and overwrites its bias, so the
    /// untrained network starts near a chosen constant output.
    pub fn reset_output(&mut self, weight_scale: f64, bias: &[f64]) {
        let n = self.output_dim();
        assert_eq!(bias.len(), n, "one bias per output");
        let fan_in = self.sizes[self.sizes.len() - 2];
        let start = self.params.len() - n - fan_in * n;
        let (w, b) = self.params[start..].split_at_mut(fan_in * n);
        w.iter_mut().for_each(|x| *x *= weight_scale);
        b.copy_from_slice(bias);
    }

    pub fn to_layers(&self) -> Vec<LayerRecord> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let weights = self.params[off..off + i * o].to_vec();
                off += i * o;
                let bias = self.params[off..off + o].to_vec();
                off += o;
                LayerRecord {
                    inputs: i,
                    outputs: o,
                    weights,
                    bias,
                }
            })
            .collect()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut act = x.to_vec();
        let mut off = 0;
        let last = self.sizes.len() - 2;
        for (li, w) in self.sizes.windows(2).enumerate() {
            act = dense(&self.params[off..], w[0], w[1], &act, (li < last).then_some(self.activation));
            off += w[0] * w[1] + w[1];
        }
        act
    }

    /// Forward pass keeping every layer's activation (input first, output
    /// last) for [`Mlp::backward`].
    pub fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        let mut off = 0;
        let last = self.sizes.len() - 2;
        for (li, w) in self.sizes.windows(2).enumerate() {
            let next = dense(&self.params[off..], w[0], w[1], acts.last().unwrap(), (li < last).then_some(self.activation));
            acts.push(next);
            off += w[0] * w[1] + w[1];
        }
        acts
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    pub fn backward(&self, acts: &[Vec<f64>], grad_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let offsets = layer_offsets(&self.sizes);
        let mut delta = grad_out.to_vec();
        for li in (0..self.sizes.len() - 1).rev() {
            let (ni, no) = (self.sizes[li], self.sizes[li + 1]);
            let off = offsets[li];
            let input = &acts[li];
            for o in 0..no {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + o * ni..off + (o + 1) * ni];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[off + ni * no + o] += d;
            }
            if li == 0 {
                break;
            }
            let w = &self.params[off..off + ni * no];
            let mut prev = vec![0.0; ni];
            for o in 0..no {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, wv) in prev.iter_mut().zip(&w[o * ni..(o + 1) * ni]) {
                    *p += d * wv;
                }
            }
            // Nonlinearity derivative on the hidden activation feeding this layer.
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= self.activation.slope(*a);
            }
            delta = prev;
        }
    }

    /// Batched forward pass over `rows` samples stored row-major in `x`.
    /// Returns every layer's activations (input first), each row-major with
    /// one sample per row.
    pub fn forward_batch(&self, x: &[f64], rows: usize) -> Vec<Vec<f64>> {
        debug_assert_eq!(x.len(), rows * self.input_dim());
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        let offsets = layer_offsets(&self.sizes);
        let last = self.sizes.len() - 2;
        for li in 0..self.sizes.len() - 1 {
            let (ni, no) = (self.sizes[li], self.sizes[li + 1]);
            let w = &self.params[offsets[li]..offsets[li] + ni * no];
            let b = &self.params[offsets[li] + ni * no..offsets[li] + ni * no + no];
            let mut z = Vec::with_capacity(rows * no);
            for _ in 0..rows {
                z.extend_from_slice(b);
            }
            // z += a * w^T
            gemm(rows, ni, no, acts.last().unwrap(), (ni, 1), w, (1, ni), &mut z);
            if li < last {
                let act = self.activation;
                z.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            acts.push(z);
        }
        acts
    }

    /// Batched counterpart of [`Mlp::backward`]; `grad_out` holds one row of
    /// output gradients per sample.
    pub fn backward_batch(&self, acts: &[Vec<f64>], rows: usize, grad_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let offsets = layer_offsets(&self.sizes);
        let mut delta = grad_out.to_vec();
        for li in (0..self.sizes.len() - 1).rev() {
            let (ni, no) = (self.sizes[li], self.sizes[li + 1]);
            let off = offsets[li];
            let input = &acts[li];
            // dW += delta^T * a
            gemm(no, rows, ni, &delta, (1, no), input, (ni, 1), &mut grad[off..off + ni * no]);
            let gb = &mut grad[off + ni * no..off + ni * no + no];
            for row in delta.chunks_exact(no) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if li == 0 {
                break;
            }
            let mut prev = vec![0.0; rows * ni];
            gemm(rows, no, ni, &delta, (no, 1), &self.params[off..off + ni * no], (ni, 1), &mut prev);
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= self.activation.slope(*a);
            }
            delta = prev;
        }
    }
}

/// `c += a * b` for an `m x k` times `k x n` product with explicit
/// `(row, column)` strides on `a` and `b`; `c` is row-major.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize), c: &mut [f64]) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    assert!(m == 0 || k == 0 || (m - 1) * sa.0 + (k - 1) * sa.1 < a.len());
    assert!(k == 0 || n == 0 || (k - 1) * sb.0 + (n - 1) * sb.1 < b.len());
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn layer_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut off = 0;
    sizes
        .windows(2)
        .map(|w| {
            let o = off;
            off += w[0] * w[1] + w[1];
            o
        })
        .collect()
}

fn dense(params: &[f64], ni: usize, no: usize, x: &[f64], act: Option<Activation>) -> Vec<f64> {
    let (w, rest) = params.split_at(ni * no);
    let b = &rest[..no];
    (0..no)
        .map(|o| {
            let z = w[o * ni..(o + 1) * ni]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + b[o];
            act.map_or(z, |a| a.apply(z))
        })
        .collect()
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Bias-corrected Adam update direction (already scaled by `lr`), with
    /// the moment estimates advanced by `grad`.
    pub fn direction(&mut self, grad: &[f64]) -> Vec<f64> {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        self.m
            .iter_mut()
            .zip(self.v.iter_mut())
            .zip(grad)
            .map(|((m, v), &g)| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                -self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps)
            })
            .collect()
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let dir = self.direction(grad);
        for (p, d) in params.iter_mut().zip(dir) {
            *p += d;
        }
    }
}

/// Samples per work unit in [`chunked_gradient`]. Fixed so that the
/// summation tree never depends on the thread count.
pub const GRAD_CHUNK: usize = 16;

/// Sums per-sample losses and gradients over `indices`.
///
/// `sample(i, grad)` adds sample `i`'s gradient into `grad` and returns its
/// loss. Chunks of [`GRAD_CHUNK`] samples run in parallel; chunk results
/// are then added in order.
pub fn chunked_gradient<F>(indices: &[usize], dim: usize, sample: F) -> (f64, Vec<f64>)
where
    F: Fn(usize, &mut [f64]) -> f64 + Sync + Send,
{
    let chunks: Vec<&[usize]> = indices.chunks(GRAD_CHUNK).collect();
    let partials = par::map_slice(&chunks, |chunk| {
        let mut g = vec![0.0; dim];
        let mut loss = 0.0;
        for &i in *chunk {
            loss += sample(i, &mut g);
        }
        (loss, g)
    });
    let mut total = vec![0.0; dim];
    let mut loss = 0.0;
    for (l, g) in partials {
        loss += l;
        for (t, x) in total.iter_mut().zip(g) {
            *t += x;
        }
    }
    (loss, total)
}

/// Rows per work unit in [`batched_gradient`].
pub const BATCH_CHUNK: usize = 64;

/// Like [`chunked_gradient`] but hands each work unit a whole chunk of up
/// to [`BATCH_CHUNK`] indices, for use with the batched MLP passes.
pub fn batched_gradient<F>(indices: &[usize], dim: usize, chunk: F) -> (f64, Vec<f64>)
where
    F: Fn(&[usize], &mut [f64]) -> f64 + Sync + Send,
{
    let chunks: Vec<&[usize]> = indices.chunks(BATCH_CHUNK).collect();
    let partials = par::map_slice(&chunks, |c| {
        let mut g = vec![0.0; dim];
        let loss = chunk(c, &mut g);
        (loss, g)
    });
    let mut total = vec![0.0; dim];
    let mut loss = 0.0;
    for (l, g) in partials {
        loss += l;
        for (t, x) in total.iter_mut().zip(g) {
            *t += x;
        }
    }
    (loss, total)
}
