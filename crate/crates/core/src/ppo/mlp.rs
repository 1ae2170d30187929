//! Shared-trunk tanh MLP with a policy head (logits) and a value head.
//!
//! Weights live in one flat vector. Layout, per trunk layer then policy head
//! then value head: the `out × in` weight matrix in row-major order followed
//! by the `out` biases.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{N_ACTIONS, OBS_DIM};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Input width followed by each hidden width, e.g. `[4, 64, 64]`.
    pub layers: Vec<usize>,
    pub actions: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            layers: vec![OBS_DIM, 64, 64],
            actions: N_ACTIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Offset of the weight matrix; biases follow it.
    pub offset: usize,
}

impl Dense {
    pub fn len(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }

    pub fn bias_offset(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        self.layers[0]
    }

    pub fn feature_dim(&self) -> usize {
        *self.layers.last().expect("architecture has an input layer")
    }

    pub(crate) fn dense_layers(&self) -> (Vec<Dense>, Dense, Dense) {
        let mut offset = 0;
        let mut next = |inputs, outputs| {
            let d = Dense {
                inputs,
                outputs,
                offset,
            };
            offset += d.len();
            d
        };
        let trunk = self.layers.windows(2).map(|w| next(w[0], w[1])).collect();
        let feat = self.feature_dim();
        let policy = next(feat, self.actions);
        let value = next(feat, 1);
        (trunk, policy, value)
    }

    pub fn num_weights(&self) -> usize {
        let (_, _, value) = self.dense_layers();
        value.offset + value.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.layers.contains(&0) || self.actions == 0 {
            return Err(Error::ChecksumMismatch(format!("degenerate architecture {self:?}")));
        }
        Ok(())
    }
}

/// Network architecture plus its flat weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub architecture: Architecture,
    pub weights: Vec<f64>,
}

/// Intermediate activations of one forward pass, kept for backprop.
#[derive(Debug, Clone, Default)]
pub(crate) struct Activations {
    /// `layers[0]` is the input; `layers[k]` the output of trunk layer `k`.
    pub layers: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub value: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn dense_forward(layer: &Dense, weights: &[f64], x: &[f64], out: &mut Vec<f64>) {
    let w = &weights[layer.offset..layer.bias_offset()];
    let b = &weights[layer.bias_offset()..layer.bias_offset() + layer.outputs];
    out.clear();
    out.extend(
        w.chunks_exact(layer.inputs)
            .zip(b)
            .map(|(row, bias)| dot(row, x) + bias),
    );
}

/// Accumulates `dW += dz ⊗ x`, `db += dz`, and writes `dx = Wᵀ dz` if asked.
fn dense_backward(layer: &Dense, weights: &[f64], x: &[f64], dz: &[f64], grad: &mut [f64], dx: Option<&mut Vec<f64>>) {
    let (gw, gb) = grad[layer.offset..layer.offset + layer.len()].split_at_mut(layer.inputs * layer.outputs);
    for ((grow, gbias), &d) in gw.chunks_exact_mut(layer.inputs).zip(gb.iter_mut()).zip(dz) {
        *gbias += d;
        for (g, xi) in grow.iter_mut().zip(x) {
            *g += d * xi;
        }
    }
    if let Some(dx) = dx {
        dx.clear();
        dx.resize(layer.inputs, 0.0);
        let w = &weights[layer.offset..layer.bias_offset()];
        for (row, &d) in w.chunks_exact(layer.inputs).zip(dz) {
            for (o, wi) in dx.iter_mut().zip(row) {
                *o += d * wi;
            }
        }
    }
}

/// Orthogonal `rows × cols` matrix scaled by `gain` (row-major).
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut RngStream) -> Vec<f64> {
    // Orthonormalize the columns of a tall Gaussian matrix, then transpose
    // back if the target is wide.
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let mut cols_vec: Vec<Vec<f64>> = (0..short)
        .map(|_| (0..tall).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for j in 0..short {
        for k in 0..j {
            let proj = dot(&cols_vec[j], &cols_vec[k]);
            let (head, tail) = cols_vec.split_at_mut(j);
            for (x, y) in tail[0].iter_mut().zip(&head[k]) {
                *x -= proj * y;
            }
        }
        let norm = dot(&cols_vec[j], &cols_vec[j]).sqrt();
        cols_vec[j].iter_mut().for_each(|x| *x /= norm);
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = gain * if rows >= cols { cols_vec[c][r] } else { cols_vec[r][c] };
        }
    }
    out
}

impl MlpParams {
    pub fn zeros(architecture: Architecture) -> Self {
        let n = architecture.num_weights();
        Self {
            architecture,
            weights: vec![0.0; n],
        }
    }

    /// Orthogonal init: gain √2 on the trunk, 0.01 on the policy head, 1 on
    /// the value head; zero biases.
    pub fn init(architecture: Architecture, rng: &mut RngStream) -> Self {
        let mut p = Self::zeros(architecture);
        let (trunk, policy, value) = p.architecture.dense_layers();
        let gains = trunk
            .iter()
            .map(|d| (*d, std::f64::consts::SQRT_2))
            .chain([(policy, 0.01), (value, 1.0)]);
        for (d, gain) in gains {
            let w = orthogonal(d.outputs, d.inputs, gain, rng);
            p.weights[d.offset..d.bias_offset()].copy_from_slice(&w);
        }
        p
    }

    /// Checks that the weight vector fits the architecture and is finite.
    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        let expected = self.architecture.num_weights();
        if self.weights.len() != expected {
            return Err(Error::ChecksumMismatch(format!(
                "architecture {:?} needs {expected} weights, found {}",
                self.architecture,
                self.weights.len()
            )));
        }
        if let Some(k) = self.weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::ChecksumMismatch(format!("weight {k} is not finite")));
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, obs: &[f64], act: &mut Activations) {
        let (trunk, policy, value) = self.architecture.dense_layers();
        act.layers.resize(trunk.len() + 1, Vec::new());
        act.layers[0].clear();
        act.layers[0].extend_from_slice(obs);
        for (k, d) in trunk.iter().enumerate() {
            let (prev, rest) = act.layers.split_at_mut(k + 1);
            let out = &mut rest[0];
            dense_forward(d, &self.weights, &prev[k], out);
            out.iter_mut().for_each(|z| *z = z.tanh());
        }
        let feat = act.layers.last().expect("input layer present");
        dense_forward(&policy, &self.weights, feat, &mut act.logits);
        let mut v = Vec::with_capacity(1);
        dense_forward(&value, &self.weights, feat, &mut v);
        act.value = v[0];
    }

    /// Unnormalized action logits and the state-value estimate.
    pub fn forward(&self, obs: &[f64]) -> (Vec<f64>, f64) {
        let mut act = Activations::default();
        self.forward_cached(obs, &mut act);
        (act.logits, act.value)
    }

    /// Backpropagates `dlogits`/`dvalue` through a cached pass into `grad`.
    pub(crate) fn backward(
        &self,
        act: &Activations,
        dlogits: &[f64],
        dvalue: f64,
        grad: &mut [f64],
        scratch: &mut (Vec<f64>, Vec<f64>),
    ) {
        let (trunk, policy, value) = self.architecture.dense_layers();
        let feat = act.layers.last().expect("input layer present");
        let (dh, dtmp) = scratch;
        dense_backward(&policy, &self.weights, feat, dlogits, grad, Some(dh));
        dense_backward(&value, &self.weights, feat, &[dvalue], grad, Some(dtmp));
        for (a, b) in dh.iter_mut().zip(dtmp.iter()) {
            *a += b;
        }
        for k in (0..trunk.len()).rev() {
            // Through tanh: dz = dh · (1 - h²).
            for (d, h) in dh.iter_mut().zip(&act.layers[k + 1]) {
                *d *= 1.0 - h * h;
            }
            let want_dx = k > 0;
            dense_backward(
                &trunk[k],
                &self.weights,
                &act.layers[k],
                dh,
                grad,
                want_dx.then_some(&mut *dtmp),
            );
            if want_dx {
                std::mem::swap(dh, dtmp);
            }
        }
    }
}
