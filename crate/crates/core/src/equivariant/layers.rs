//! Channel mixing, time embedding, FiLM modulation and the norm activation.

use alloc::vec;
use alloc::vec::Vec;

use super::{IrrepFeature, IrrepSpec};
use crate::error::{invalid, Error, Result};
use crate::math;

/// Per-degree channel mixing `y[l] = W_l x[l]`, plus a bias on `l = 0`.
///
/// Weight layout: `W_0 [out][in]`, `W_1`, `W_2`, then `m0_out` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EquivariantLinear {
    pub input: IrrepSpec,
    pub output: IrrepSpec,
}

impl EquivariantLinear {
    pub fn new(input: IrrepSpec, output: IrrepSpec) -> Self {
        Self { input, output }
    }

    fn matrix_offset(&self, l: usize) -> usize {
        (0..l).map(|k| self.input.mult[k] * self.output.mult[k]).sum()
    }

    pub fn num_weights(&self) -> usize {
        self.matrix_offset(3) + self.output.mult[0]
    }

    /// Weights acting as the identity (square specs only).
    pub fn identity_weights(&self) -> Result<Vec<f64>> {
        if self.input != self.output {
            return Err(invalid("identity weights need equal specs"));
        }
        let mut w = vec![0.0; self.num_weights()];
        for l in 0..3 {
            let m = self.input.mult[l];
            let off = self.matrix_offset(l);
            for c in 0..m {
                w[off + c * m + c] = 1.0;
            }
        }
        Ok(w)
    }

    /// `out += W x + b`.
    pub fn forward(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        for l in 0..3 {
            let (mi, mo) = (self.input.mult[l], self.output.mult[l]);
            let off = self.matrix_offset(l);
            for c in 0..mo {
                let dst = self.output.block(l, c);
                for u in 0..mi {
                    let wt = w[off + c * mi + u];
                    if wt == 0.0 {
                        continue;
                    }
                    let src = self.input.block(l, u);
                    for (o, v) in out[dst.clone()].iter_mut().zip(&x[src]) {
                        *o += wt * v;
                    }
                }
            }
        }
        let bias = &w[self.matrix_offset(3)..];
        for (o, b) in out[..self.output.mult[0]].iter_mut().zip(bias) {
            *o += b;
        }
    }

    /// Accumulates gradients of `g . (W x + b)`.
    pub fn backward(&self, x: &[f64], w: &[f64], g: &[f64], dx: &mut [f64], dw: &mut [f64]) {
        for l in 0..3 {
            let (mi, mo) = (self.input.mult[l], self.output.mult[l]);
            let off = self.matrix_offset(l);
            for c in 0..mo {
                let gc = &g[self.output.block(l, c)];
                for u in 0..mi {
                    let src = self.input.block(l, u);
                    dw[off + c * mi + u] += gc.iter().zip(&x[src.clone()]).map(|(a, b)| a * b).sum::<f64>();
                    let wt = w[off + c * mi + u];
                    for (d, gv) in dx[src].iter_mut().zip(gc) {
                        *d += wt * gv;
                    }
                }
            }
        }
        let nb = self.output.mult[0];
        let off = self.matrix_offset(3);
        for (d, gv) in dw[off..off + nb].iter_mut().zip(&g[..nb]) {
            *d += gv;
        }
    }

    pub fn apply(&self, f: &IrrepFeature, w: &[f64]) -> Result<IrrepFeature> {
        if f.spec != self.input || w.len() != self.num_weights() {
            return Err(Error::ShapeMismatch("equivariant linear: shape mismatch".into()));
        }
        let mut out = IrrepFeature::zeros(self.output);
        self.forward(&f.values, w, &mut out.values);
        Ok(out)
    }
}

/// Sinusoidal features of the diffusion time.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeEmbedding {
    pub values: Vec<f64>,
}

impl TimeEmbedding {
    pub const DEFAULT_DIM: usize = 32;
    const MAX_FREQUENCY: f64 = 100.0;

    /// `[sin(w_i t) | cos(w_i t)]`, frequencies geometric on `[1, 100]`.
    pub fn new(t: f64, dim: usize) -> Result<Self> {
        if dim < 2 || dim % 2 != 0 {
            return Err(invalid("time embedding dimension must be even and >= 2"));
        }
        let h = dim / 2;
        let mut values = vec![0.0; dim];
        for i in 0..h {
            let f = if h == 1 { 0.0 } else { i as f64 / (h - 1) as f64 };
            let w = math::exp(f * math::ln(Self::MAX_FREQUENCY));
            values[i] = math::sin(w * t);
            values[h + i] = math::cos(w * t);
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// `gamma` per `(l, channel)` block, `shift` per scalar channel.
pub fn film_modulate(f: &IrrepFeature, gamma: &[f64], shift: &[f64]) -> Result<IrrepFeature> {
    if gamma.len() != f.spec.blocks() || shift.len() != f.spec.mult[0] {
        return Err(Error::ShapeMismatch("film: modulation shape mismatch".into()));
    }
    let mut out = f.clone();
    for (k, (l, _, r)) in f.spec.iter_blocks().enumerate() {
        for v in &mut out.values[r.clone()] {
            *v *= gamma[k];
        }
        if l == 0 {
            out.values[r.start] += shift[k];
        }
    }
    Ok(out)
}

/// Learned time-to-modulation map: `gamma = 1 + A e(t)`, `shift = B e(t)`.
///
/// Weight layout: `A [blocks][time_dim]` then `B [m0][time_dim]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Film {
    pub spec: IrrepSpec,
    pub time_dim: usize,
}

impl Film {
    pub fn new(spec: IrrepSpec, time_dim: usize) -> Self {
        Self { spec, time_dim }
    }

    pub fn num_weights(&self) -> usize {
        (self.spec.blocks() + self.spec.mult[0]) * self.time_dim
    }

    pub fn modulation(&self, e: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.time_dim;
        let nb = self.spec.blocks();
        let row = |k: usize| -> f64 { w[k * d..(k + 1) * d].iter().zip(e).map(|(a, b)| a * b).sum() };
        let gamma = (0..nb).map(|k| 1.0 + row(k)).collect();
        let shift = (0..self.spec.mult[0]).map(|k| row(nb + k)).collect();
        (gamma, shift)
    }

    /// `out = gamma . x + shift`, overwriting `out`.
    pub fn forward(&self, x: &[f64], e: &[f64], w: &[f64], out: &mut [f64]) {
        let (gamma, shift) = self.modulation(e, w);
        for (k, (l, _, r)) in self.spec.iter_blocks().enumerate() {
            for i in r.clone() {
                out[i] = gamma[k] * x[i];
            }
            if l == 0 {
                out[r.start] += shift[k];
            }
        }
    }

    /// Accumulates gradients with respect to `x` and the weights.
    pub fn backward(&self, x: &[f64], e: &[f64], w: &[f64], g: &[f64], dx: &mut [f64], dw: &mut [f64]) {
        let d = self.time_dim;
        let nb = self.spec.blocks();
        let (gamma, _) = self.modulation(e, w);
        for (k, (l, _, r)) in self.spec.iter_blocks().enumerate() {
            let mut dgamma = 0.0;
            for i in r.clone() {
                dgamma += g[i] * x[i];
                dx[i] += gamma[k] * g[i];
            }
            for (dwv, ev) in dw[k * d..(k + 1) * d].iter_mut().zip(e) {
                *dwv += dgamma * ev;
            }
            if l == 0 {
                let row = nb + k;
                for (dwv, ev) in dw[row * d..(row + 1) * d].iter_mut().zip(e) {
                    *dwv += g[r.start] * ev;
                }
            }
        }
    }
}

/// SiLU on scalars, `v / sqrt(1 + |v|^2)` on each `l > 0` block.
pub fn activate(spec: &IrrepSpec, x: &[f64], out: &mut [f64]) {
    for i in 0..spec.mult[0] {
        out[i] = x[i] * math::sigmoid(x[i]);
    }
    for l in 1..3 {
        for c in 0..spec.mult[l] {
            let r = spec.block(l, c);
            let s = 1.0 / math::sqrt(1.0 + x[r.clone()].iter().map(|v| v * v).sum::<f64>());
            for i in r {
                out[i] = x[i] * s;
            }
        }
    }
}

/// Accumulates `dx += J(x)^T g` for [`activate`].
pub fn activate_backward(spec: &IrrepSpec, x: &[f64], g: &[f64], dx: &mut [f64]) {
    for i in 0..spec.mult[0] {
        let s = math::sigmoid(x[i]);
        dx[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
    }
    for l in 1..3 {
        for c in 0..spec.mult[l] {
            let r = spec.block(l, c);
            let n2: f64 = x[r.clone()].iter().map(|v| v * v).sum();
            let s = 1.0 / math::sqrt(1.0 + n2);
            let gv: f64 = r.clone().map(|i| g[i] * x[i]).sum();
            for i in r {
                dx[i] += s * g[i] - s * s * s * gv * x[i];
            }
        }
    }
}
