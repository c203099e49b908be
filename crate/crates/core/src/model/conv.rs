//! Tensor-product point convolution.
//!
//! For query `q` with neighbors `j` at offset `d = x_j - q`:
//!
//! ```text
//! A_p[u]   = 1/k sum_j rho_p(|d|) C_p(f_j[l1][u], Y_l2(d))
//! pre[l3]  = sum_{p -> l3} W_p A_p (+ bias on l = 0)
//! out      = act(pre)
//! ```
//!
//! with `rho_p = V_p . radial(|d|)`. Weight layout: `V [paths][radial]`,
//! then every `W_p [out][in]` in path order, then the scalar biases.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::equivariant::cg::{contract_second, Path, PATHS};
use crate::equivariant::edge::edge_harmonics;
use crate::equivariant::layers::{activate, activate_backward};
use crate::equivariant::sh::SH_DIM;
use crate::equivariant::{IrrepSpec, RadialBasis};

const SH_OFFSET: [usize; 3] = [0, 1, 4];

/// Neighbor lists with their geometric encodings, stored flat.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Edges {
    /// `offsets[q]..offsets[q + 1]` indexes the edges of query `q`.
    pub offsets: Vec<usize>,
    pub src: Vec<usize>,
    pub radial: Vec<f64>,
    pub sh: Vec<[f64; SH_DIM]>,
    pub n_radial: usize,
}

impl Edges {
    pub fn build(
        sources: &[Vector3<f64>],
        queries: &[Vector3<f64>],
        neighbors: &[Vec<usize>],
        basis: &RadialBasis,
    ) -> Self {
        let nb = basis.count;
        let total: usize = neighbors.iter().map(Vec::len).sum();
        let mut e = Self {
            offsets: Vec::with_capacity(queries.len() + 1),
            src: Vec::with_capacity(total),
            radial: vec![0.0; total * nb],
            sh: Vec::with_capacity(total),
            n_radial: nb,
        };
        e.offsets.push(0);
        for (q, list) in queries.iter().zip(neighbors) {
            for &j in list {
                let d = sources[j] - q;
                let k = e.src.len();
                basis.eval_into(d.norm(), &mut e.radial[k * nb..(k + 1) * nb]);
                e.sh.push(edge_harmonics(&d));
                e.src.push(j);
            }
            e.offsets.push(e.src.len());
        }
        e
    }

    pub fn queries(&self) -> usize {
        self.offsets.len() - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TpConv {
    pub input: IrrepSpec,
    pub output: IrrepSpec,
    pub n_radial: usize,
    pub activation: bool,
    paths: Vec<Path>,
    /// Offset of each path's aggregate inside one query's aggregate block.
    agg_offsets: Vec<usize>,
    agg_dim: usize,
}

/// Forward intermediates kept for the backward pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvCache {
    pub agg: Vec<f64>,
    pub pre: Vec<f64>,
}

impl TpConv {
    pub fn new(input: IrrepSpec, output: IrrepSpec, n_radial: usize, activation: bool) -> Self {
        let paths: Vec<Path> = PATHS
            .iter()
            .copied()
            .filter(|p| input.mult[p.l1] > 0 && output.mult[p.l3] > 0)
            .collect();
        let mut agg_offsets = Vec::with_capacity(paths.len());
        let mut agg_dim = 0;
        for p in &paths {
            agg_offsets.push(agg_dim);
            agg_dim += input.mult[p.l1] * p.dims().2;
        }
        Self {
            input,
            output,
            n_radial,
            activation,
            paths,
            agg_offsets,
            agg_dim,
        }
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    fn radial_len(&self) -> usize {
        self.paths.len() * self.n_radial
    }

    fn mix_offset(&self, pi: usize) -> usize {
        self.radial_len()
            + self.paths[..pi]
                .iter()
                .map(|p| self.output.mult[p.l3] * self.input.mult[p.l1])
                .sum::<usize>()
    }

    pub fn num_weights(&self) -> usize {
        self.mix_offset(self.paths.len()) + self.output.mult[0]
    }

    /// Per-path radial scalars of one edge.
    fn rho(&self, radial: &[f64], w: &[f64], out: &mut [f64]) {
        let nb = self.n_radial;
        for (pi, o) in out.iter_mut().enumerate().take(self.paths.len()) {
            *o = w[pi * nb..(pi + 1) * nb].iter().zip(radial).map(|(a, b)| a * b).sum();
        }
    }

    /// Writes one output feature per query into `out`.
    pub fn forward(&self, edges: &Edges, feats: &[f64], w: &[f64], out: &mut [f64]) -> ConvCache {
        let nq = edges.queries();
        let (din, dout, nb) = (self.input.dim(), self.output.dim(), self.n_radial);
        let mut cache = ConvCache {
            agg: vec![0.0; nq * self.agg_dim],
            pre: vec![0.0; nq * dout],
        };
        let mut rho = vec![0.0; self.paths.len()];
        let mut k = [0.0; 25];
        for q in 0..nq {
            let (lo, hi) = (edges.offsets[q], edges.offsets[q + 1]);
            let agg = &mut cache.agg[q * self.agg_dim..(q + 1) * self.agg_dim];
            if hi > lo {
                let inv = 1.0 / (hi - lo) as f64;
                for e in lo..hi {
                    self.rho(&edges.radial[e * nb..(e + 1) * nb], w, &mut rho);
                    let f = &feats[edges.src[e] * din..(edges.src[e] + 1) * din];
                    let y = &edges.sh[e];
                    for (pi, p) in self.paths.iter().enumerate() {
                        let s = rho[pi] * inv;
                        if s == 0.0 {
                            continue;
                        }
                        let (n1, n2, n3) = p.dims();
                        contract_second(*p, &y[SH_OFFSET[p.l2]..SH_OFFSET[p.l2] + n2], &mut k);
                        for u in 0..self.input.mult[p.l1] {
                            let fu = &f[self.input.block(p.l1, u)];
                            let a = &mut agg[self.agg_offsets[pi] + u * n3..self.agg_offsets[pi] + (u + 1) * n3];
                            for m3 in 0..n3 {
                                let row = &k[m3 * n1..(m3 + 1) * n1];
                                a[m3] += s * row.iter().zip(fu).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    }
                }
            }
            let pre = &mut cache.pre[q * dout..(q + 1) * dout];
            self.mix(agg, w, pre);
            let o = &mut out[q * dout..(q + 1) * dout];
            if self.activation {
                activate(&self.output, pre, o);
            } else {
                o.copy_from_slice(pre);
            }
        }
        cache
    }

    fn mix(&self, agg: &[f64], w: &[f64], pre: &mut [f64]) {
        for (pi, p) in self.paths.iter().enumerate() {
            let (mi, mo) = (self.input.mult[p.l1], self.output.mult[p.l3]);
            let n3 = p.dims().2;
            let off = self.mix_offset(pi);
            for c in 0..mo {
                let dst = self.output.block(p.l3, c);
                for u in 0..mi {
                    let wt = w[off + c * mi + u];
                    let a = &agg[self.agg_offsets[pi] + u * n3..self.agg_offsets[pi] + (u + 1) * n3];
                    for (o, v) in pre[dst.clone()].iter_mut().zip(a) {
                        *o += wt * v;
                    }
                }
            }
        }
        let boff = self.mix_offset(self.paths.len());
        for (o, b) in pre[..self.output.mult[0]].iter_mut().zip(&w[boff..]) {
            *o += b;
        }
    }

    /// Accumulates gradients for the weights and, if given, the source features.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        edges: &Edges,
        feats: &[f64],
        w: &[f64],
        cache: &ConvCache,
        g_out: &[f64],
        dw: &mut [f64],
        mut dfeats: Option<&mut [f64]>,
    ) {
        let nq = edges.queries();
        let (din, dout, nb) = (self.input.dim(), self.output.dim(), self.n_radial);
        let mut g_pre = vec![0.0; dout];
        let mut g_agg = vec![0.0; self.agg_dim];
        let mut rho = vec![0.0; self.paths.len()];
        let mut drho = vec![0.0; self.paths.len()];
        let mut k = [0.0; 25];
        let boff = self.mix_offset(self.paths.len());
        for q in 0..nq {
            let pre = &cache.pre[q * dout..(q + 1) * dout];
            let go = &g_out[q * dout..(q + 1) * dout];
            if self.activation {
                g_pre.fill(0.0);
                activate_backward(&self.output, pre, go, &mut g_pre);
            } else {
                g_pre.copy_from_slice(go);
            }
            for (d, g) in dw[boff..boff + self.output.mult[0]].iter_mut().zip(&g_pre) {
                *d += g;
            }
            let agg = &cache.agg[q * self.agg_dim..(q + 1) * self.agg_dim];
            g_agg.fill(0.0);
            for (pi, p) in self.paths.iter().enumerate() {
                let (mi, mo) = (self.input.mult[p.l1], self.output.mult[p.l3]);
                let n3 = p.dims().2;
                let off = self.mix_offset(pi);
                for c in 0..mo {
                    let gc = &g_pre[self.output.block(p.l3, c)];
                    for u in 0..mi {
                        let ai = self.agg_offsets[pi] + u * n3;
                        let a = &agg[ai..ai + n3];
                        dw[off + c * mi + u] += gc.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
                        let wt = w[off + c * mi + u];
                        for (ga, gv) in g_agg[ai..ai + n3].iter_mut().zip(gc) {
                            *ga += wt * gv;
                        }
                    }
                }
            }
            let (lo, hi) = (edges.offsets[q], edges.offsets[q + 1]);
            if hi == lo {
                continue;
            }
            let inv = 1.0 / (hi - lo) as f64;
            for e in lo..hi {
                let radial = &edges.radial[e * nb..(e + 1) * nb];
                self.rho(radial, w, &mut rho);
                drho.fill(0.0);
                let src = edges.src[e];
                let f = &feats[src * din..(src + 1) * din];
                let y = &edges.sh[e];
                for (pi, p) in self.paths.iter().enumerate() {
                    let (n1, n2, n3) = p.dims();
                    contract_second(*p, &y[SH_OFFSET[p.l2]..SH_OFFSET[p.l2] + n2], &mut k);
                    for u in 0..self.input.mult[p.l1] {
                        let rin = self.input.block(p.l1, u);
                        let ai = self.agg_offsets[pi] + u * n3;
                        let ga = &g_agg[ai..ai + n3];
                        // <ga, K f_u>
                        let mut dot = 0.0;
                        for m3 in 0..n3 {
                            let row = &k[m3 * n1..(m3 + 1) * n1];
                            dot += ga[m3] * row.iter().zip(&f[rin.clone()]).map(|(x, y)| x * y).sum::<f64>();
                        }
                        drho[pi] += dot * inv;
                        if let Some(df) = dfeats.as_deref_mut() {
                            let s = rho[pi] * inv;
                            let dfu = &mut df[src * din + rin.start..src * din + rin.end];
                            for m3 in 0..n3 {
                                let gs = s * ga[m3];
                                for m1 in 0..n1 {
                                    dfu[m1] += gs * k[m3 * n1 + m1];
                                }
                            }
                        }
                    }
                }
                for pi in 0..self.paths.len() {
                    for (d, r) in dw[pi * nb..(pi + 1) * nb].iter_mut().zip(radial) {
                        *d += drho[pi] * r;
                    }
                }
            }
        }
    }
}
