//! Weighted tensor product of two irrep features.

use alloc::vec::Vec;

use super::cg::{couple, couple_backward, Path, PATHS};
use super::{IrrepFeature, IrrepSpec};
use crate::error::{Error, Result};

/// Fully connected tensor product: for each admissible path present in the
/// specs, `out[l3][w] += sum_{u,v} W_p[w][u][v] C_p(a[l1][u], b[l2][v])`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorProduct {
    pub a: IrrepSpec,
    pub b: IrrepSpec,
    pub out: IrrepSpec,
    pub paths: Vec<Path>,
}

impl TensorProduct {
    pub fn new(a: IrrepSpec, b: IrrepSpec, out: IrrepSpec) -> Self {
        let paths = PATHS
            .iter()
            .copied()
            .filter(|p| a.mult[p.l1] > 0 && b.mult[p.l2] > 0 && out.mult[p.l3] > 0)
            .collect();
        Self { a, b, out, paths }
    }

    fn path_len(&self, p: &Path) -> usize {
        self.out.mult[p.l3] * self.a.mult[p.l1] * self.b.mult[p.l2]
    }

    pub fn num_weights(&self) -> usize {
        self.paths.iter().map(|p| self.path_len(p)).sum()
    }

    /// `out += TP(a, b; w)`.
    pub fn forward(&self, a: &[f64], b: &[f64], w: &[f64], out: &mut [f64]) {
        let mut off = 0;
        let mut v = [0.0; 5];
        for p in &self.paths {
            let (ma, mb, mo) = (self.a.mult[p.l1], self.b.mult[p.l2], self.out.mult[p.l3]);
            let n3 = p.dims().2;
            for u in 0..ma {
                let au = &a[self.a.block(p.l1, u)];
                for k in 0..mb {
                    v[..n3].fill(0.0);
                    couple(*p, au, &b[self.b.block(p.l2, k)], 1.0, &mut v);
                    for c in 0..mo {
                        let wt = w[off + (c * ma + u) * mb + k];
                        for (o, x) in out[self.out.block(p.l3, c)].iter_mut().zip(&v[..n3]) {
                            *o += wt * x;
                        }
                    }
                }
            }
            off += self.path_len(p);
        }
    }

    /// Accumulates gradients of `g . TP(a, b; w)`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        a: &[f64],
        b: &[f64],
        w: &[f64],
        g: &[f64],
        da: &mut [f64],
        db: &mut [f64],
        dw: &mut [f64],
    ) {
        let mut off = 0;
        let mut v = [0.0; 5];
        let mut gv = [0.0; 5];
        for p in &self.paths {
            let (ma, mb, mo) = (self.a.mult[p.l1], self.b.mult[p.l2], self.out.mult[p.l3]);
            let n3 = p.dims().2;
            for u in 0..ma {
                let ra = self.a.block(p.l1, u);
                for k in 0..mb {
                    let rb = self.b.block(p.l2, k);
                    v[..n3].fill(0.0);
                    couple(*p, &a[ra.clone()], &b[rb.clone()], 1.0, &mut v);
                    gv[..n3].fill(0.0);
                    for c in 0..mo {
                        let idx = off + (c * ma + u) * mb + k;
                        let gc = &g[self.out.block(p.l3, c)];
                        dw[idx] += gc.iter().zip(&v[..n3]).map(|(x, y)| x * y).sum::<f64>();
                        for (s, x) in gv[..n3].iter_mut().zip(gc) {
                            *s += w[idx] * x;
                        }
                    }
                    let (au, bk) = (&a[ra.clone()], &b[rb.clone()]);
                    couple_backward(*p, au, bk, &gv[..n3], 1.0, &mut da[ra.clone()], &mut db[rb]);
                }
            }
            off += self.path_len(p);
        }
    }
}

/// Tensor product of two features into `out_spec`.
pub fn tensor_product(
    f: &IrrepFeature,
    g: &IrrepFeature,
    out_spec: IrrepSpec,
    weights: &[f64],
) -> Result<IrrepFeature> {
    let tp = TensorProduct::new(f.spec, g.spec, out_spec);
    if weights.len() != tp.num_weights() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "tensor product expects {} weights, got {}",
            tp.num_weights(),
            weights.len()
        )));
    }
    let mut out = IrrepFeature::zeros(out_spec);
    tp.forward(&f.values, &g.values, weights, &mut out.values);
    Ok(out)
}
