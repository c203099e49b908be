//! Radial and angular encodings of point-to-point edges.

use alloc::vec::Vec;

use nalgebra::Vector3;

use super::sh::{harmonics_unchecked, SH_DIM};
use crate::error::{invalid, Error, Result};
use crate::math::{self, PI};

/// Below this length an edge has no direction.
pub const MIN_EDGE_LENGTH: f64 = 1e-9;

/// Gaussian bumps on `[0, cutoff]` times a cosine envelope that vanishes at
/// and beyond the cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialBasis {
    pub count: usize,
    pub cutoff: f64,
}

impl RadialBasis {
    pub fn new(count: usize, cutoff: f64) -> Result<Self> {
        if count == 0 || !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(invalid("radial basis needs count > 0 and a positive cutoff"));
        }
        Ok(Self { count, cutoff })
    }

    pub fn eval_into(&self, r: f64, out: &mut [f64]) {
        if r >= self.cutoff {
            out[..self.count].fill(0.0);
            return;
        }
        let envelope = 0.5 * (math::cos(PI * r / self.cutoff) + 1.0);
        let step = self.cutoff / self.count.max(2).saturating_sub(1) as f64;
        for (b, o) in out[..self.count].iter_mut().enumerate() {
            let z = (r - b as f64 * step) / step;
            *o = envelope * math::exp(-0.5 * z * z);
        }
    }

    pub fn eval(&self, r: f64) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.count];
        self.eval_into(r, &mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeEncoding {
    pub radial: Vec<f64>,
    pub angular: [f64; SH_DIM],
}

/// Angular part of an edge, with `(1, 0, ..., 0)` for a zero-length edge.
pub(crate) fn edge_harmonics(d: &Vector3<f64>) -> [f64; SH_DIM] {
    let r = d.norm();
    if r < MIN_EDGE_LENGTH {
        let mut y = [0.0; SH_DIM];
        y[0] = 1.0;
        return y;
    }
    harmonics_unchecked(&(d / r))
}

pub fn edge_encoding(
    src: &Vector3<f64>,
    dst: &Vector3<f64>,
    n_radial: usize,
    cutoff: f64,
) -> Result<EdgeEncoding> {
    let d = dst - src;
    let r = d.norm();
    if !(r > MIN_EDGE_LENGTH) {
        return Err(Error::DegenerateEdge);
    }
    Ok(EdgeEncoding {
        radial: RadialBasis::new(n_radial, cutoff)?.eval(r),
        angular: harmonics_unchecked(&(d / r)),
    })
}
