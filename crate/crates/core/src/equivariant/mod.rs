//! SO(3)-equivariant feature algebra for `l <= 2`.
//!
//! A feature is a stack of irreducible blocks laid out as all `l = 0`
//! channels, then all `l = 1` channels (3 values each), then all `l = 2`
//! channels (5 values each). A rotation acts on each block by its Wigner-D.

pub mod cg;
mod cg_table;
pub mod edge;
pub mod layers;
pub mod sh;
pub mod tp;
pub mod wigner;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::se3::Rotation;

pub use cg::{Path, PATHS};
pub use edge::{edge_encoding, EdgeEncoding, RadialBasis};
pub use layers::{film_modulate, EquivariantLinear, Film, TimeEmbedding};
pub use sh::real_spherical_harmonics;
pub use tp::TensorProduct;
pub use wigner::{wigner_d, Wigner};

/// Channel multiplicities for `l = 0, 1, 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct IrrepSpec {
    pub mult: [usize; 3],
}

impl IrrepSpec {
    pub const fn new(m0: usize, m1: usize, m2: usize) -> Self {
        Self { mult: [m0, m1, m2] }
    }

    pub const fn scalars(n: usize) -> Self {
        Self::new(n, 0, 0)
    }

    pub const fn dim(&self) -> usize {
        self.mult[0] + 3 * self.mult[1] + 5 * self.mult[2]
    }

    /// Start of the `l` section.
    pub const fn offset(&self, l: usize) -> usize {
        match l {
            0 => 0,
            1 => self.mult[0],
            _ => self.mult[0] + 3 * self.mult[1],
        }
    }

    /// Index range of channel `c` of degree `l`.
    #[inline]
    pub const fn block(&self, l: usize, c: usize) -> Range<usize> {
        let start = self.offset(l) + c * (2 * l + 1);
        start..start + 2 * l + 1
    }

    /// Number of `(l, channel)` blocks.
    pub const fn blocks(&self) -> usize {
        self.mult[0] + self.mult[1] + self.mult[2]
    }

    /// Iterates `(l, channel, range)` over all blocks.
    pub fn iter_blocks(&self) -> impl Iterator<Item = (usize, usize, Range<usize>)> + '_ {
        (0..3).flat_map(move |l| (0..self.mult[l]).map(move |c| (l, c, self.block(l, c))))
    }
}

/// One point's feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct IrrepFeature {
    pub spec: IrrepSpec,
    pub values: Vec<f64>,
}

impl IrrepFeature {
    pub fn zeros(spec: IrrepSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.dim()],
        }
    }

    pub fn new(spec: IrrepSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.dim() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "feature of length {} for spec {:?}",
                values.len(),
                spec.mult
            )));
        }
        Ok(Self { spec, values })
    }

    #[inline]
    pub fn block(&self, l: usize, c: usize) -> &[f64] {
        &self.values[self.spec.block(l, c)]
    }

    #[inline]
    pub fn block_mut(&mut self, l: usize, c: usize) -> &mut [f64] {
        let r = self.spec.block(l, c);
        &mut self.values[r]
    }

    /// Euclidean norm of every `(l, channel)` block, in layout order.
    pub fn block_norms(&self) -> Vec<f64> {
        self.spec
            .iter_blocks()
            .map(|(_, _, r)| crate::math::sqrt(self.values[r].iter().map(|v| v * v).sum()))
            .collect()
    }

    pub fn transformed(&self, w: &Wigner) -> Self {
        let mut out = self.clone();
        rotate_in_place(&self.spec, &mut out.values, w);
        out
    }
}

/// Applies `w` to every block of a packed feature slice.
pub fn rotate_in_place(spec: &IrrepSpec, values: &mut [f64], w: &Wigner) {
    for l in 1..3 {
        for c in 0..spec.mult[l] {
            w.apply(l, &mut values[spec.block(l, c)]);
        }
    }
}

/// Each `(l, channel)` block multiplied by `D_l(R)`.
pub fn transform_feature(f: &IrrepFeature, r: &Rotation) -> IrrepFeature {
    f.transformed(&Wigner::new(r))
}
