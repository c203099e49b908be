//! Real Wigner-D matrices for l <= 2 in the harmonic component order.

use nalgebra::{DMatrix, Matrix3, SMatrix};

use super::cg;
use crate::error::{invalid, Result};
use crate::se3::Rotation;

pub type Matrix5 = SMatrix<f64, 5, 5>;

/// `D_1` and `D_2` of one rotation (`D_0 = [1]`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wigner {
    pub d1: Matrix3<f64>,
    pub d2: Matrix5,
}

impl Wigner {
    pub fn identity() -> Self {
        Self {
            d1: Matrix3::identity(),
            d2: Matrix5::identity(),
        }
    }

    pub fn new(r: &Rotation) -> Self {
        if *r == Rotation::identity() {
            return Self::identity();
        }
        let m = r.matrix();
        // (x, y, z) -> (y, z, x)
        let d1 = Matrix3::from_fn(|i, j| m[(PERM[i], PERM[j])]);
        Self { d1, d2: d2_from_d1(&d1) }
    }

    /// Representation of the inverse rotation.
    pub fn transpose(&self) -> Self {
        Self {
            d1: self.d1.transpose(),
            d2: self.d2.transpose(),
        }
    }

    /// `block <- D_l block` in place.
    #[inline]
    pub fn apply(&self, l: usize, block: &mut [f64]) {
        match l {
            0 => {}
            1 => {
                let v = [block[0], block[1], block[2]];
                for i in 0..3 {
                    block[i] = (0..3).map(|j| self.d1[(i, j)] * v[j]).sum();
                }
            }
            2 => {
                let v = [block[0], block[1], block[2], block[3], block[4]];
                for i in 0..5 {
                    block[i] = (0..5).map(|j| self.d2[(i, j)] * v[j]).sum();
                }
            }
            _ => unreachable!("l <= 2"),
        }
    }

    pub fn matrix(&self, l: usize) -> DMatrix<f64> {
        match l {
            0 => DMatrix::identity(1, 1),
            1 => DMatrix::from_fn(3, 3, |i, j| self.d1[(i, j)]),
            _ => DMatrix::from_fn(5, 5, |i, j| self.d2[(i, j)]),
        }
    }
}

const PERM: [usize; 3] = [1, 2, 0];

/// `D_2 = C (D_1 (x) D_1) C^T` with `C` the 1 (x) 1 -> 2 coupling, whose rows
/// are orthonormal in `R^9`.
fn d2_from_d1(d1: &Matrix3<f64>) -> Matrix5 {
    let c = cg::coefficients(1, 1, 2).expect("1x1->2 path");
    // t[n][i][j] = sum_kl D1[i,k] D1[j,l] C[n,k,l]
    let mut t = [[[0.0; 3]; 3]; 5];
    for (n, tn) in t.iter_mut().enumerate() {
        let cn = &c[n * 9..n * 9 + 9];
        let mut half = [[0.0; 3]; 3];
        for i in 0..3 {
            for l in 0..3 {
                half[i][l] = (0..3).map(|k| d1[(i, k)] * cn[k * 3 + l]).sum();
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                tn[i][j] = (0..3).map(|l| half[i][l] * d1[(j, l)]).sum();
            }
        }
    }
    Matrix5::from_fn(|m, n| {
        let cm = &c[m * 9..m * 9 + 9];
        (0..9).map(|ij| cm[ij] * t[n][ij / 3][ij % 3]).sum()
    })
}

/// `D_l(R)` as a dense matrix.
pub fn wigner_d(r: &Rotation, l: usize) -> Result<DMatrix<f64>> {
    if l > 2 {
        return Err(invalid("wigner_d supports l <= 2"));
    }
    Ok(Wigner::new(r).matrix(l))
}
