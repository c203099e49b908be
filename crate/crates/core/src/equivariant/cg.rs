//! Real Clebsch-Gordan tensors for couplings `l1 (x) l2 -> l3`, all `l <= 2`.
//!
//! A tensor is stored flat as `C[m3][m1][m2]` and scaled so that
//! `||C||_F^2 = 2 l3 + 1`; with this scaling every `0 (x) l -> l` and
//! `l (x) 0 -> l` coupling is the identity. The shipped constants live in
//! `cg_table.rs` and are produced by [`generate`] from Cartesian
//! intertwiners (dot, cross, symmetric-traceless and commutator products);
//! regenerate with `cargo run -p eqgrasp-core --example gen_cg_table`.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};

use super::cg_table::TABLE;
use super::sh::{l1_to_vector, l2_to_matrix, matrix_to_l2, vector_to_l1};
use crate::math;

/// A coupling `l1 (x) l2 -> l3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Path {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
}

impl Path {
    pub const fn new(l1: usize, l2: usize, l3: usize) -> Self {
        Self { l1, l2, l3 }
    }

    pub const fn dims(&self) -> (usize, usize, usize) {
        (2 * self.l1 + 1, 2 * self.l2 + 1, 2 * self.l3 + 1)
    }

    pub fn coefficients(&self) -> &'static [f64] {
        coefficients(self.l1, self.l2, self.l3).expect("path validated at construction")
    }
}

/// All 15 admissible paths, ordered by `(l1, l2, l3)`.
pub const PATHS: [Path; 15] = [
    Path::new(0, 0, 0),
    Path::new(0, 1, 1),
    Path::new(0, 2, 2),
    Path::new(1, 0, 1),
    Path::new(1, 1, 0),
    Path::new(1, 1, 1),
    Path::new(1, 1, 2),
    Path::new(1, 2, 1),
    Path::new(1, 2, 2),
    Path::new(2, 0, 2),
    Path::new(2, 1, 1),
    Path::new(2, 1, 2),
    Path::new(2, 2, 0),
    Path::new(2, 2, 1),
    Path::new(2, 2, 2),
];

pub fn is_admissible(l1: usize, l2: usize, l3: usize) -> bool {
    l1 <= 2 && l2 <= 2 && l3 <= 2 && l3 + l1.min(l2) >= l1.max(l2) && l3 <= l1 + l2
}

/// Shipped coefficients, or `None` for an inadmissible path.
pub fn coefficients(l1: usize, l2: usize, l3: usize) -> Option<&'static [f64]> {
    TABLE
        .iter()
        .find(|(a, b, c, _)| (*a, *b, *c) == (l1, l2, l3))
        .map(|e| e.3)
}

/// `out[m3] += scale * sum C[m3][m1][m2] a[m1] b[m2]`.
#[inline]
pub fn couple(p: Path, a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
    let (n1, n2, n3) = p.dims();
    let c = p.coefficients();
    for m3 in 0..n3 {
        let mut acc = 0.0;
        for m1 in 0..n1 {
            let row = &c[(m3 * n1 + m1) * n2..(m3 * n1 + m1 + 1) * n2];
            let mut s = 0.0;
            for m2 in 0..n2 {
                s += row[m2] * b[m2];
            }
            acc += s * a[m1];
        }
        out[m3] += scale * acc;
    }
}

/// `K[m3][m1] = sum_m2 C[m3][m1][m2] b[m2]`, so that `couple(a, b) = K a`.
#[inline]
pub fn contract_second(p: Path, b: &[f64], k: &mut [f64]) {
    let (n1, n2, n3) = p.dims();
    let c = p.coefficients();
    for m31 in 0..n3 * n1 {
        k[m31] = (0..n2).map(|m2| c[m31 * n2 + m2] * b[m2]).sum();
    }
}

/// Gradients of `g . couple(a, b)` with respect to `a` and `b`, accumulated.
#[inline]
pub fn couple_backward(
    p: Path,
    a: &[f64],
    b: &[f64],
    g: &[f64],
    scale: f64,
    da: &mut [f64],
    db: &mut [f64],
) {
    let (n1, n2, n3) = p.dims();
    let c = p.coefficients();
    for m3 in 0..n3 {
        let gs = g[m3] * scale;
        if gs == 0.0 {
            continue;
        }
        for m1 in 0..n1 {
            let row = &c[(m3 * n1 + m1) * n2..(m3 * n1 + m1 + 1) * n2];
            let mut s = 0.0;
            for m2 in 0..n2 {
                s += row[m2] * b[m2];
                db[m2] += gs * row[m2] * a[m1];
            }
            da[m1] += gs * s;
        }
    }
}

enum Block {
    Scalar(f64),
    Vector(Vector3<f64>),
    Matrix(Matrix3<f64>),
}

fn basis_block(l: usize, m: usize) -> Block {
    let n = 2 * l + 1;
    let mut e = [0.0; 5];
    e[m] = 1.0;
    match l {
        0 => Block::Scalar(1.0),
        1 => Block::Vector(l1_to_vector(&e[..n])),
        _ => Block::Matrix(l2_to_matrix(&e[..n])),
    }
}

fn vex(a: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)])
}

/// Cartesian intertwiner for each admissible path.
fn cartesian(a: &Block, b: &Block) -> [Option<Block>; 3] {
    use Block::*;
    match (a, b) {
        (Scalar(s), Scalar(t)) => [Some(Scalar(s * t)), None, None],
        (Scalar(s), Vector(v)) | (Vector(v), Scalar(s)) => [None, Some(Vector(v * *s)), None],
        (Scalar(s), Matrix(m)) | (Matrix(m), Scalar(s)) => [None, None, Some(Matrix(m * *s))],
        (Vector(u), Vector(v)) => [
            Some(Scalar(u.dot(v))),
            Some(Vector(u.cross(v))),
            Some(Matrix(u * v.transpose() + v * u.transpose())),
        ],
        (Vector(u), Matrix(m)) => {
            let k = math::skew(u);
            [None, Some(Vector(m * u)), Some(Matrix(k * m - m * k))]
        }
        (Matrix(m), Vector(v)) => {
            let k = math::skew(v);
            [None, Some(Vector(m * v)), Some(Matrix(m * k - k * m))]
        }
        (Matrix(m), Matrix(n)) => [
            Some(Scalar(m.component_mul(n).sum())),
            Some(Vector(vex(&(m * n - n * m)))),
            Some(Matrix(m * n + n * m)),
        ],
    }
}

fn components(b: &Block) -> Vec<f64> {
    match b {
        Block::Scalar(s) => alloc::vec![*s],
        Block::Vector(v) => vector_to_l1(v).to_vec(),
        Block::Matrix(m) => matrix_to_l2(m).to_vec(),
    }
}

/// Computes the normalized coupling tensor `C[m3][m1][m2]` from scratch.
pub fn generate(l1: usize, l2: usize, l3: usize) -> Option<Vec<f64>> {
    if !is_admissible(l1, l2, l3) {
        return None;
    }
    let (n1, n2, n3) = (2 * l1 + 1, 2 * l2 + 1, 2 * l3 + 1);
    let mut c = alloc::vec![0.0; n1 * n2 * n3];
    for m1 in 0..n1 {
        for m2 in 0..n2 {
            let out = cartesian(&basis_block(l1, m1), &basis_block(l2, m2));
            let v = components(out[l3].as_ref().expect("admissible"));
            for m3 in 0..n3 {
                c[(m3 * n1 + m1) * n2 + m2] = v[m3];
            }
        }
    }
    let norm = math::sqrt(c.iter().map(|v| v * v).sum::<f64>());
    let scale = math::sqrt(n3 as f64) / norm;
    for v in &mut c {
        *v *= scale;
        if v.abs() < 1e-15 {
            *v = 0.0;
        }
    }
    Some(c)
}
