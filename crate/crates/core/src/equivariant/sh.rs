//! Real spherical harmonics up to l = 2.
//!
//! Every block has unit norm on the unit sphere: `Y0 = 1`, `Y1 = (y, z, x)`,
//! and `Y2 = sqrt(3/2) <B_m, u u^T>` for the orthonormal traceless symmetric
//! basis `B_m` returned by [`quadratic_basis`].

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Result};
use crate::math;

/// Component count for `l = 0, 1, 2`.
pub const SH_DIM: usize = 9;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Cartesian index `(x, y, z) -> (0, 1, 2)` of each l = 1 component.
#[cfg(test)]
const L1_AXIS: [usize; 3] = [1, 2, 0];

/// Orthonormal traceless symmetric matrices in l = 2 component order
/// (`xy`, `yz`, `3z^2 - r^2`, `xz`, `x^2 - y^2`).
pub fn quadratic_basis() -> [Matrix3<f64>; 5] {
    let r2 = core::f64::consts::FRAC_1_SQRT_2;
    let r6 = 1.0 / math::sqrt(6.0);
    [
        Matrix3::new(0.0, r2, 0.0, r2, 0.0, 0.0, 0.0, 0.0, 0.0),
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, r2, 0.0, r2, 0.0),
        Matrix3::new(-r6, 0.0, 0.0, 0.0, -r6, 0.0, 0.0, 0.0, 2.0 * r6),
        Matrix3::new(0.0, 0.0, r2, 0.0, 0.0, 0.0, r2, 0.0, 0.0),
        Matrix3::new(r2, 0.0, 0.0, 0.0, -r2, 0.0, 0.0, 0.0, 0.0),
    ]
}

/// l = 1 block of a Cartesian vector.
#[inline]
pub fn vector_to_l1(v: &Vector3<f64>) -> [f64; 3] {
    [v.y, v.z, v.x]
}

#[inline]
pub fn l1_to_vector(a: &[f64]) -> Vector3<f64> {
    Vector3::new(a[2], a[0], a[1])
}

/// l = 2 block of a symmetric matrix (trace part discarded).
pub fn matrix_to_l2(m: &Matrix3<f64>) -> [f64; 5] {
    let b = quadratic_basis();
    core::array::from_fn(|i| b[i].component_mul(m).sum())
}

pub fn l2_to_matrix(h: &[f64]) -> Matrix3<f64> {
    let b = quadratic_basis();
    (0..5).fold(Matrix3::zeros(), |acc, i| acc + b[i] * h[i])
}

/// Harmonics of an arbitrary nonzero direction; no unit-norm check.
pub(crate) fn harmonics_unchecked(u: &Vector3<f64>) -> [f64; SH_DIM] {
    let (x, y, z) = (u.x, u.y, u.z);
    [
        1.0,
        y,
        z,
        x,
        SQRT3 * x * y,
        SQRT3 * y * z,
        0.5 * (2.0 * z * z - x * x - y * y),
        SQRT3 * x * z,
        0.5 * SQRT3 * (x * x - y * y),
    ]
}

/// `[Y0 | Y1 | Y2]` of a unit vector.
pub fn real_spherical_harmonics(u: &Vector3<f64>) -> Result<[f64; SH_DIM]> {
    let n = u.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
        return Err(invalid("spherical harmonics need a unit vector"));
    }
    Ok(harmonics_unchecked(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivariant::wigner::Wigner;
    use crate::se3::{sample_uniform_rotation, sample_unit_vector};
    use alloc::vec::Vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn anchors() {
        let y = real_spherical_harmonics(&Vector3::z()).unwrap();
        assert_eq!(&y[..4], &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(&y[4..], &[0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(real_spherical_harmonics(&Vector3::new(0.0, 0.0, 2.0)).is_err());
        assert!(real_spherical_harmonics(&Vector3::new(f64::NAN, 0.0, 1.0)).is_err());
    }

    #[test]
    fn blocks_have_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let y = real_spherical_harmonics(&sample_unit_vector(&mut rng)).unwrap();
            let n2: f64 = y[4..].iter().map(|v| v * v).sum();
            assert!((n2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonics_are_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let r = sample_uniform_rotation(&mut rng);
            let u = sample_unit_vector(&mut rng);
            let d = Wigner::new(&r);
            let mut y = real_spherical_harmonics(&u).unwrap();
            d.apply(1, &mut y[1..4]);
            d.apply(2, &mut y[4..9]);
            let yr = real_spherical_harmonics(&r.apply(&u)).unwrap();
            for i in 0..SH_DIM {
                assert!((y[i] - yr[i]).abs() < 1e-10);
            }
        }
    }

    /// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                loop {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-15 {
                        return (x, 2.0 / ((1.0 - x * x) * dp * dp));
                    }
                }
            })
            .collect()
    }

    #[test]
    fn gram_matrix_is_diagonal_by_quadrature() {
        // 70 x 83 = 5810-point product grid, exact for degree <= 4
        let nodes = gauss_legendre(70);
        let nphi = 83;
        let mut gram = [[0.0; SH_DIM]; SH_DIM];
        let mut total = 0.0;
        for &(c, w) in &nodes {
            let s = (1.0 - c * c).sqrt();
            for k in 0..nphi {
                let phi = core::f64::consts::TAU * k as f64 / nphi as f64;
                let wk = w * core::f64::consts::TAU / nphi as f64;
                let y = real_spherical_harmonics(&Vector3::new(s * phi.cos(), s * phi.sin(), c))
                    .unwrap();
                total += wk;
                for i in 0..SH_DIM {
                    for j in 0..SH_DIM {
                        gram[i][j] += wk * y[i] * y[j];
                    }
                }
            }
        }
        assert!((total - 4.0 * core::f64::consts::PI).abs() < 1e-12);
        let degree = [0, 1, 1, 1, 2, 2, 2, 2, 2];
        for i in 0..SH_DIM {
            for j in 0..SH_DIM {
                let scaled = gram[i][j] * (2 * degree[i] + 1) as f64 / total;
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((scaled - expect).abs() < 1e-6, "{i} {j} {scaled}");
            }
        }
    }

    #[test]
    fn cartesian_round_trips() {
        let v = Vector3::new(0.3, -1.2, 2.0);
        assert_eq!(l1_to_vector(&vector_to_l1(&v)), v);
        let h = [0.1, -0.4, 0.7, 0.2, -0.9];
        let back = matrix_to_l2(&l2_to_matrix(&h));
        for i in 0..5 {
            assert!((back[i] - h[i]).abs() < 1e-15);
        }
        let u = Vector3::new(0.48, 0.6, 0.64);
        let y = harmonics_unchecked(&u);
        let q = matrix_to_l2(&(u * u.transpose()));
        for i in 0..5 {
            assert!((y[4 + i] - (1.5f64).sqrt() * q[i]).abs() < 1e-15);
        }
        for (i, &ax) in L1_AXIS.iter().enumerate() {
            assert_eq!(y[1 + i], u[ax]);
        }
    }
}
