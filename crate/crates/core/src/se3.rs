//! Lie-group arithmetic on SO(3) and SE(3).
//!
//! Rotations are stored as unit quaternions `(w, x, y, z)` with a canonical
//! sign (`w >= 0`, and when `w == 0` the first nonzero vector component is
//! positive), so equal rotations have bit-identical representations. The
//! tangent space is parametrized by axis-angle vectors.

use core::fmt;

use nalgebra::{Matrix3, Matrix6, Quaternion, Vector3};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::math::{self, PI, TAU};

/// An element of SO(3).
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation {
    q: Quaternion<f64>,
}

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [w, x, y, z] = self.wxyz();
        write!(f, "Rotation(w: {w}, x: {x}, y: {y}, z: {z})")
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

fn canonical(mut q: Quaternion<f64>) -> Quaternion<f64> {
    let n = q.norm();
    if (n - 1.0).abs() > 1e-15 {
        q /= n;
    }
    let flip = if q.w != 0.0 {
        q.w < 0.0
    } else if q.i != 0.0 {
        q.i < 0.0
    } else if q.j != 0.0 {
        q.j < 0.0
    } else {
        q.k < 0.0
    };
    if flip {
        q = -q;
    }
    // Normalize -0.0 so that equal rotations compare bit-equal.
    for c in q.coords.iter_mut() {
        if *c == 0.0 {
            *c = 0.0;
        }
    }
    q
}

impl Rotation {
    pub fn identity() -> Self {
        Self {
            q: Quaternion::new(1.0, 0.0, 0.0, 0.0),
        }
    }

    /// Builds a rotation from quaternion components; the input is normalized
    /// and sign-canonicalized.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(invalid("quaternion must be finite and nonzero"));
        }
        Ok(Self { q: canonical(q) })
    }

    pub(crate) fn from_quaternion(q: Quaternion<f64>) -> Self {
        Self { q: canonical(q) }
    }

    pub fn wxyz(&self) -> [f64; 4] {
        [self.q.w, self.q.i, self.q.j, self.q.k]
    }

    pub fn quaternion(&self) -> Quaternion<f64> {
        self.q
    }

    /// Exponential map; `v` is an axis-angle vector. Infallible variant of
    /// [`exp_so3`] for inputs known to be finite.
    pub fn from_scaled_axis(v: &Vector3<f64>) -> Self {
        let theta2 = v.norm_squared();
        let theta = math::sqrt(theta2);
        let (w, s) = if theta < 1e-4 {
            (
                1.0 - theta2 / 8.0 + theta2 * theta2 / 384.0,
                0.5 - theta2 / 48.0 + theta2 * theta2 / 3840.0,
            )
        } else {
            (math::cos(0.5 * theta), math::sin(0.5 * theta) / theta)
        };
        Self::from_quaternion(Quaternion::new(w, s * v.x, s * v.y, s * v.z))
    }

    /// Rotation by `angle` about the (not necessarily unit) `axis`.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        Self::from_scaled_axis(&(axis.normalize() * angle))
    }

    /// Logarithm map: axis-angle vector with angle in `[0, pi]`.
    pub fn log(&self) -> Vector3<f64> {
        let v = Vector3::new(self.q.i, self.q.j, self.q.k);
        let s = v.norm();
        let w = self.q.w;
        if s < 1e-8 {
            // atan2(s, w) * 2 / s expanded around s = 0 (w ~ 1).
            let scale = 2.0 / w * (1.0 - s * s / (3.0 * w * w));
            return v * scale;
        }
        let angle = 2.0 * math::atan2(s, w);
        v * (angle / s)
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let s = Vector3::new(self.q.i, self.q.j, self.q.k).norm();
        2.0 * math::atan2(s, self.q.w)
    }

    pub fn inverse(&self) -> Self {
        Self::from_quaternion(self.q.conjugate())
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self::from_quaternion(self.q * other.q)
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.matrix() * p
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.q.w, self.q.i, self.q.j, self.q.k);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Rotation from an (approximately) orthonormal matrix with determinant +1.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let tr = m.trace();
        let q = if tr > 0.0 {
            let s = math::sqrt(tr + 1.0) * 2.0;
            Quaternion::new(
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = math::sqrt(1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]) * 2.0;
            Quaternion::new(
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = math::sqrt(1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]) * 2.0;
            Quaternion::new(
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = math::sqrt(1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]) * 2.0;
            Quaternion::new(
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        Self::from_quaternion(q)
    }

    /// Rotation whose columns are the given right-handed orthonormal frame.
    pub fn from_frame(x: &Vector3<f64>, y: &Vector3<f64>, z: &Vector3<f64>) -> Self {
        Self::from_matrix(&Matrix3::from_columns(&[*x, *y, *z]))
    }

    /// Geodesic distance `|log(self^-1 other)|`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.inverse().compose(other).angle()
    }
}

/// Checked exponential map on SO(3).
pub fn exp_so3(v: &Vector3<f64>) -> Result<Rotation> {
    if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
        return Err(invalid("exp_so3: non-finite tangent vector"));
    }
    Ok(Rotation::from_scaled_axis(v))
}

/// Logarithm map on SO(3).
pub fn log_so3(r: &Rotation) -> Vector3<f64> {
    r.log()
}

/// Haar-uniform random rotation (Shoemake's subgroup algorithm).
pub fn sample_uniform_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let a = math::sqrt(1.0 - u1);
    let b = math::sqrt(u1);
    let q = Quaternion::new(
        b * math::cos(TAU * u3),
        a * math::sin(TAU * u2),
        a * math::cos(TAU * u2),
        b * math::sin(TAU * u3),
    );
    Rotation::from_quaternion(q)
}

/// Uniform random unit vector.
pub fn sample_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi: f64 = TAU * rng.random::<f64>();
    let r = math::sqrt((1.0 - z * z).max(0.0));
    Vector3::new(r * math::cos(phi), r * math::sin(phi), z)
}

/// Rotation about `axis` by an angle drawn uniformly from `[0, 2 pi)`.
pub fn sample_roll<R: Rng + ?Sized>(axis: &Vector3<f64>, rng: &mut R) -> Rotation {
    let angle = TAU * rng.random::<f64>() - PI;
    Rotation::from_axis_angle(axis, angle)
}

/// A rigid transform: `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

/// SE(3) tangent vector.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Twist {
    pub rotational: Vector3<f64>,
    pub translational: Vector3<f64>,
}

/// `V(phi)` of the SE(3) exponential: `I + (1-cos)/th^2 K + (th - sin)/th^3 K^2`.
fn left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let th2 = phi.norm_squared();
    let th = math::sqrt(th2);
    let k = math::skew(phi);
    let (a, b) = if th < 1e-4 {
        (0.5 - th2 / 24.0, 1.0 / 6.0 - th2 / 120.0)
    } else {
        (
            (1.0 - math::cos(th)) / th2,
            (th - math::sin(th)) / (th2 * th),
        )
    };
    Matrix3::identity() + k * a + k * k * b
}

fn left_jacobian_inverse(phi: &Vector3<f64>) -> Matrix3<f64> {
    let th2 = phi.norm_squared();
    let th = math::sqrt(th2);
    let k = math::skew(phi);
    let c = if th < 1e-4 {
        1.0 / 12.0 + th2 / 720.0
    } else {
        (1.0 - th * math::sin(th) / (2.0 * (1.0 - math::cos(th)))) / th2
    };
    Matrix3::identity() - k * 0.5 + k * k * c
}

impl Pose {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Rotation::identity(), t)
    }

    pub fn from_rotation(r: Rotation) -> Self {
        Self::new(r, Vector3::zeros())
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.apply(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self {
            rotation: r,
            translation: -r.apply(&self.translation),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.apply(p) + self.translation
    }

    /// Rotates a direction (no translation).
    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.apply(v)
    }

    /// Adjoint matrix `[[R, [p]^ R], [0, R]]` acting on `(v, w)` twists.
    pub fn adjoint(&self) -> Matrix6<f64> {
        let r = self.rotation.matrix();
        let pr = math::skew(&self.translation) * r;
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        m.fixed_view_mut::<3, 3>(0, 3).copy_from(&pr);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
        m
    }

    /// SE(3) exponential map.
    pub fn exp(xi: &Twist) -> Self {
        Self {
            rotation: Rotation::from_scaled_axis(&xi.rotational),
            translation: left_jacobian(&xi.rotational) * xi.translational,
        }
    }

    /// SE(3) logarithm map.
    pub fn log(&self) -> Twist {
        let phi = self.rotation.log();
        Twist {
            rotational: phi,
            translational: left_jacobian_inverse(&phi) * self.translation,
        }
    }

    /// Geodesic rotation distance and Euclidean translation distance.
    pub fn distance(&self, other: &Self) -> (f64, f64) {
        (
            self.rotation.distance(&other.rotation),
            (self.translation - other.translation).norm(),
        )
    }

    /// The 7-tuple `(qw, qx, qy, qz, tx, ty, tz)`.
    pub fn to_array(&self) -> [f64; 7] {
        let [w, x, y, z] = self.rotation.wxyz();
        let t = self.translation;
        [w, x, y, z, t.x, t.y, t.z]
    }

    pub fn from_array(a: &[f64; 7]) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(invalid("pose components must be finite"));
        }
        Ok(Self {
            rotation: Rotation::from_wxyz(a[0], a[1], a[2], a[3])?,
            translation: Vector3::new(a[4], a[5], a[6]),
        })
    }

    /// Little-endian 64-bit binary form (56 bytes).
    pub fn to_le_bytes(&self) -> [u8; 56] {
        let mut out = [0u8; 56];
        for (i, v) in self.to_array().iter().enumerate() {
            out[i * 8..(i + 1) * 8].copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 56 {
            return Err(invalid("binary pose must be exactly 56 bytes"));
        }
        let mut a = [0.0; 7];
        for (i, v) in a.iter_mut().enumerate() {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[i * 8..(i + 1) * 8]);
            *v = f64::from_le_bytes(b);
        }
        Self::from_array(&a)
    }

    /// Parses the whitespace-separated text form `qw qx qy qz tx ty tz`.
    pub fn parse_text(s: &str) -> Result<Self> {
        let mut a = [0.0; 7];
        let mut it = s.split_whitespace();
        for v in a.iter_mut() {
            let tok = it
                .next()
                .ok_or_else(|| invalid("pose text needs 7 numbers"))?;
            *v = tok
                .parse()
                .map_err(|_| Error::InvalidArgument(alloc::format!("bad number `{tok}`")))?;
        }
        if it.next().is_some() {
            return Err(invalid("pose text has more than 7 numbers"));
        }
        Self::from_array(&a)
    }
}

impl fmt::Display for Pose {
    /// Shortest round-trip representation of the 7-tuple.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.to_array();
        write!(
            f,
            "{} {} {} {} {} {} {}",
            a[0], a[1], a[2], a[3], a[4], a[5], a[6]
        )
    }
}
