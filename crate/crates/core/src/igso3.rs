//! The isotropic Gaussian on SO(3).
//!
//! Density with respect to the normalized Haar measure:
//!
//! ```text
//! f(w, t) = sum_l (2l + 1) exp(-t l (l + 1) / 2) sin((l + 1/2) w) / sin(w / 2)
//! ```
//!
//! For `t >= SERIES_MIN_TIME` the character series converges in a few dozen
//! terms and is used directly. Below that, log-density and angle-score are
//! evaluated through the Poisson-resummed form of the same series,
//!
//! ```text
//! f(w, t) = e^{t/8} sqrt(2 pi) t^{-3/2} sum_k (-1)^k (w - 2 pi k) e^{-(w - 2 pi k)^2 / 2t} / sin(w / 2)
//! ```
//!
//! which is exact for every `t > 0` and free of the catastrophic cancellation
//! the character series suffers in the tails at small `t`.

use alloc::borrow::Cow;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::math::{self, PI, TAU};
use crate::se3::{sample_unit_vector, Rotation};

pub const DEFAULT_TRUNCATION: usize = 2000;
pub const DEFAULT_GRID: usize = 4096;
pub const MIN_GRID: usize = 512;

/// Below this time the resummed form is used for log-density and score.
pub const SERIES_MIN_TIME: f64 = 0.5;

const SMALL_ANGLE: f64 = 1e-4;
const TABLE_MAGIC: &[u8; 8] = b"IGSO3TBL";
const TABLE_VERSION: u32 = 1;

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid("igso3: time must be positive and finite"));
    }
    Ok(())
}

/// Number of series terms that do not underflow to zero.
fn effective_terms(t: f64, truncation: usize) -> usize {
    // exp(-t l(l+1)/2) == 0 in f64 once t l(l+1)/2 > 745.2
    let l = math::sqrt(2.0 * 746.0 / t) + 1.0;
    if l >= truncation as f64 {
        truncation + 1
    } else {
        (l as usize + 1).min(truncation + 1)
    }
}

/// Truncated character series `sum_{l <= L}`, evaluated directly.
pub fn igso3_density(omega: f64, t: f64, truncation: usize) -> Result<f64> {
    check_time(t)?;
    if truncation < 1 {
        return Err(invalid("igso3: truncation order must be >= 1"));
    }
    if !(0.0..=PI).contains(&omega) {
        return Err(invalid("igso3: angle must lie in [0, pi]"));
    }
    Ok(series_density(omega, t, truncation))
}

fn series_density(omega: f64, t: f64, truncation: usize) -> f64 {
    let n = effective_terms(t, truncation);
    if omega < 1e-6 {
        let w2 = omega * omega;
        return (0..n)
            .map(|l| {
                let lf = l as f64;
                let d = 2.0 * lf + 1.0;
                d * math::exp(-t * lf * (lf + 1.0) / 2.0) * d * (1.0 - lf * (lf + 1.0) * w2 / 6.0)
            })
            .sum();
    }
    let s: f64 = (0..n)
        .map(|l| {
            let lf = l as f64;
            (2.0 * lf + 1.0)
                * math::exp(-t * lf * (lf + 1.0) / 2.0)
                * math::sin((lf + 0.5) * omega)
        })
        .sum();
    s / math::sin(0.5 * omega)
}

/// `(S, S')` of the numerator series `S(w) = sum a_l sin((l + 1/2) w)`.
fn series_numerator(omega: f64, t: f64) -> (f64, f64) {
    let n = effective_terms(t, usize::MAX - 1);
    let mut s = 0.0;
    let mut ds = 0.0;
    for l in 0..n {
        let lf = l as f64;
        let a = (2.0 * lf + 1.0) * math::exp(-t * lf * (lf + 1.0) / 2.0);
        let k = lf + 0.5;
        s += a * math::sin(k * omega);
        ds += a * k * math::cos(k * omega);
    }
    (s, ds)
}

/// Resummed numerator `g(w) e^{w^2 / 2t}` and `g'(w) / g(w)`.
fn resummed(omega: f64, t: f64) -> (f64, f64) {
    let w2 = omega * omega;
    let mut g = 0.0;
    let mut dg = 0.0;
    for k in -2i32..=2 {
        let u = omega - TAU * k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let e = math::exp(-(u * u - w2) / (2.0 * t));
        g += sign * u * e;
        dg += sign * (1.0 - u * u / t) * e;
    }
    (g, dg / g)
}

/// `log f(w, t)`, numerically stable for all `t > 0`.
pub fn log_density(omega: f64, t: f64) -> f64 {
    let omega = omega.clamp(0.0, PI);
    if t >= SERIES_MIN_TIME {
        if omega < 1e-6 {
            return math::ln(series_density(omega, t, usize::MAX - 1));
        }
        let (s, _) = series_numerator(omega, t);
        return math::ln(s) - math::ln(math::sin(0.5 * omega));
    }
    let prefactor = t / 8.0 + 0.5 * math::ln(TAU) - 1.5 * math::ln(t);
    if omega < 1e-6 {
        // f(0) = 2 e^{t/8} sqrt(2 pi) t^{-3/2} g'(0)
        let (_, dlog) = resummed_at_zero(t);
        return prefactor + math::ln(2.0 * dlog);
    }
    let (g, _) = resummed(omega, t);
    prefactor - omega * omega / (2.0 * t) + math::ln(g) - math::ln(math::sin(0.5 * omega))
}

fn resummed_at_zero(t: f64) -> (f64, f64) {
    let mut dg = 0.0;
    for k in -2i32..=2 {
        let u = TAU * k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        dg += sign * (1.0 - u * u / t) * math::exp(-u * u / (2.0 * t));
    }
    (0.0, dg)
}

/// `d/dw log f(w, t)`; odd in `w`, zero at the identity.
pub fn angle_score(omega: f64, t: f64) -> f64 {
    let omega = omega.clamp(0.0, PI);
    if omega < SMALL_ANGLE {
        return angle_score_regular(SMALL_ANGLE, t) * omega / SMALL_ANGLE;
    }
    angle_score_regular(omega, t)
}

fn angle_score_regular(omega: f64, t: f64) -> f64 {
    let half_cot = 0.5 * math::cos(0.5 * omega) / math::sin(0.5 * omega);
    if t >= SERIES_MIN_TIME {
        let (s, ds) = series_numerator(omega, t);
        ds / s - half_cot
    } else {
        let (_, dlog) = resummed(omega, t);
        dlog - half_cot
    }
}

/// Tabulated density, marginal CDF and angle-score at a fixed time.
#[derive(Clone, Debug, PartialEq)]
pub struct IgSo3Table {
    pub t: f64,
    pub truncation: usize,
    pub omega: Vec<f64>,
    pub density: Vec<f64>,
    /// Cumulative marginal `int_0^w f(s) (1 - cos s) / pi ds`.
    pub cdf: Vec<f64>,
    pub score: Vec<f64>,
}

/// Haar marginal density of the rotation angle.
pub fn haar_angle_density(omega: f64) -> f64 {
    (1.0 - math::cos(omega)) / PI
}

fn density_for_table(omega: f64, t: f64, truncation: usize) -> f64 {
    if t >= SERIES_MIN_TIME {
        series_density(omega, t, truncation)
    } else {
        math::exp(log_density(omega, t))
    }
}

// 5-point Gauss-Legendre on [-1, 1].
const GL_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

pub fn build_table(t: f64, truncation: usize, grid: usize) -> Result<IgSo3Table> {
    check_time(t)?;
    if truncation < 1 {
        return Err(invalid("igso3: truncation order must be >= 1"));
    }
    if grid < MIN_GRID {
        return Err(invalid("igso3: table needs at least 512 grid points"));
    }
    let h = PI / (grid - 1) as f64;
    let omega: Vec<f64> = (0..grid).map(|i| i as f64 * h).collect();
    let density: Vec<f64> = omega
        .iter()
        .map(|&w| density_for_table(w, t, truncation))
        .collect();
    let score: Vec<f64> = omega.iter().map(|&w| angle_score(w, t)).collect();
    let mut cdf = Vec::with_capacity(grid);
    cdf.push(0.0);
    let mut acc = 0.0;
    for i in 0..grid - 1 {
        let mid = omega[i] + 0.5 * h;
        let part: f64 = GL_X
            .iter()
            .zip(GL_W.iter())
            .map(|(x, w)| {
                let s = mid + 0.5 * h * x;
                w * density_for_table(s, t, truncation) * haar_angle_density(s)
            })
            .sum();
        acc += 0.5 * h * part;
        cdf.push(acc);
    }
    Ok(IgSo3Table {
        t,
        truncation,
        omega,
        density,
        cdf,
        score,
    })
}

impl IgSo3Table {
    pub fn with_defaults(t: f64) -> Result<Self> {
        build_table(t, DEFAULT_TRUNCATION, DEFAULT_GRID)
    }

    fn step(&self) -> f64 {
        PI / (self.omega.len() - 1) as f64
    }

    /// Linearly interpolated marginal CDF at angle `omega`.
    pub fn cdf_at(&self, omega: f64) -> f64 {
        let w = omega.clamp(0.0, PI);
        let x = w / self.step();
        let i = (x as usize).min(self.omega.len() - 2);
        let f = x - i as f64;
        self.cdf[i] * (1.0 - f) + self.cdf[i + 1] * f
    }

    /// Inverse-CDF sample of the rotation angle.
    pub fn sample_angle<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cdf.last().unwrap();
        let u = rng.random::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1) - 1;
        let span = self.cdf[i + 1] - self.cdf[i];
        let f = if span > 0.0 {
            ((u - self.cdf[i]) / span).clamp(0.0, 1.0)
        } else {
            0.5
        };
        self.omega[i] + f * self.step()
    }

    /// Serializes as `magic, version, t, L, M, omega, density, cdf, score`
    /// (little-endian).
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = self.omega.len();
        let mut out = Vec::with_capacity(8 + 4 + 24 + 32 * m);
        out.extend_from_slice(TABLE_MAGIC);
        out.extend_from_slice(&TABLE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&(self.truncation as u64).to_le_bytes());
        out.extend_from_slice(&(m as u64).to_le_bytes());
        for col in [&self.omega, &self.density, &self.cdf, &self.score] {
            for v in col.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(alloc::format!("igso3 table: {m}"));
        if bytes.len() < 36 || &bytes[..8] != TABLE_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != TABLE_VERSION {
            return Err(bad("unsupported version"));
        }
        let rd = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let t = f64::from_bits(rd(12));
        let truncation = rd(20) as usize;
        let m = rd(28) as usize;
        if m < 2 || bytes.len() != 36 + 32 * m {
            return Err(bad("length mismatch"));
        }
        let col = |c: usize| -> Vec<f64> {
            (0..m)
                .map(|i| f64::from_bits(rd(36 + (c * m + i) * 8)))
                .collect()
        };
        Ok(Self {
            t,
            truncation,
            omega: col(0),
            density: col(1),
            cdf: col(2),
            score: col(3),
        })
    }
}

/// Draws a rotation from the isotropic Gaussian tabulated in `table`.
pub fn igso3_sample<R: Rng + ?Sized>(table: &IgSo3Table, rng: &mut R) -> Rotation {
    let omega = table.sample_angle(rng);
    let axis = sample_unit_vector(rng);
    Rotation::from_scaled_axis(&(axis * omega))
}

/// Score of the isotropic Gaussian at `r_rel`, in axis-angle tangent
/// coordinates at `r_rel` (right perturbations).
pub fn rotational_score(r_rel: &Rotation, table: &IgSo3Table) -> Vector3<f64> {
    rotational_score_at(r_rel, table.t)
}

pub(crate) fn rotational_score_at(r_rel: &Rotation, t: f64) -> Vector3<f64> {
    let v = r_rel.log();
    let omega = v.norm();
    if omega < 1e-12 {
        return Vector3::zeros();
    }
    v * (angle_score(omega, t) / omega)
}

/// Tables at a fixed set of times; other times are built on demand.
#[derive(Clone, Debug, Default)]
pub struct IgSo3Bank {
    tables: Vec<IgSo3Table>,
    truncation: usize,
    grid: usize,
}

impl IgSo3Bank {
    pub fn new(times: &[f64]) -> Result<Self> {
        Self::with_resolution(times, DEFAULT_TRUNCATION, DEFAULT_GRID)
    }

    pub fn with_resolution(times: &[f64], truncation: usize, grid: usize) -> Result<Self> {
        let mut ts: Vec<f64> = times.to_vec();
        ts.sort_by(|a, b| a.total_cmp(b));
        ts.dedup();
        let tables = ts
            .iter()
            .map(|&t| build_table(t, truncation, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tables,
            truncation,
            grid,
        })
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Table for time `t`; borrowed when precomputed, otherwise built.
    pub fn table(&self, t: f64) -> Result<Cow<'_, IgSo3Table>> {
        let i = self.tables.partition_point(|tb| tb.t < t);
        for j in [i.wrapping_sub(1), i] {
            if let Some(tb) = self.tables.get(j) {
                if math::abs(tb.t - t) <= 1e-12 * t.max(1.0) {
                    return Ok(Cow::Borrowed(tb));
                }
            }
        }
        let (l, m) = if self.grid == 0 {
            (DEFAULT_TRUNCATION, DEFAULT_GRID)
        } else {
            (self.truncation, self.grid)
        };
        Ok(Cow::Owned(build_table(t, l, m)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::sample_uniform_rotation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Composite Simpson quadrature; independent of the table's GL rule.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn ks_vs(table: &IgSo3Table, mut angles: Vec<f64>) -> f64 {
        angles.sort_by(|a, b| a.total_cmp(b));
        let n = angles.len() as f64;
        let total = *table.cdf.last().unwrap();
        angles
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let c = table.cdf_at(w) / total;
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(igso3_density(0.3, 0.0, 10).is_err());
        assert!(igso3_density(0.3, -1.0, 10).is_err());
        assert!(igso3_density(0.3, 1.0, 0).is_err());
        assert!(build_table(1.0, 100, 100).is_err());
    }

    #[test]
    fn large_time_deviation_is_the_l1_term() {
        // f - 1 = 3 e^{-16} (1 + 2 cos w) + O(e^{-48})
        for i in 0..=100 {
            let w = PI * i as f64 / 100.0;
            let f = igso3_density(w, 16.0, 2000).unwrap();
            let expect = 1.0 + 3.0 * math::exp(-16.0) * (1.0 + 2.0 * math::cos(w));
            assert!((f - expect).abs() < 1e-12, "w = {w}");
        }
    }

    #[test]
    fn identity_limit_matches_direct_series() {
        let direct: f64 = (0..2000)
            .map(|l| {
                let l = l as f64;
                (2.0 * l + 1.0).powi(2) * (-l * (l + 1.0) / 2.0).exp()
            })
            .sum();
        let f = igso3_density(0.0, 1.0, 2000).unwrap();
        assert!((f - direct).abs() < 1e-12 * direct);
        let near = igso3_density(1e-9, 1.0, 2000).unwrap();
        assert!((near - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn haar_normalization() {
        for &t in &[0.01, 0.02, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 8.0, 16.0] {
            let integral = simpson(
                |w| {
                    let f = if t < 0.05 {
                        log_density(w, t).exp()
                    } else {
                        igso3_density(w, t, 2000).unwrap()
                    };
                    f * haar_angle_density(w)
                },
                0.0,
                PI,
                40_000,
            );
            assert!((integral - 1.0).abs() < 1e-6, "t = {t}: {integral}");
        }
    }

    #[test]
    fn resummed_form_matches_series() {
        for &t in &[0.05, 0.2, 0.5, 1.0, 3.0] {
            for i in 1..200 {
                let w = PI * i as f64 / 200.0;
                let series = igso3_density(w, t, 4000).unwrap();
                if series < 1e-6 {
                    continue;
                }
                let (g, _) = resummed(w, t);
                let lf = t / 8.0 + 0.5 * TAU.ln() - 1.5 * t.ln() - w * w / (2.0 * t) + g.ln()
                    - (0.5 * w).sin().ln();
                assert!(
                    (lf.exp() - series).abs() < 1e-9 * series.max(1.0),
                    "t = {t}, w = {w}"
                );
                if series > 1e-3 {
                    assert!((log_density(w, t) - series.ln()).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn truncation_converged() {
        for &t in &[0.01, 0.1, 1.0, 4.0] {
            for i in 0..50 {
                let w = PI * i as f64 / 49.0;
                let a = igso3_density(w, t, 2000).unwrap();
                let b = igso3_density(w, t, 4000).unwrap();
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn table_cdf_properties() {
        for &t in &[0.001, 0.05, 0.5, 2.0, 8.0] {
            let tb = build_table(t, 2000, 4096).unwrap();
            assert!((tb.cdf.last().unwrap() - 1.0).abs() < 1e-6, "t = {t}");
            assert!(tb.cdf.windows(2).all(|w| w[1] >= w[0]));
            assert!(tb.density.iter().all(|&d| d >= -1e-8));
        }
    }

    #[test]
    fn table_score_matches_finite_difference() {
        for &t in &[0.05, 0.5, 2.0] {
            let tb = build_table(t, 2000, 4096).unwrap();
            let h = 1e-5;
            let mut max_err: f64 = 0.0;
            for i in (1..tb.omega.len() - 1).step_by(7) {
                let w = tb.omega[i];
                let fd = (log_density(w + h, t) - log_density(w - h, t)) / (2.0 * h);
                max_err = max_err.max((fd - tb.score[i]).abs());
            }
            assert!(max_err < 1e-4, "t = {t}: {max_err}");
        }
    }

    #[test]
    fn large_time_samples_are_haar() {
        let tb = build_table(16.0, 2000, 4096).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut angles: Vec<f64> = (0..100_000)
            .map(|_| igso3_sample(&tb, &mut rng).angle())
            .collect();
        angles.sort_by(|a, b| a.total_cmp(b));
        let n = angles.len() as f64;
        let ks = angles
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let c = (w - w.sin()) / PI;
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "ks = {ks}");
    }

    #[test]
    fn sampler_matches_table_cdf() {
        let tb = build_table(0.5, 2000, 4096).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let angles = (0..100_000).map(|_| igso3_sample(&tb, &mut rng).angle()).collect();
        assert!(ks_vs(&tb, angles) < 0.01);
    }

    #[test]
    fn small_time_concentrates() {
        let tb = build_table(0.01, 2000, 4096).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 20_000;
        let inside = (0..n)
            .filter(|_| igso3_sample(&tb, &mut rng).angle() < 0.5)
            .count();
        assert!(inside as f64 >= 0.99 * n as f64);
        assert!(tb.cdf_at(0.5) / tb.cdf.last().unwrap() > 0.99);
    }

    #[test]
    fn sampling_is_deterministic() {
        let tb = build_table(1.0, 2000, 1024).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            assert_eq!(igso3_sample(&tb, &mut a), igso3_sample(&tb, &mut b));
        }
    }

    #[test]
    fn semigroup_by_composition() {
        let (t1, t2) = (0.3, 0.5);
        let a = build_table(t1, 2000, 4096).unwrap();
        let b = build_table(t2, 2000, 4096).unwrap();
        let c = build_table(t1 + t2, 2000, 4096).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 100_000;
        let bins = 20;
        // equal-probability bins under the t1 + t2 marginal
        let total = *c.cdf.last().unwrap();
        let edges: Vec<f64> = (1..bins)
            .map(|k| {
                let target = total * k as f64 / bins as f64;
                let i = c.cdf.partition_point(|&x| x < target);
                c.omega[i.min(c.omega.len() - 1)]
            })
            .collect();
        let mut hist = alloc::vec![0usize; bins];
        for _ in 0..n {
            let r = igso3_sample(&a, &mut rng).compose(&igso3_sample(&b, &mut rng));
            let w = r.angle();
            hist[edges.partition_point(|&e| e <= w)] += 1;
        }
        let mut chi2 = 0.0;
        for (k, &h) in hist.iter().enumerate() {
            let lo = if k == 0 { 0.0 } else { c.cdf_at(edges[k - 1]) };
            let hi = if k == bins - 1 { total } else { c.cdf_at(edges[k]) };
            let e = (hi - lo) / total * n as f64;
            chi2 += (h as f64 - e).powi(2) / e;
        }
        // 19 dof, p = 0.01
        assert!(chi2 < 36.19, "chi2 = {chi2}");
    }

    #[test]
    fn rotational_score_properties() {
        let tb = build_table(0.3, 2000, 1024).unwrap();
        assert_eq!(rotational_score(&Rotation::identity(), &tb), Vector3::zeros());
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let h = 1e-6;
        for _ in 0..200 {
            let r = sample_uniform_rotation(&mut rng);
            if r.angle() > PI - 1e-3 {
                continue;
            }
            let s = rotational_score(&r, &tb);
            let v = r.log();
            assert!(s.cross(&v).norm() < 1e-9 * (1.0 + s.norm() * v.norm()));
            // finite difference along right perturbations
            for i in 0..3 {
                let mut e = Vector3::zeros();
                e[i] = h;
                let lp = log_density(r.compose(&Rotation::from_scaled_axis(&e)).angle(), 0.3);
                let lm = log_density(r.compose(&Rotation::from_scaled_axis(&-e)).angle(), 0.3);
                assert!(((lp - lm) / (2.0 * h) - s[i]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn table_bytes_roundtrip_and_bank_lookup() {
        let tb = build_table(0.7, 100, 512).unwrap();
        assert_eq!(IgSo3Table::from_bytes(&tb.to_bytes()).unwrap(), tb);
        let mut bytes = tb.to_bytes();
        bytes[8] = 9;
        assert!(IgSo3Table::from_bytes(&bytes).is_err());

        let bank = IgSo3Bank::with_resolution(&[0.1, 0.7], 100, 512).unwrap();
        assert!(matches!(bank.table(0.7).unwrap(), Cow::Borrowed(_)));
        assert!(matches!(bank.table(0.3).unwrap(), Cow::Owned(_)));
    }
}
