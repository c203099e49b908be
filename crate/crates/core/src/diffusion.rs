//! Forward noising and reverse-time sampling on SE(3).
//!
//! Translation follows the Ornstein-Uhlenbeck process
//! `dx = -beta(t) x dt + sqrt(2 beta(t)) dB`; rotation follows Brownian motion
//! on SO(3) with the same diffusion coefficient. Both are driven by the
//! effective time `tau(t) = 2 int_0^t beta(u) du`, giving the closed-form
//! kernels
//!
//! ```text
//! p_t | p_0 ~ N(e^{-tau/2} p_0, (1 - e^{-tau}) I)
//! R_t | R_0 ~ R_0 * IG_SO(3)(tau)
//! ```
//!
//! Rotational increments are composed on the right, i.e. in the gripper frame,
//! and scores are reported in the current gripper frame.

use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::igso3::{self, IgSo3Bank};
use crate::math::{self, TAU};
use crate::rng;
use crate::se3::{sample_uniform_rotation, Pose, Rotation};

/// The drift/diffusion coefficient `beta(t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum BetaSchedule {
    /// `beta0 + (beta1 - beta0) t`.
    Affine { beta0: f64, beta1: f64 },
    /// Linear interpolation between `(t, beta)` knots sorted by `t`, starting at `t = 0`.
    PiecewiseLinear(Vec<(f64, f64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSchedule {
    pub beta: BetaSchedule,
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
    /// Inference temperature multiplying the reverse-step noise, in `(0, 1]`.
    pub noise_scale: f64,
    /// Take the last reverse step without injected noise.
    pub denoise_final: bool,
    pub grid: TimeGrid,
}

/// Placement of the reverse-chain time points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TimeGrid {
    /// Equal steps in `t`.
    Uniform,
    /// Equal steps in the translational noise level `sigma(t)`.
    UniformSigma,
    /// `t_k = t_min + (t_max - t_min) (1 - k/N)^2`.
    #[default]
    Quadratic,
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        Self {
            beta: BetaSchedule::Affine {
                beta0: 0.1,
                beta1: 8.0,
            },
            t_min: 1e-3,
            t_max: 1.0,
            steps: 200,
            noise_scale: 1.0,
            denoise_final: false,
            grid: TimeGrid::default(),
        }
    }
}

impl DiffusionSchedule {
    pub fn affine(beta0: f64, beta1: f64, steps: usize) -> Self {
        Self {
            beta: BetaSchedule::Affine { beta0, beta1 },
            steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max.is_finite()) {
            return Err(invalid("schedule: need 0 < t_min < t_max"));
        }
        if self.steps == 0 {
            return Err(invalid("schedule: step count must be positive"));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale <= 1.0) {
            return Err(invalid("schedule: noise scale must lie in (0, 1]"));
        }
        match &self.beta {
            BetaSchedule::Affine { beta0, beta1 } => {
                if !(*beta0 > 0.0 && *beta1 > 0.0) {
                    return Err(invalid("schedule: beta must be positive"));
                }
            }
            BetaSchedule::PiecewiseLinear(knots) => {
                if knots.len() < 2 || knots[0].0 != 0.0 {
                    return Err(invalid("schedule: knots must start at t = 0"));
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(invalid("schedule: knot times must increase"));
                }
                if knots.iter().any(|k| !(k.1 > 0.0)) {
                    return Err(invalid("schedule: beta must be positive"));
                }
                if knots.last().unwrap().0 < self.t_max {
                    return Err(invalid("schedule: knots must cover t_max"));
                }
            }
        }
        Ok(())
    }

    pub fn beta(&self, t: f64) -> f64 {
        match &self.beta {
            BetaSchedule::Affine { beta0, beta1 } => beta0 + (beta1 - beta0) * t,
            BetaSchedule::PiecewiseLinear(k) => {
                let i = k.partition_point(|p| p.0 <= t).clamp(1, k.len() - 1);
                let (t0, b0) = k[i - 1];
                let (t1, b1) = k[i];
                b0 + (b1 - b0) * ((t - t0) / (t1 - t0)).clamp(0.0, 1.0)
            }
        }
    }

    /// `int_0^t beta(u) du`.
    pub fn beta_integral(&self, t: f64) -> f64 {
        match &self.beta {
            BetaSchedule::Affine { beta0, beta1 } => beta0 * t + 0.5 * (beta1 - beta0) * t * t,
            BetaSchedule::PiecewiseLinear(k) => {
                let mut acc = 0.0;
                for w in k.windows(2) {
                    let (t0, b0) = w[0];
                    let (t1, b1) = w[1];
                    if t <= t0 {
                        break;
                    }
                    let hi = t.min(t1);
                    let bhi = b0 + (b1 - b0) * (hi - t0) / (t1 - t0);
                    acc += 0.5 * (b0 + bhi) * (hi - t0);
                }
                acc
            }
        }
    }

    /// Effective diffusion time of both the rotational and translational kernels.
    pub fn tau(&self, t: f64) -> f64 {
        2.0 * self.beta_integral(t)
    }

    /// Mean shrinkage `e^{-tau/2}` of the translational kernel.
    pub fn alpha(&self, t: f64) -> f64 {
        math::exp(-0.5 * self.tau(t))
    }

    /// Variance `1 - e^{-tau}` of the translational kernel.
    pub fn variance(&self, t: f64) -> f64 {
        -libm::expm1(-self.tau(t))
    }

    pub fn sigma(&self, t: f64) -> f64 {
        math::sqrt(self.variance(t))
    }

    /// Reverse-chain time grid from `t_max` down to `t_min` (`steps + 1` points).
    pub fn step_times(&self) -> Vec<f64> {
        let n = self.steps;
        let (lo, hi) = (self.t_min, self.t_max);
        (0..=n)
            .map(|k| {
                if k == n {
                    return lo;
                }
                let f = 1.0 - k as f64 / n as f64;
                match self.grid {
                    TimeGrid::Uniform => hi - k as f64 * (hi - lo) / n as f64,
                    TimeGrid::Quadratic => lo + (hi - lo) * f * f,
                    TimeGrid::UniformSigma => {
                        let (s0, s1) = (self.sigma(lo), self.sigma(hi));
                        self.time_at_sigma(s0 + (s1 - s0) * f)
                    }
                }
            })
            .collect()
    }

    /// Inverse of `sigma` on `[t_min, t_max]` by bisection.
    fn time_at_sigma(&self, sigma: f64) -> f64 {
        let (mut lo, mut hi) = (self.t_min, self.t_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.sigma(mid) < sigma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Effective times at every grid point, for building an [`IgSo3Bank`].
    pub fn grid_taus(&self) -> Vec<f64> {
        self.step_times().iter().map(|&t| self.tau(t)).collect()
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= self.t_min * (1.0 - 1e-12) && t <= self.t_max * (1.0 + 1e-12)) {
            return Err(invalid("diffusion time outside [t_min, t_max]"));
        }
        Ok(())
    }
}

/// Score in the current gripper frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScoreVector {
    pub translational: Vector3<f64>,
    pub rotational: Vector3<f64>,
}

impl ScoreVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.translational.iter().chain(self.rotational.iter()).all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            translational: self.translational * s,
            rotational: self.rotational * s,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        let (a, b) = (self.translational, self.rotational);
        [a.x, a.y, a.z, b.x, b.y, b.z]
    }
}

impl core::ops::Add for ScoreVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            translational: self.translational + o.translational,
            rotational: self.rotational + o.rotational,
        }
    }
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Samples `r_t ~ p(r_t | r_0)`.
pub fn forward_perturb<R: Rng + ?Sized>(
    r0: &Pose,
    t: f64,
    schedule: &DiffusionSchedule,
    tables: &IgSo3Bank,
    rng: &mut R,
) -> Result<Pose> {
    schedule.check_time(t)?;
    let tau = schedule.tau(t);
    let table = tables.table(tau)?;
    let eps = gaussian3(rng);
    let delta = igso3::igso3_sample(&table, rng);
    let translation =
        r0.translation * schedule.alpha(t) + r0.rotation.apply(&eps) * schedule.sigma(t);
    Ok(Pose::new(r0.rotation.compose(&delta), translation))
}

/// `log p(r_t | r_0)` with respect to Lebesgue x Haar measure.
pub fn log_kernel(r_t: &Pose, r0: &Pose, t: f64, schedule: &DiffusionSchedule) -> f64 {
    let tau = schedule.tau(t);
    let var = schedule.variance(t);
    let d = r_t.translation - r0.translation * schedule.alpha(t);
    let omega = r0.rotation.inverse().compose(&r_t.rotation).angle();
    -d.norm_squared() / (2.0 * var) - 1.5 * math::ln(TAU * var) + igso3::log_density(omega, tau)
}

/// Denoising target: the score of `p(r_t | r_0)` at `r_t`.
pub fn conditional_score(
    r_t: &Pose,
    r0: &Pose,
    t: f64,
    schedule: &DiffusionSchedule,
) -> ScoreVector {
    let tau = schedule.tau(t);
    let var = schedule.variance(t);
    let world = -(r_t.translation - r0.translation * schedule.alpha(t)) / var;
    let rel = r0.rotation.inverse().compose(&r_t.rotation);
    ScoreVector {
        translational: r_t.rotation.inverse().apply(&world),
        rotational: igso3::rotational_score_at(&rel, tau),
    }
}

/// Exact score of a weighted mixture of kernels centred at `modes`.
pub fn mixture_score(
    r_t: &Pose,
    t: f64,
    modes: &[(Pose, f64)],
    schedule: &DiffusionSchedule,
) -> Result<ScoreVector> {
    if modes.is_empty() {
        return Err(invalid("mixture_score: empty mode list"));
    }
    if modes.iter().any(|m| !(m.1 > 0.0) || !m.1.is_finite()) {
        return Err(invalid("mixture_score: weights must be positive and finite"));
    }
    let logs: Vec<f64> = modes
        .iter()
        .map(|(m, w)| math::ln(*w) + log_kernel(r_t, m, t, schedule))
        .collect();
    let lse = math::log_sum_exp(&logs);
    let mut acc = ScoreVector::zero();
    for ((m, _), l) in modes.iter().zip(logs.iter()) {
        let w = math::exp(l - lse);
        if w > 0.0 {
            acc = acc + conditional_score(r_t, m, t, schedule).scaled(w);
        }
    }
    Ok(acc)
}

/// One Euler-Maruyama step of the reverse SDE from `t` to `t - dt`.
///
/// Translation: `p += beta (p + 2 s) dt + sqrt(2 beta dt) xi`, with the
/// score rotated into the scene frame. Rotation: geodesic random walk
/// `R <- R exp(2 beta s_rot dt + sqrt(2 beta dt) eta)` in the gripper frame.
pub fn reverse_step<R: Rng + ?Sized>(
    r: &Pose,
    t: f64,
    score: &ScoreVector,
    dt: f64,
    schedule: &DiffusionSchedule,
    rng: &mut R,
) -> Pose {
    step(r, t, score, dt, schedule, schedule.noise_scale, rng)
}

fn step<R: Rng + ?Sized>(
    r: &Pose,
    t: f64,
    score: &ScoreVector,
    dt: f64,
    schedule: &DiffusionSchedule,
    noise_scale: f64,
    rng: &mut R,
) -> Pose {
    let beta = schedule.beta(t);
    let noise = noise_scale * math::sqrt(2.0 * beta * dt);
    let xi = gaussian3(rng);
    let eta = gaussian3(rng);
    let s_world = r.rotation.apply(&score.translational);
    let translation = r.translation + (r.translation + s_world * 2.0) * (beta * dt) + xi * noise;
    let step = score.rotational * (2.0 * beta * dt) + eta * noise;
    Pose::new(
        r.rotation.compose(&Rotation::from_scaled_axis(&step)),
        translation,
    )
}

/// Draw from the stationary distribution: Haar rotation x standard normal translation.
pub fn sample_prior<R: Rng + ?Sized>(rng: &mut R) -> Pose {
    let rotation = sample_uniform_rotation(rng);
    Pose::new(rotation, gaussian3(rng))
}

/// Runs one annealed reverse chain and returns the final pose.
pub fn sample_chain<F, R>(score_fn: &F, schedule: &DiffusionSchedule, rng: &mut R) -> Result<Pose>
where
    F: Fn(&Pose, f64) -> Result<ScoreVector> + ?Sized,
    R: Rng + ?Sized,
{
    schedule.validate()?;
    let times = schedule.step_times();
    let mut r = sample_prior(rng);
    for (k, w) in times.windows(2).enumerate() {
        let (t, next) = (w[0], w[1]);
        let s = score_fn(&r, t)?;
        let last = k + 2 == times.len();
        let lambda = if last && schedule.denoise_final { 0.0 } else { schedule.noise_scale };
        r = step(&r, t, &s, t - next, schedule, lambda, rng);
    }
    Ok(r)
}

/// `count` independent chains; chain `i` draws from stream `(seed, i)`.
pub fn sample_poses<F>(
    score_fn: &F,
    schedule: &DiffusionSchedule,
    count: usize,
    seed: u64,
) -> Result<Vec<Pose>>
where
    F: Fn(&Pose, f64) -> Result<ScoreVector> + ?Sized,
{
    (0..count)
        .map(|i| sample_chain(score_fn, schedule, &mut rng::stream(seed, &[i as u64])))
        .collect()
}
