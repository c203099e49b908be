//! Denoising score matching and the training loop.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::Rng;

use super::encoder::{encode_gripper, encode_scene, GripperQuery, SceneEncoding};
use super::score::{backward, trace};
use super::ModelParams;
use crate::diffusion::{conditional_score, forward_perturb, DiffusionSchedule, ScoreVector};
use crate::error::{invalid, Error, Result};
use crate::igso3::IgSo3Bank;
use crate::pointcloud::Normalization;
use crate::rng::{stream, StreamRng};
use crate::se3::Pose;

/// Runs independent tasks and returns their results in index order.
pub trait ParallelMap: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Single-threaded [`ParallelMap`].
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl ParallelMap for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// A normalized scene cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneInput {
    pub points: Vec<Vector3<f64>>,
    pub normalization: Normalization,
}

/// Open and closed gripper clouds in the gripper frame, meters.
#[derive(Clone, Debug, PartialEq)]
pub struct GripperInput {
    pub open: Vec<Vector3<f64>>,
    pub closed: Vec<Vector3<f64>>,
}

/// One successful grasp; `pose` is in the scene's normalized frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraspSample {
    pub scene: usize,
    pub gripper: usize,
    pub object: usize,
    pub pose: Pose,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub scenes: Vec<SceneInput>,
    pub grippers: Vec<GripperInput>,
    pub grasps: Vec<GraspSample>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.grasps.is_empty() {
            return Err(invalid("dataset has no grasps"));
        }
        for g in &self.grasps {
            if g.scene >= self.scenes.len() || g.gripper >= self.grippers.len() {
                return Err(invalid("grasp refers to a missing scene or gripper"));
            }
        }
        Ok(())
    }
}

/// Index of a grasp inside a [`Dataset`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchItem(pub usize);

/// Draws an object uniformly, then one of its grasps uniformly.
#[derive(Clone, Debug, PartialEq)]
pub struct BalancedSampler {
    groups: Vec<Vec<usize>>,
}

impl BalancedSampler {
    pub fn new(dataset: &Dataset) -> Result<Self> {
        let mut by_object: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, g) in dataset.grasps.iter().enumerate() {
            by_object.entry(g.object).or_default().push(i);
        }
        if by_object.is_empty() {
            return Err(invalid("dataset has no grasps"));
        }
        Ok(Self {
            groups: by_object.into_values().collect(),
        })
    }

    pub fn objects(&self) -> usize {
        self.groups.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Vec<BatchItem> {
        (0..size)
            .map(|_| {
                let g = &self.groups[rng.random_range(0..self.groups.len())];
                BatchItem(g[rng.random_range(0..g.len())])
            })
            .collect()
    }
}

/// A perturbed sample and its regression target.
#[derive(Clone, Copy, Debug)]
struct Draw {
    item: usize,
    t: f64,
    pose: Pose,
    /// `sigma(t)` times the conditional score.
    target: ScoreVector,
}

fn draw(
    dataset: &Dataset,
    batch: &[BatchItem],
    schedule: &DiffusionSchedule,
    tables: &IgSo3Bank,
    rng: &mut StreamRng,
) -> Result<Vec<Draw>> {
    batch
        .iter()
        .map(|&BatchItem(item)| {
            let g = dataset.grasps.get(item).ok_or_else(|| invalid("batch index out of range"))?;
            let t = rng.random_range(schedule.t_min..=schedule.t_max);
            let pose = forward_perturb(&g.pose, t, schedule, tables, rng)?;
            let target = conditional_score(&pose, &g.pose, t, schedule).scaled(schedule.sigma(t));
            Ok(Draw { item, t, pose, target })
        })
        .collect()
}

struct Encoded {
    scenes: BTreeMap<usize, SceneEncoding>,
    grippers: BTreeMap<usize, GripperQuery>,
}

fn encode<P: ParallelMap>(params: &ModelParams, dataset: &Dataset, draws: &[Draw], pool: &P) -> Result<Encoded> {
    let mut si: Vec<usize> = draws.iter().map(|d| dataset.grasps[d.item].scene).collect();
    let mut gi: Vec<usize> = draws.iter().map(|d| dataset.grasps[d.item].gripper).collect();
    si.sort_unstable();
    si.dedup();
    gi.sort_unstable();
    gi.dedup();
    let scenes = pool.map(si.len(), |i| {
        let s = &dataset.scenes[si[i]];
        encode_scene(&s.points, s.normalization, params)
    });
    let grippers = pool.map(gi.len(), |i| {
        let g = &dataset.grippers[gi[i]];
        encode_gripper(&g.open, &g.closed, params)
    });
    Ok(Encoded {
        scenes: si.into_iter().zip(scenes).map(|(i, s)| s.map(|s| (i, s))).collect::<Result<_>>()?,
        grippers: gi.into_iter().zip(grippers).map(|(i, g)| g.map(|g| (i, g))).collect::<Result<_>>()?,
    })
}

fn residual(u: &ScoreVector, target: &ScoreVector) -> ScoreVector {
    ScoreVector {
        translational: u.translational - target.translational,
        rotational: u.rotational - target.rotational,
    }
}

fn squared(v: &ScoreVector) -> f64 {
    v.translational.norm_squared() + v.rotational.norm_squared()
}

/// Variance-weighted DSM loss, averaged over the batch.
///
/// Per item, with `t ~ U[t_min, t_max]` and `r_t ~ p(r_t | r_0)`:
/// `sigma(t)^2 |s(r_t, t) - grad log p(r_t | r_0)|^2`.
pub fn dsm_loss<P: ParallelMap>(
    params: &ModelParams,
    dataset: &Dataset,
    batch: &[BatchItem],
    schedule: &DiffusionSchedule,
    tables: &IgSo3Bank,
    rng: &mut StreamRng,
    pool: &P,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let draws = draw(dataset, batch, schedule, tables, rng)?;
    let enc = encode(params, dataset, &draws, pool)?;
    let losses = pool.map(draws.len(), |i| -> Result<f64> {
        let d = &draws[i];
        let g = &dataset.grasps[d.item];
        let tr = trace(&d.pose, d.t, &enc.scenes[&g.scene], &enc.grippers[&g.gripper], params, schedule)?;
        Ok(squared(&residual(&tr.unscaled, &d.target)))
    });
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / batch.len() as f64)
}

/// [`dsm_loss`] and its gradient with respect to every parameter. Consumes
/// `rng` exactly as [`dsm_loss`] does.
pub fn dsm_loss_and_gradient<P: ParallelMap>(
    params: &ModelParams,
    dataset: &Dataset,
    batch: &[BatchItem],
    schedule: &DiffusionSchedule,
    tables: &IgSo3Bank,
    rng: &mut StreamRng,
    pool: &P,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let draws = draw(dataset, batch, schedule, tables, rng)?;
    let enc = encode(params, dataset, &draws, pool)?;
    let n = params.num_params();
    let inv = 1.0 / batch.len() as f64;
    let parts = pool.map(draws.len(), |i| -> Result<(f64, Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
        let d = &draws[i];
        let g = &dataset.grasps[d.item];
        let scene = &enc.scenes[&g.scene];
        let tr = trace(&d.pose, d.t, scene, &enc.grippers[&g.gripper], params, schedule)?;
        let r = residual(&tr.unscaled, &d.target);
        let mut dw = vec![0.0; n];
        let grads = backward(&tr, &r.scaled(2.0 * inv), scene, params, &mut dw);
        Ok((squared(&r), dw, grads.levels, grads.reduced))
    });
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    let mut d_scenes: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    let mut d_grippers: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (d, part) in draws.iter().zip(parts) {
        let (l, dw, dl, dr) = part?;
        loss += l;
        for (a, b) in grad.iter_mut().zip(&dw) {
            *a += b;
        }
        let g = &dataset.grasps[d.item];
        match d_scenes.get_mut(&g.scene) {
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(&dl) {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                }
            }
            None => {
                d_scenes.insert(g.scene, dl);
            }
        }
        let acc = d_grippers.entry(g.gripper).or_insert_with(|| vec![0.0; dr.len()]);
        for (x, y) in acc.iter_mut().zip(&dr) {
            *x += y;
        }
    }
    for (i, dl) in d_scenes {
        enc.scenes[&i].backward(params, dl, &mut grad);
    }
    for (i, dr) in d_grippers {
        enc.grippers[&i].backward(params, &dr, &mut grad);
    }
    Ok((loss * inv, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(lr: f64, n: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// First and second moments and the number of updates taken.
    pub fn state(&self) -> (&[f64], &[f64], i32) {
        (&self.m, &self.v, self.step)
    }

    pub fn from_state(lr: f64, m: Vec<f64>, v: Vec<f64>, step: i32) -> Result<Self> {
        if m.len() != v.len() || step < 0 {
            return Err(invalid("inconsistent optimizer state"));
        }
        Ok(Self { m, v, step, ..Self::new(lr, 0) })
    }

    pub fn update(&mut self, x: &mut [f64], g: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - crate::math::powi(self.beta1, self.step);
        let c2 = 1.0 - crate::math::powi(self.beta2, self.step);
        for i in 0..x.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            x[i] -= self.lr * (self.m[i] / c1) / (crate::math::sqrt(self.v[i] / c2) + self.eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Batches in the fixed-seed evaluation loss.
    pub eval_batches: usize,
    /// Cosine decay from `lr` to `lr_final` over this many steps; zero keeps
    /// the rate constant. Independent of `steps` so that a run stopped early
    /// and resumed follows the same schedule.
    pub decay_steps: usize,
    pub lr_final: f64,
}

impl TrainConfig {
    pub fn lr_at(&self, step: usize) -> f64 {
        if self.decay_steps == 0 {
            return self.lr;
        }
        let f = step.min(self.decay_steps) as f64 / self.decay_steps as f64;
        self.lr_final + (self.lr - self.lr_final) * 0.5 * (1.0 + crate::math::cos(crate::math::PI * f))
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            batch_size: 16,
            lr: 3e-3,
            seed: 0,
            eval_batches: 8,
            decay_steps: 0,
            lr_final: 3e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Minibatch loss before each update.
    pub loss_trace: Vec<f64>,
    /// Fixed-seed evaluation loss of the initial and final weights.
    pub initial_eval: f64,
    pub final_eval: f64,
}

/// Mean DSM loss over `batches` balanced batches drawn from a fixed stream.
pub fn eval_loss<P: ParallelMap>(
    params: &ModelParams,
    dataset: &Dataset,
    schedule: &DiffusionSchedule,
    tables: &IgSo3Bank,
    config: &TrainConfig,
    pool: &P,
) -> Result<f64> {
    let sampler = BalancedSampler::new(dataset)?;
    let mut rng = stream(config.seed, &[u64::MAX]);
    let mut total = 0.0;
    for _ in 0..config.eval_batches {
        let batch = sampler.sample(config.batch_size, &mut rng);
        total += dsm_loss(params, dataset, &batch, schedule, tables, &mut rng, pool)?;
    }
    Ok(total / config.eval_batches.max(1) as f64)
}

/// Adam on the DSM loss with object-balanced batches.
pub fn train<P: ParallelMap>(
    mut params: ModelParams,
    dataset: &Dataset,
    schedule: &DiffusionSchedule,
    tables: &IgSo3Bank,
    config: &TrainConfig,
    pool: &P,
) -> Result<(ModelParams, TrainReport)> {
    dataset.validate()?;
    schedule.validate()?;
    if config.batch_size == 0 || !(config.lr > 0.0) || !(config.lr_final > 0.0) {
        return Err(invalid("batch size and learning rate must be positive"));
    }
    let sampler = BalancedSampler::new(dataset)?;
    let initial_eval = eval_loss(&params, dataset, schedule, tables, config, pool)?;
    let mut adam = Adam::new(config.lr, params.num_params());
    let mut loss_trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let mut rng = stream(config.seed, &[step as u64]);
        let batch = sampler.sample(config.batch_size, &mut rng);
        let (loss, grad) = dsm_loss_and_gradient(&params, dataset, &batch, schedule, tables, &mut rng, pool)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step, loss });
        }
        loss_trace.push(loss);
        adam.lr = config.lr_at(step);
        adam.update(&mut params.values, &grad);
    }
    let final_eval = eval_loss(&params, dataset, schedule, tables, config, pool)?;
    Ok((
        params,
        TrainReport {
            loss_trace,
            initial_eval,
            final_eval,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::igso3::{DEFAULT_TRUNCATION, MIN_GRID};
    use crate::model::encoder::tests::{blob, jaw_clouds};
    use crate::model::ModelConfig;
    use crate::se3::sample_uniform_rotation;
    use rand::SeedableRng;

    pub(crate) fn toy_dataset(grasps: usize) -> Dataset {
        let (open, closed) = jaw_clouds(0.04, 2);
        let mut rng = StreamRng::seed_from_u64(9);
        let grasps = (0..grasps)
            .map(|i| GraspSample {
                scene: 0,
                gripper: 0,
                object: i % 2,
                pose: Pose::new(
                    sample_uniform_rotation(&mut rng),
                    Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.3..0.3), 0.2),
                ),
            })
            .collect();
        Dataset {
            scenes: vec![SceneInput {
                points: blob(96, 1),
                normalization: Normalization { centroid: Vector3::zeros(), scale: 0.25 },
            }],
            grippers: vec![GripperInput { open, closed }],
            grasps,
        }
    }

    fn tables() -> IgSo3Bank {
        IgSo3Bank::with_resolution(&[], DEFAULT_TRUNCATION, MIN_GRID).unwrap()
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let c = TrainConfig { lr: 1e-2, lr_final: 1e-3, decay_steps: 100, ..TrainConfig::default() };
        assert!((c.lr_at(0) - 1e-2).abs() < 1e-15);
        assert!((c.lr_at(50) - 5.5e-3).abs() < 1e-15);
        assert!((c.lr_at(100) - 1e-3).abs() < 1e-15);
        assert_eq!(c.lr_at(100), c.lr_at(1000));
        assert_eq!(TrainConfig::default().lr_at(77), TrainConfig::default().lr);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = toy_dataset(6);
        let sched = DiffusionSchedule::default();
        let tb = tables();
        let params = ModelParams::init(ModelConfig::tiny(), 4).unwrap();
        let batch: Vec<BatchItem> = (0..4).map(BatchItem).collect();
        let (loss, grad) =
            dsm_loss_and_gradient(&params, &data, &batch, &sched, &tb, &mut stream(1, &[]), &Sequential).unwrap();
        let same = dsm_loss(&params, &data, &batch, &sched, &tb, &mut stream(1, &[]), &Sequential).unwrap();
        assert_eq!(loss, same);
        let mut rng = stream(2, &[]);
        let n = params.num_params();
        let mut worst = 0.0f64;
        for _ in 0..(n / 100).max(20) {
            let i = rng.random_range(0..n);
            let h = 1e-5;
            let eval = |dx: f64| {
                let mut p = params.clone();
                p.values[i] += dx;
                dsm_loss(&p, &data, &batch, &sched, &tb, &mut stream(1, &[]), &Sequential).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
            worst = worst.max(err);
        }
        assert!(worst < 1e-3, "worst relative error {worst}");
    }

    #[test]
    fn balanced_sampler_is_uniform_over_objects() {
        let mut data = toy_dataset(0);
        for (object, count) in [(0, 100), (1, 10), (2, 40)] {
            for _ in 0..count {
                data.grasps.push(GraspSample { scene: 0, gripper: 0, object, pose: Pose::identity() });
            }
        }
        let sampler = BalancedSampler::new(&data).unwrap();
        let mut rng = stream(3, &[]);
        let mut counts = [0usize; 3];
        let batches = 10_000;
        for _ in 0..batches {
            for BatchItem(i) in sampler.sample(8, &mut rng) {
                counts[data.grasps[i].object] += 1;
            }
        }
        let expect = (batches * 8) as f64 / 3.0;
        for c in counts {
            assert!((c as f64 / expect - 1.0).abs() < 0.1, "{counts:?}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_dataset(8);
        let sched = DiffusionSchedule::default();
        let tb = tables();
        let cfg = TrainConfig { steps: 3, batch_size: 3, eval_batches: 1, ..TrainConfig::default() };
        let params = ModelParams::init(ModelConfig::tiny(), 0).unwrap();
        let (p1, r1) = train(params.clone(), &data, &sched, &tb, &cfg, &Sequential).unwrap();
        let (p2, r2) = train(params, &data, &sched, &tb, &cfg, &Sequential).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(p1, p2);
        assert!(r1.loss_trace.iter().all(|l| *l >= 0.0));
    }
}
