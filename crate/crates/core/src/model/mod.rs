//! Gripper-conditioned score model and its denoising-score-matching trainer.
//!
//! The scene is encoded into a hierarchy of equivariant descriptor fields.
//! Gripper query points, moved by the current pose, read those fields through
//! tensor-product convolutions; the per-level readouts are modulated by the
//! diffusion time, coupled with the gripper's own features and summed. A
//! linear head turns the summed `l = 1` channels into per-point forces and
//! torques whose averages are the translational and rotational scores.

mod conv;
mod encoder;
mod score;
mod train;

use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};

use crate::equivariant::{EquivariantLinear, Film, IrrepSpec, TensorProduct};
use crate::error::{invalid, Error, Result};
use crate::rng::StreamRng;

pub use conv::{ConvCache, Edges, TpConv};
pub use encoder::{encode_gripper, encode_scene, EdfLevel, GripperQuery, SceneEncoding};
pub use score::{score_model, ScoreTrace};
pub use train::{
    dsm_loss, dsm_loss_and_gradient, eval_loss, train, Adam, BalancedSampler, BatchItem, Dataset,
    GraspSample, GripperInput, ParallelMap, SceneInput, Sequential, TrainConfig, TrainReport,
};

/// Per-point gripper features after reduction: one channel per degree.
pub const GRIPPER_REDUCED: IrrepSpec = IrrepSpec::new(1, 1, 1);

/// How the diffusion time enters the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// One model; per-level readouts are FiLM-modulated by a time embedding.
    Film,
    /// Two heads over disjoint time ranges: the coarse level alone for
    /// `t >= split_time`, all levels below it. No FiLM.
    TwoStage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub widths: IrrepSpec,
    pub levels: usize,
    pub level_ratio: f64,
    pub neighbors: usize,
    pub n_radial: usize,
    /// Encoder convolution cutoff per level, normalized scene units.
    pub encoder_cutoffs: Vec<f64>,
    /// Query convolution cutoff per level, normalized scene units.
    pub query_cutoffs: Vec<f64>,
    pub query_neighbors: usize,
    pub gripper_points: usize,
    pub gripper_neighbors: usize,
    /// Gripper encoder cutoff in meters.
    pub gripper_cutoff: f64,
    pub time_dim: usize,
    pub variant: Variant,
    pub split_time: f64,
    pub fps_seed: u64,
    /// Per-axis variance, normalized units, of the Gaussian whose exact
    /// translational score is added to the learned one. Zero disables it.
    pub skip_variance: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            widths: IrrepSpec::new(16, 8, 4),
            levels: 3,
            level_ratio: 0.25,
            neighbors: 16,
            n_radial: 8,
            encoder_cutoffs: alloc::vec![0.3, 0.6, 1.2],
            query_cutoffs: alloc::vec![0.25, 0.5, 4.0],
            query_neighbors: 16,
            gripper_points: 32,
            gripper_neighbors: 16,
            gripper_cutoff: 0.08,
            time_dim: 32,
            variant: Variant::Film,
            split_time: 0.5,
            fps_seed: 0,
            skip_variance: 0.1,
        }
    }
}

impl ModelConfig {
    /// A narrow configuration for gradient and equivariance checks.
    pub fn tiny() -> Self {
        Self {
            widths: IrrepSpec::new(4, 2, 1),
            levels: 2,
            n_radial: 4,
            encoder_cutoffs: alloc::vec![0.6, 1.5],
            query_cutoffs: alloc::vec![0.6, 4.0],
            neighbors: 6,
            query_neighbors: 6,
            gripper_points: 6,
            gripper_neighbors: 6,
            time_dim: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(invalid("model needs at least one level"));
        }
        if self.encoder_cutoffs.len() != self.levels || self.query_cutoffs.len() != self.levels {
            return Err(invalid("one encoder and one query cutoff per level"));
        }
        if !(self.level_ratio > 0.0 && self.level_ratio <= 1.0) {
            return Err(invalid("level ratio must lie in (0, 1]"));
        }
        if self.widths.mult[0] == 0 || self.widths.mult[1] == 0 {
            return Err(invalid("widths need scalar and vector channels"));
        }
        let counts = [self.neighbors, self.query_neighbors, self.gripper_points, self.gripper_neighbors];
        if counts.contains(&0) || self.n_radial == 0 {
            return Err(invalid("neighbor, query and radial counts must be positive"));
        }
        if self.time_dim < 2 || self.time_dim % 2 != 0 {
            return Err(invalid("time embedding dimension must be even"));
        }
        let cutoffs = self.encoder_cutoffs.iter().chain(&self.query_cutoffs).chain([&self.gripper_cutoff]);
        if !(self.skip_variance >= 0.0 && self.skip_variance.is_finite()) {
            return Err(invalid("skip variance must be finite and non-negative"));
        }
        if cutoffs.clone().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(invalid("cutoffs must be positive"));
        }
        Ok(())
    }

    /// Points in level `l` of an `n`-point cloud: `ceil(ratio^l n)`.
    pub fn level_size(&self, n: usize, l: usize) -> usize {
        let mut m = n;
        let mut exact = n as f64;
        for _ in 0..l {
            exact *= self.level_ratio;
            m = crate::math::ceil(exact - 1e-9).max(1.0) as usize;
        }
        m
    }

    fn heads(&self) -> usize {
        match self.variant {
            Variant::Film => 1,
            Variant::TwoStage => 2,
        }
    }
}

/// The sub-layers of a model in parameter order.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layers {
    pub encoder: Vec<TpConv>,
    pub gripper: TpConv,
    pub reduce: EquivariantLinear,
    pub query: Vec<TpConv>,
    pub film: Option<Film>,
    pub mix: TensorProduct,
}

/// Offsets of every sub-layer inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layout {
    pub encoder: Vec<Range<usize>>,
    pub gripper: Range<usize>,
    pub reduce: Range<usize>,
    pub query: Vec<Range<usize>>,
    pub film: Vec<Range<usize>>,
    pub mix: Vec<Range<usize>>,
    /// `heads x [force weights (m1) | torque weights (m1)]`.
    pub head: Range<usize>,
    pub total: usize,
}

impl Layers {
    pub fn new(c: &ModelConfig) -> Self {
        let w = c.widths;
        let encoder = (0..c.levels)
            .map(|l| {
                let input = if l == 0 { IrrepSpec::scalars(1) } else { w };
                TpConv::new(input, w, c.n_radial, true)
            })
            .collect();
        Self {
            encoder,
            gripper: TpConv::new(IrrepSpec::scalars(2), w, c.n_radial, true),
            reduce: EquivariantLinear::new(w, GRIPPER_REDUCED),
            query: (0..c.levels).map(|_| TpConv::new(w, w, c.n_radial, true)).collect(),
            film: (c.variant == Variant::Film).then(|| Film::new(w, c.time_dim)),
            mix: TensorProduct::new(w, GRIPPER_REDUCED, w),
        }
    }

    pub fn layout(&self, c: &ModelConfig) -> Layout {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let encoder = self.encoder.iter().map(|l| take(l.num_weights())).collect();
        let gripper = take(self.gripper.num_weights());
        let reduce = take(self.reduce.num_weights());
        let query = self.query.iter().map(|l| take(l.num_weights())).collect();
        let film = match &self.film {
            Some(f) => (0..c.levels).map(|_| take(f.num_weights())).collect(),
            None => Vec::new(),
        };
        let mix = (0..c.levels).map(|_| take(self.mix.num_weights())).collect();
        let head = take(2 * c.widths.mult[1] * c.heads());
        Layout {
            encoder,
            gripper,
            reduce,
            query,
            film,
            mix,
            head,
            total: at,
        }
    }
}

/// Configuration plus flat weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub values: Vec<f64>,
}

fn fill_uniform(dst: &mut [f64], scale: f64, rng: &mut StreamRng) {
    for v in dst {
        *v = scale * rng.random_range(-1.0..1.0);
    }
}

/// Fan-in scaled uniform init for a convolution's radial and mixing weights.
fn init_conv(conv: &TpConv, w: &mut [f64], rng: &mut StreamRng) {
    let nb = conv.n_radial;
    let np = conv.paths().len();
    fill_uniform(&mut w[..np * nb], 1.0, rng);
    let mut fan = [0usize; 3];
    for p in conv.paths() {
        fan[p.l3] += conv.input.mult[p.l1];
    }
    let mut off = np * nb;
    for p in conv.paths() {
        let n = conv.output.mult[p.l3] * conv.input.mult[p.l1];
        let s = crate::math::sqrt(3.0 / fan[p.l3] as f64);
        fill_uniform(&mut w[off..off + n], s, rng);
        off += n;
    }
}

impl ModelParams {
    /// Randomly initialized weights.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layers = Layers::new(&config);
        let layout = layers.layout(&config);
        let mut values = alloc::vec![0.0; layout.total];
        let mut rng = StreamRng::seed_from_u64(seed);
        for (conv, r) in layers.encoder.iter().zip(&layout.encoder) {
            init_conv(conv, &mut values[r.clone()], &mut rng);
        }
        init_conv(&layers.gripper, &mut values[layout.gripper.clone()], &mut rng);
        let w = config.widths;
        let red = &mut values[layout.reduce.clone()];
        let mut off = 0;
        for l in 0..3 {
            let n = w.mult[l] * GRIPPER_REDUCED.mult[l];
            fill_uniform(&mut red[off..off + n], crate::math::sqrt(3.0 / w.mult[l].max(1) as f64), &mut rng);
            off += n;
        }
        for (conv, r) in layers.query.iter().zip(&layout.query) {
            init_conv(conv, &mut values[r.clone()], &mut rng);
        }
        for r in &layout.film {
            let s = 0.3 / crate::math::sqrt(config.time_dim as f64);
            fill_uniform(&mut values[r.clone()], s, &mut rng);
        }
        let mut fan = [0usize; 3];
        for p in &layers.mix.paths {
            fan[p.l3] += w.mult[p.l1];
        }
        for r in &layout.mix {
            let mut off = r.start;
            for p in &layers.mix.paths {
                let n = w.mult[p.l3] * w.mult[p.l1];
                fill_uniform(&mut values[off..off + n], crate::math::sqrt(3.0 / fan[p.l3] as f64), &mut rng);
                off += n;
            }
        }
        let s = crate::math::sqrt(3.0 / w.mult[1] as f64);
        fill_uniform(&mut values[layout.head.clone()], s, &mut rng);
        Ok(Self { config, values })
    }

    pub fn from_values(config: ModelConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let n = Layers::new(&config).layout(&config).total;
        if values.len() != n {
            return Err(Error::ShapeMismatch(alloc::format!(
                "model expects {n} parameters, got {}",
                values.len()
            )));
        }
        Ok(Self { config, values })
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn layers(&self) -> (Layers, Layout) {
        let layers = Layers::new(&self.config);
        let layout = layers.layout(&self.config);
        (layers, layout)
    }

    /// Zeroes the score head.
    pub fn zero_head(&mut self) {
        let (_, layout) = self.layers();
        self.values[layout.head].fill(0.0);
    }
}
