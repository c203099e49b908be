//! Pose-conditioned readout of the scene fields and the score head.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;

use super::conv::{ConvCache, Edges};
use super::encoder::{GripperQuery, SceneEncoding};
use super::{ModelParams, Variant, GRIPPER_REDUCED};
use crate::diffusion::{DiffusionSchedule, ScoreVector};
use crate::equivariant::sh::{l1_to_vector, vector_to_l1};
use crate::equivariant::{rotate_in_place, RadialBasis, TimeEmbedding, Wigner};
use crate::error::Result;
use crate::pointcloud::knn;
use crate::se3::Pose;

#[derive(Clone, Debug, PartialEq)]
struct LevelTrace {
    level: usize,
    edges: Edges,
    cache: ConvCache,
    /// Query-conv output, `K x dim`.
    conv: Vec<f64>,
    /// After FiLM (equal to `conv` without FiLM).
    modulated: Vec<f64>,
}

/// Forward intermediates of one score evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTrace {
    pub pose: Pose,
    pub t: f64,
    /// Score before division by `sigma(t)`, gripper frame.
    pub unscaled: ScoreVector,
    pub sigma: f64,
    head: usize,
    levels: Vec<LevelTrace>,
    embedding: Vec<f64>,
    /// `D(R)` applied to the reduced gripper features, `K x 9`.
    rotated: Vec<f64>,
    /// Summed field values, `K x dim`.
    summed: Vec<f64>,
    /// Lever arms `R q_k / s`.
    arms: Vec<Vector3<f64>>,
    wigner: Wigner,
}

impl ScoreTrace {
    pub fn score(&self) -> ScoreVector {
        self.unscaled.scaled(1.0 / self.sigma)
    }
}

/// Levels read at time `t` and the head used.
fn active(params: &ModelParams, t: f64) -> (Vec<usize>, usize) {
    let c = &params.config;
    match c.variant {
        Variant::Film => ((0..c.levels).collect(), 0),
        Variant::TwoStage if t >= c.split_time => (vec![c.levels - 1], 0),
        Variant::TwoStage => ((0..c.levels).collect(), 1),
    }
}

/// Runs the model and keeps everything the backward pass needs.
pub(crate) fn trace(
    pose: &Pose,
    t: f64,
    scene: &SceneEncoding,
    gripper: &GripperQuery,
    params: &ModelParams,
    schedule: &DiffusionSchedule,
) -> Result<ScoreTrace> {
    let c = &params.config;
    let (layers, layout) = params.layers();
    let spec = c.widths;
    let dim = spec.dim();
    let nk = gripper.len();
    let s = scene.normalization.scale;
    let arms: Vec<Vector3<f64>> = gripper.points.iter().map(|q| pose.rotation.apply(q) / s).collect();
    let queries: Vec<Vector3<f64>> = arms.iter().map(|y| y + pose.translation).collect();
    let wigner = Wigner::new(&pose.rotation);
    let mut rotated = gripper.reduced.clone();
    for block in rotated.chunks_mut(GRIPPER_REDUCED.dim()) {
        rotate_in_place(&GRIPPER_REDUCED, block, &wigner);
    }
    let embedding = match layers.film {
        Some(_) => TimeEmbedding::new(t, c.time_dim)?.values,
        None => Vec::new(),
    };
    let (active, head) = active(params, t);
    let mut summed = vec![0.0; nk * dim];
    let mut levels = Vec::with_capacity(active.len());
    for l in active {
        let lvl = &scene.levels[l];
        let nbrs = knn(&lvl.points, &queries, c.query_neighbors.min(lvl.points.len()))?;
        let basis = RadialBasis::new(c.n_radial, c.query_cutoffs[l])?;
        let edges = Edges::build(&lvl.points, &queries, &nbrs, &basis);
        let mut conv = vec![0.0; nk * dim];
        let cache = layers.query[l].forward(&edges, &lvl.features, &params.values[layout.query[l].clone()], &mut conv);
        let modulated = match &layers.film {
            Some(film) => {
                let w = &params.values[layout.film[l].clone()];
                let mut out = vec![0.0; nk * dim];
                for (x, o) in conv.chunks(dim).zip(out.chunks_mut(dim)) {
                    film.forward(x, &embedding, w, o);
                }
                out
            }
            None => conv.clone(),
        };
        let w = &params.values[layout.mix[l].clone()];
        for k in 0..nk {
            layers.mix.forward(
                &modulated[k * dim..(k + 1) * dim],
                &rotated[k * 9..(k + 1) * 9],
                w,
                &mut summed[k * dim..(k + 1) * dim],
            );
        }
        levels.push(LevelTrace {
            level: l,
            edges,
            cache,
            conv,
            modulated,
        });
    }

    let sigma = schedule.sigma(t);
    let mut unscaled = head_forward(params, head, &summed, &arms, pose);
    unscaled.translational += skip(pose, t, scene, c.skip_variance, schedule) * sigma;
    Ok(ScoreTrace {
        pose: *pose,
        t,
        unscaled,
        sigma,
        head,
        levels,
        embedding,
        rotated,
        summed,
        arms,
        wigner,
    })
}

/// Translational score, gripper frame, of `N(centroid, (alpha^2 v + sigma^2) I)`:
/// the forward marginal of data `N(0, v I)` in the normalized frame, with the
/// mean pinned to the centroid so joint rigid motions leave it invariant.
/// Without it the learned field would have to grow linearly far from the
/// scene, which a finite-cutoff readout cannot.
fn skip(pose: &Pose, t: f64, scene: &SceneEncoding, v: f64, schedule: &DiffusionSchedule) -> Vector3<f64> {
    if v == 0.0 {
        return Vector3::zeros();
    }
    let a = schedule.alpha(t);
    let d = pose.translation - scene.centroid;
    pose.rotation.inverse().apply(&(-d / (a * a * v + schedule.variance(t))))
}

/// Forces and torques from the summed `l = 1` channels, averaged into a
/// wrench and expressed in the gripper frame.
fn head_forward(params: &ModelParams, head: usize, summed: &[f64], arms: &[Vector3<f64>], pose: &Pose) -> ScoreVector {
    let spec = params.config.widths;
    let (dim, m1) = (spec.dim(), spec.mult[1]);
    let (_, layout) = params.layers();
    let hw = &params.values[layout.head][head * 2 * m1..(head + 1) * 2 * m1];
    let mut trans = Vector3::zeros();
    let mut rot = Vector3::zeros();
    for (k, y) in arms.iter().enumerate() {
        let z = &summed[k * dim..(k + 1) * dim];
        let mut force = Vector3::zeros();
        let mut torque = Vector3::zeros();
        for ch in 0..m1 {
            let v = l1_to_vector(&z[spec.block(1, ch)]);
            force += v * hw[ch];
            torque += v * hw[m1 + ch];
        }
        trans += force;
        rot += y.cross(&force) + torque;
    }
    let inv_r = pose.rotation.inverse();
    let kf = arms.len() as f64;
    ScoreVector {
        translational: inv_r.apply(&(trans / kf)),
        rotational: inv_r.apply(&(rot / kf)),
    }
}

/// Gradient of `g . head_forward` into the head weights and the summed field.
fn head_backward(tr: &ScoreTrace, g: &ScoreVector, params: &ModelParams, dw: &mut [f64]) -> Vec<f64> {
    let spec = params.config.widths;
    let (dim, m1) = (spec.dim(), spec.mult[1]);
    let (_, layout) = params.layers();
    let nk = tr.arms.len();
    let kf = nk as f64;
    let g_trans = tr.pose.rotation.apply(&g.translational) / kf;
    let g_rot = tr.pose.rotation.apply(&g.rotational) / kf;
    let hoff = layout.head.start + tr.head * 2 * m1;
    let hw = &params.values[hoff..hoff + 2 * m1];
    let mut d_summed = vec![0.0; nk * dim];
    for k in 0..nk {
        let d_force = g_trans + g_rot.cross(&tr.arms[k]);
        let z = &tr.summed[k * dim..(k + 1) * dim];
        for ch in 0..m1 {
            let r = spec.block(1, ch);
            let v = l1_to_vector(&z[r.clone()]);
            dw[hoff + ch] += d_force.dot(&v);
            dw[hoff + m1 + ch] += g_rot.dot(&v);
            let dv = vector_to_l1(&(d_force * hw[ch] + g_rot * hw[m1 + ch]));
            for (d, x) in d_summed[k * dim + r.start..k * dim + r.end].iter_mut().zip(dv) {
                *d += x;
            }
        }
    }
    d_summed
}

/// Score at pose `pose` (normalized scene frame) and time `t`, in the
/// gripper frame.
pub fn score_model(
    pose: &Pose,
    t: f64,
    scene: &SceneEncoding,
    gripper: &GripperQuery,
    params: &ModelParams,
    schedule: &DiffusionSchedule,
) -> Result<ScoreVector> {
    schedule.check_time(t)?;
    Ok(trace(pose, t, scene, gripper, params, schedule)?.score())
}

/// Gradients flowing out of one score evaluation into the encoders.
pub(crate) struct TraceGrads {
    pub levels: Vec<Vec<f64>>,
    pub reduced: Vec<f64>,
}

/// Backpropagates a gradient on `trace.unscaled`. Readout weights go to `dw`;
/// encoder-side gradients are returned for later accumulation.
pub(crate) fn backward(
    tr: &ScoreTrace,
    g: &ScoreVector,
    scene: &SceneEncoding,
    params: &ModelParams,
    dw: &mut [f64],
) -> TraceGrads {
    let c = &params.config;
    let (layers, layout) = params.layers();
    let spec = c.widths;
    let dim = spec.dim();
    let nk = tr.arms.len();
    let d_summed = head_backward(tr, g, params, dw);

    let mut d_levels: Vec<Vec<f64>> = scene.zero_level_grads();
    let mut d_rotated = vec![0.0; nk * 9];
    for lt in &tr.levels {
        let l = lt.level;
        let mr = layout.mix[l].clone();
        let mut d_mod = vec![0.0; nk * dim];
        for k in 0..nk {
            let (a, b) = (k * dim..(k + 1) * dim, k * 9..(k + 1) * 9);
            layers.mix.backward(
                &lt.modulated[a.clone()],
                &tr.rotated[b.clone()],
                &params.values[mr.clone()],
                &d_summed[a.clone()],
                &mut d_mod[a],
                &mut d_rotated[b],
                &mut dw[mr.clone()],
            );
        }
        let d_conv = match &layers.film {
            Some(film) => {
                let fr = layout.film[l].clone();
                let mut d_conv = vec![0.0; nk * dim];
                for k in 0..nk {
                    let a = k * dim..(k + 1) * dim;
                    film.backward(
                        &lt.conv[a.clone()],
                        &tr.embedding,
                        &params.values[fr.clone()],
                        &d_mod[a.clone()],
                        &mut d_conv[a],
                        &mut dw[fr.clone()],
                    );
                }
                d_conv
            }
            None => d_mod,
        };
        let qr = layout.query[l].clone();
        layers.query[l].backward(
            &lt.edges,
            &scene.levels[l].features,
            &params.values[qr.clone()],
            &lt.cache,
            &d_conv,
            &mut dw[qr],
            Some(&mut d_levels[l]),
        );
    }
    let back = tr.wigner.transpose();
    for block in d_rotated.chunks_mut(9) {
        rotate_in_place(&GRIPPER_REDUCED, block, &back);
    }
    TraceGrads {
        levels: d_levels,
        reduced: d_rotated,
    }
}
