//! Pose sampling from a trained checkpoint.

use std::path::Path;

use eqgrasp_core::diffusion::{sample_chain, sample_prior, DiffusionSchedule};
use eqgrasp_core::graspgen::GripperModel;
use eqgrasp_core::model::{encode_gripper, encode_scene, score_model, ModelParams, ParallelMap};
use eqgrasp_core::pointcloud::{normalize, PointCloud};
use eqgrasp_core::rng::stream;
use eqgrasp_core::Pose;

use crate::config::Config;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::formats::{write_bytes, Checkpoint};
use crate::pipeline::train::read_checkpoint;

/// Angle in degrees between the gripper approach axis and gravity (`-z`).
pub fn approach_angle_deg(pose: &Pose, gripper: &GripperModel) -> f64 {
    let a = pose.rotation.apply(&gripper.approach);
    (-a.z).clamp(-1.0, 1.0).acos().to_degrees()
}

/// A trained model and the grippers it was trained with.
pub struct ScoreSampler {
    pub params: ModelParams,
    pub schedule: DiffusionSchedule,
    pub grippers: Vec<String>,
}

impl ScoreSampler {
    pub fn from_checkpoint(c: &Checkpoint, schedule: DiffusionSchedule) -> Result<Self> {
        Ok(Self {
            params: ModelParams::from_values(c.config.clone(), c.values.clone())?,
            schedule,
            grippers: c.grippers.clone(),
        })
    }

    /// Like [`ScoreSampler::sample_chains`], without chain ids.
    #[allow(clippy::too_many_arguments)]
    pub fn sample<P: ParallelMap>(
        &self,
        cloud: &PointCloud,
        gripper: &GripperModel,
        count: usize,
        seed: u64,
        gravity_deg: Option<f64>,
        max_chains_per_pose: usize,
        pool: &P,
    ) -> Result<Vec<Pose>> {
        let chains = self.sample_chains(cloud, gripper, count, seed, gravity_deg, max_chains_per_pose, pool)?;
        Ok(chains.into_iter().map(|(_, p)| p).collect())
    }

    /// `count` world-frame pre-grasp poses for the scan `cloud`, each with
    /// the id of the chain that produced it. Chain `i` uses stream
    /// `(seed, i)`; with a gravity limit, chains whose pose tilts further are
    /// dropped and more chains run, up to `count * max_chains_per_pose`.
    #[allow(clippy::too_many_arguments)]
    pub fn sample_chains<P: ParallelMap>(
        &self,
        cloud: &PointCloud,
        gripper: &GripperModel,
        count: usize,
        seed: u64,
        gravity_deg: Option<f64>,
        max_chains_per_pose: usize,
        pool: &P,
    ) -> Result<Vec<(usize, Pose)>> {
        if !self.grippers.contains(&gripper.id) {
            return Err(Error::Mismatch(format!("checkpoint was not trained with gripper `{}`", gripper.id)));
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        let (norm_cloud, n) = normalize(cloud)?;
        let scene = encode_scene(&norm_cloud.points, n, &self.params)?;
        let gq = encode_gripper(&gripper.open, &gripper.closed, &self.params)?;
        let score = |p: &Pose, t: f64| score_model(p, t, &scene, &gq, &self.params, &self.schedule);
        let budget = count * max_chains_per_pose.max(1);
        let mut out = Vec::with_capacity(count);
        let mut next = 0;
        while out.len() < count && next < budget {
            let batch = (count - out.len()).min(budget - next);
            let poses = pool.map(batch, |j| sample_chain(&score, &self.schedule, &mut stream(seed, &[(next + j) as u64])));
            next += batch;
            for (j, p) in poses.into_iter().enumerate() {
                let p = n.inverse_pose(&p?);
                if gravity_deg.is_none_or(|lim| approach_angle_deg(&p, gripper) <= lim) {
                    out.push((next - batch + j, p));
                }
                if out.len() == count {
                    break;
                }
            }
        }
        Ok(out)
    }
}

/// Draws from the diffusion prior in the normalized frame of `cloud`: the
/// learning-free baseline.
pub fn prior_poses(cloud: &PointCloud, count: usize, seed: u64) -> Result<Vec<Pose>> {
    let (_, n) = normalize(cloud)?;
    Ok((0..count)
        .map(|i| n.inverse_pose(&sample_prior(&mut stream(seed, &[i as u64]))))
        .collect())
}

/// One sampler output line: `qw qx qy qz tx ty tz chain t_final`.
pub fn sample_line(chain: usize, pose: &Pose, t_final: f64) -> String {
    format!("{pose} {chain} {t_final}")
}

/// Samples poses for one dataset scene and writes them as text, one
/// [`sample_line`] per pose.
#[allow(clippy::too_many_arguments)]
pub fn cmd_sample<P: ParallelMap>(
    checkpoint: &Path,
    data_dir: &Path,
    scene_id: &str,
    gripper_id: &str,
    count: Option<usize>,
    config: &Config,
    out: &Path,
    pool: &P,
) -> Result<Vec<(usize, Pose)>> {
    let ds = Dataset::read(data_dir)?;
    let entry = ds
        .scenes
        .iter()
        .find(|e| e.id == scene_id)
        .ok_or_else(|| Error::Config(format!("unknown scene `{scene_id}`")))?;
    let gripper = ds
        .gripper(gripper_id)
        .ok_or_else(|| Error::Config(format!("unknown gripper `{gripper_id}`")))?;
    let sampler = ScoreSampler::from_checkpoint(&read_checkpoint(checkpoint)?, config.diffusion.schedule()?)?;
    let s = &config.sample;
    let poses = sampler.sample_chains(
        &entry.cloud,
        gripper,
        count.unwrap_or(s.count),
        config.seed,
        s.gravity_limit(entry.scene.bin.is_some()),
        s.max_chains_per_pose,
        pool,
    )?;
    let t_final = sampler.schedule.t_min;
    let text: String = poses.iter().map(|(c, p)| sample_line(*c, p, t_final) + "\n").collect();
    write_bytes(out, text.as_bytes())?;
    Ok(poses)
}
