//! Iterative-removal evaluation.
//!
//! Per round: propose grasps on the current scan, label each with the
//! oracle, then remove the graspable object with the most successful
//! proposals (ties to the smallest instance id). The scene is rescanned
//! after every removal and rounds continue until no graspable object is
//! left.

use std::fmt::Write as _;
use std::path::Path;

use eqgrasp_core::graspgen::{evaluate_pose, GripperModel, Label, OracleConfig, Scene};
use eqgrasp_core::model::ParallelMap;
use eqgrasp_core::pointcloud::PointCloud;
use eqgrasp_core::rng::derive_seed;
use eqgrasp_core::Pose;

use crate::config::Config;
use crate::dataset::{Dataset, SceneEntry};
use crate::error::{Error, Result};
use crate::formats::write_bytes;
use crate::pipeline::gen::scan_scene;
use crate::pipeline::sample::ScoreSampler;
use crate::pipeline::train::read_checkpoint;

const PROPOSE: u64 = 20;
const RESCAN: u64 = 21;

/// Source of candidate pre-grasp poses for one round.
pub trait GraspProposer: Sync {
    fn propose(&self, scene: &Scene, cloud: &PointCloud, gripper: &GripperModel, count: usize, seed: u64) -> Result<Vec<Pose>>;
}

/// The trained diffusion sampler as a proposer.
pub struct ModelProposer<'a, P> {
    pub sampler: &'a ScoreSampler,
    pub gravity_deg: Option<f64>,
    pub max_chains_per_pose: usize,
    pub pool: &'a P,
}

impl<P: ParallelMap> GraspProposer for ModelProposer<'_, P> {
    fn propose(&self, _: &Scene, cloud: &PointCloud, gripper: &GripperModel, count: usize, seed: u64) -> Result<Vec<Pose>> {
        self.sampler
            .sample(cloud, gripper, count, seed, self.gravity_deg, self.max_chains_per_pose, self.pool)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    /// Graspable objects present at the start of the round.
    pub graspable: usize,
    pub successes: usize,
    pub proposals: usize,
    pub removed: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneReport {
    pub scene: String,
    pub gripper: String,
    pub rounds: Vec<Round>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub seed: u64,
    pub grasps_per_round: usize,
    pub admission: usize,
    pub scenes: Vec<SceneReport>,
    /// Successful proposals over all proposals slots, percent.
    pub success_rate: f64,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::from("eqgrasp-eval 1\n");
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "config grasps_per_round={} admission={}", self.grasps_per_round, self.admission);
        for sc in &self.scenes {
            for (k, r) in sc.rounds.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "round scene={} gripper={} round={k} graspable={} successes={}/{} removed={}",
                    sc.scene, sc.gripper, r.graspable, r.successes, self.grasps_per_round, r.removed
                );
            }
        }
        let rounds: usize = self.scenes.iter().map(|s| s.rounds.len()).sum();
        let _ = writeln!(s, "summary scenes={} rounds={rounds} success_rate={:.2}", self.scenes.len(), self.success_rate);
        s
    }
}

/// Instances with at least one valid dataset grasp, when every one of them
/// has at least `admission`; `None` if the scene is not admitted.
pub fn graspable_instances(entry: &SceneEntry, admission: usize) -> Option<Vec<String>> {
    let counts = Dataset::valid_counts(entry);
    let graspable: Vec<(usize, usize)> = counts.into_iter().enumerate().filter(|(_, c)| *c > 0).collect();
    if graspable.is_empty() || graspable.iter().any(|(_, c)| *c < admission) {
        return None;
    }
    Some(graspable.iter().map(|(i, _)| entry.scene.objects[*i].instance.clone()).collect())
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate_scene(
    entry: &SceneEntry,
    graspable: Vec<String>,
    gripper: &GripperModel,
    proposer: &dyn GraspProposer,
    config: &Config,
    oracle: &OracleConfig,
    scene_seed: u64,
) -> Result<SceneReport> {
    let per_round = config.eval.grasps_per_round;
    let mut scene = entry.scene.clone();
    let mut remaining = graspable;
    let mut rounds = Vec::new();
    while !remaining.is_empty() {
        let k = rounds.len() as u64;
        let cloud = if k == 0 {
            entry.cloud.clone()
        } else {
            scan_scene(&scene, &config.gen, derive_seed(scene_seed, &[RESCAN, k]))?
        };
        let poses = proposer.propose(&scene, &cloud, gripper, per_round, derive_seed(scene_seed, &[PROPOSE, k]))?;
        let index = scene.index();
        let mut wins = vec![0usize; scene.objects.len()];
        let mut successes = 0;
        for p in poses.iter().take(per_round) {
            let out = evaluate_pose(p, &index, gripper, oracle)?;
            if out.label == Label::Valid {
                successes += 1;
                if let Some(i) = out.object {
                    wins[i] += 1;
                }
            }
        }
        let wins_of = |id: &str| scene.find(id).map_or(0, |i| wins[i]);
        let best = remaining
            .iter()
            .min_by(|a, b| wins_of(b).cmp(&wins_of(a)).then_with(|| a.cmp(b)))
            .cloned()
            .expect("remaining is non-empty");
        rounds.push(Round {
            graspable: remaining.len(),
            successes,
            proposals: poses.len().min(per_round),
            removed: best.clone(),
        });
        remaining.retain(|id| *id != best);
        let i = scene.find(&best).expect("graspable instances belong to the scene");
        scene = scene.without(i);
    }
    Ok(SceneReport {
        scene: entry.id.clone(),
        gripper: gripper.id.clone(),
        rounds,
    })
}

/// Evaluates every admitted scene; scenes run in parallel and merge in
/// dataset order.
pub fn evaluate<P: ParallelMap>(ds: &Dataset, proposer: &dyn GraspProposer, config: &Config, pool: &P) -> Result<EvalReport> {
    let admitted: Vec<(usize, Vec<String>)> = ds
        .scenes
        .iter()
        .enumerate()
        .filter_map(|(i, e)| graspable_instances(e, config.eval.admission).map(|g| (i, g)))
        .collect();
    if admitted.is_empty() {
        return Err(Error::NoAdmissibleScene);
    }
    let oracle = config.gen.oracle();
    let reports = pool.map(admitted.len(), |j| {
        let (i, graspable) = &admitted[j];
        let e = &ds.scenes[*i];
        let g = ds
            .gripper(&e.gripper)
            .ok_or_else(|| Error::Format(format!("scene {} names unknown gripper {}", e.id, e.gripper)))?;
        evaluate_scene(e, graspable.clone(), g, proposer, config, &oracle, derive_seed(config.seed, &[*i as u64]))
    });
    let scenes = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let slots: usize = scenes.iter().map(|s| s.rounds.len() * config.eval.grasps_per_round).sum();
    let wins: usize = scenes.iter().flat_map(|s| &s.rounds).map(|r| r.successes).sum();
    Ok(EvalReport {
        seed: config.seed,
        grasps_per_round: config.eval.grasps_per_round,
        admission: config.eval.admission,
        scenes,
        success_rate: if slots == 0 { 0.0 } else { 100.0 * wins as f64 / slots as f64 },
    })
}

pub fn cmd_eval<P: ParallelMap>(checkpoint: &Path, data_dir: &Path, config: &Config, out: &Path, pool: &P) -> Result<EvalReport> {
    let ds = Dataset::read(data_dir)?;
    let sampler = ScoreSampler::from_checkpoint(&read_checkpoint(checkpoint)?, config.diffusion.schedule()?)?;
    let bin = ds.scenes.iter().any(|e| e.scene.bin.is_some());
    let proposer = ModelProposer {
        sampler: &sampler,
        gravity_deg: config.sample.gravity_limit(bin),
        max_chains_per_pose: config.sample.max_chains_per_pose,
        pool,
    };
    let report = evaluate(&ds, &proposer, config, pool)?;
    write_bytes(out, report.to_text().as_bytes())?;
    Ok(report)
}
