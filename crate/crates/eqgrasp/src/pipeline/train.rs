//! Training on a generated dataset, with resumable checkpoints.

use std::path::Path;

use eqgrasp_core::graspgen::Label;
use eqgrasp_core::igso3::{IgSo3Bank, DEFAULT_TRUNCATION, MIN_GRID};
use eqgrasp_core::model::{
    self, dsm_loss_and_gradient, eval_loss, Adam, BalancedSampler, GraspSample, GripperInput, ModelParams,
    ParallelMap, SceneInput,
};
use eqgrasp_core::pointcloud::normalize;
use eqgrasp_core::rng::{derive_seed, stream};

use crate::config::Config;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::formats::{checkpoint_from_bytes, checkpoint_to_bytes, loss_csv, parse_loss_csv, read_bytes, write_bytes, Checkpoint};

const INIT: u64 = 10;
const TRAIN: u64 = 11;

/// Normalized scene clouds, gripper clouds and every valid scene grasp.
/// Grasps are balanced over object models.
pub fn training_set(ds: &Dataset) -> Result<model::Dataset> {
    let mut scenes = Vec::with_capacity(ds.scenes.len());
    let mut grasps = Vec::new();
    for (si, e) in ds.scenes.iter().enumerate() {
        let (cloud, normalization) = normalize(&e.cloud)?;
        scenes.push(SceneInput {
            points: cloud.points,
            normalization,
        });
        let gripper = ds
            .grippers
            .iter()
            .position(|g| g.id == e.gripper)
            .ok_or_else(|| Error::Format(format!("scene {} names unknown gripper {}", e.id, e.gripper)))?;
        for r in e.records.iter().filter(|r| r.label == Label::Valid) {
            let inst = e.scene.find(&r.object).ok_or_else(|| eqgrasp_core::Error::UnknownObject(r.object.clone()))?;
            let model_id = &e.scene.objects[inst].model.id;
            let object = ds
                .objects
                .iter()
                .position(|o| &o.id == model_id)
                .ok_or_else(|| eqgrasp_core::Error::UnknownObject(model_id.clone()))?;
            grasps.push(GraspSample {
                scene: si,
                gripper,
                object,
                pose: normalization.forward_pose(&r.pose),
            });
        }
    }
    let grippers = ds
        .grippers
        .iter()
        .map(|g| GripperInput {
            open: g.open.clone(),
            closed: g.closed.clone(),
        })
        .collect();
    let out = model::Dataset {
        scenes,
        grippers,
        grasps,
    };
    out.validate()?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Minibatch loss before each update taken in this run.
    pub losses: Vec<(usize, f64)>,
    /// Fixed-seed evaluation loss before and after this run.
    pub initial_eval: f64,
    pub final_eval: f64,
}

/// Adam on the DSM loss. Step `k` draws its batch from stream `(seed, k)`,
/// so a run resumed from a checkpoint continues exactly where it stopped.
pub fn train_model<P: ParallelMap>(ds: &Dataset, config: &Config, pool: &P, resume: Option<Checkpoint>) -> Result<TrainOutcome> {
    let data = training_set(ds)?;
    let schedule = config.diffusion.schedule()?;
    let tables = IgSo3Bank::with_resolution(&[], DEFAULT_TRUNCATION, MIN_GRID)?;
    let tc = config.train.train_config(derive_seed(config.seed, &[TRAIN]));
    let model_config = config.model.model_config(config.seed);
    let grippers: Vec<String> = ds.grippers.iter().map(|g| g.id.clone()).collect();
    let (mut params, mut adam, start) = match resume {
        Some(c) => {
            if c.config != model_config || c.grippers != grippers || c.seed != config.seed {
                return Err(Error::Mismatch("checkpoint was trained with a different model, seed or gripper set".into()));
            }
            let adam = Adam::from_state(tc.lr, c.adam_m, c.adam_v, c.adam_step)?;
            (ModelParams::from_values(c.config, c.values)?, adam, c.steps_done)
        }
        None => {
            let p = ModelParams::init(model_config, derive_seed(config.seed, &[INIT]))?;
            let n = p.num_params();
            (p, Adam::new(tc.lr, n), 0)
        }
    };
    let sampler = BalancedSampler::new(&data)?;
    let initial_eval = eval_loss(&params, &data, &schedule, &tables, &tc, pool)?;
    let mut losses = Vec::new();
    for step in start..tc.steps {
        let mut rng = stream(tc.seed, &[step as u64]);
        let batch = sampler.sample(tc.batch_size, &mut rng);
        let (loss, grad) = dsm_loss_and_gradient(&params, &data, &batch, &schedule, &tables, &mut rng, pool)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(eqgrasp_core::Error::Diverged { step, loss }.into());
        }
        losses.push((step, loss));
        adam.lr = tc.lr_at(step);
        adam.update(&mut params.values, &grad);
    }
    let final_eval = eval_loss(&params, &data, &schedule, &tables, &tc, pool)?;
    let (m, v, adam_step) = adam.state();
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: params.config,
            values: params.values,
            adam_m: m.to_vec(),
            adam_v: v.to_vec(),
            adam_step,
            steps_done: tc.steps.max(start),
            seed: config.seed,
            lr: tc.lr,
            grippers,
        },
        losses,
        initial_eval,
        final_eval,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    checkpoint_from_bytes(&read_bytes(path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Trains on the dataset in `data_dir`, writing `checkpoint.bin` and
/// `loss.csv` to `out`. With `resume`, continues from the checkpoint in
/// `out` and appends to its loss curve.
pub fn cmd_train<P: ParallelMap>(data_dir: &Path, config: &Config, out: &Path, resume: bool, pool: &P) -> Result<TrainOutcome> {
    let ds = Dataset::read(data_dir)?;
    let ckpt_path = out.join("checkpoint.bin");
    let csv_path = out.join("loss.csv");
    let (previous, mut rows) = if resume {
        let c = read_checkpoint(&ckpt_path)?;
        let mut rows = parse_loss_csv(&read_bytes(&csv_path)?)?;
        rows.retain(|(s, _)| *s < c.steps_done);
        (Some(c), rows)
    } else {
        (None, Vec::new())
    };
    let outcome = train_model(&ds, config, pool, previous)?;
    rows.extend(&outcome.losses);
    write_bytes(&ckpt_path, &checkpoint_to_bytes(&outcome.checkpoint)?)?;
    write_bytes(&csv_path, &loss_csv(&rows)?)?;
    Ok(outcome)
}
