//! Run configuration: one TOML file plus `key=value` overrides.

use std::path::{Path, PathBuf};

use eqgrasp_core::diffusion::{BetaSchedule, DiffusionSchedule, TimeGrid};
use eqgrasp_core::equivariant::IrrepSpec;
use eqgrasp_core::graspgen::{AntipodalConfig, OracleConfig};
use eqgrasp_core::model::{ModelConfig, TrainConfig, Variant};
use eqgrasp_core::pointcloud::ScanMode;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    #[serde(default)]
    pub gen: GenConfig,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub diffusion: DiffusionSection,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub eval: EvalSection,
}

/// A gripper loaded from two PLY clouds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperFile {
    pub id: String,
    pub open: PathBuf,
    pub closed: PathBuf,
    pub aperture: f64,
    pub standoff: f64,
    pub grasp_center: [f64; 3],
    #[serde(default = "x_axis")]
    pub closing: [f64; 3],
    #[serde(default = "z_axis")]
    pub approach: [f64; 3],
}

fn x_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

fn z_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scan {
    Dense,
    Sparse,
}

impl From<Scan> for ScanMode {
    fn from(s: Scan) -> Self {
        match s {
            Scan::Dense => ScanMode::Dense,
            Scan::Sparse => ScanMode::Sparse,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Library object ids; empty selects the whole library.
    pub objects: Vec<String>,
    /// Library gripper ids; empty selects the whole library unless
    /// `gripper_files` is set.
    pub grippers: Vec<String>,
    pub gripper_files: Vec<GripperFile>,
    /// Valid grasps sought per object and gripper.
    pub grasps_per_pair: usize,
    /// Sampling attempts allowed per sought grasp.
    pub attempts_per_grasp: usize,
    pub scenes_per_gripper: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub bin: bool,
    pub half_extent: f64,
    pub scan: Scan,
    pub scan_resolution: usize,
    pub scan_samples: usize,
    /// Points kept per scene cloud after farthest-point sampling.
    pub scene_points: usize,
    pub friction_deg: f64,
    pub clearance: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            objects: Vec::new(),
            grippers: Vec::new(),
            gripper_files: Vec::new(),
            grasps_per_pair: 200,
            attempts_per_grasp: 50,
            scenes_per_gripper: 20,
            min_objects: 1,
            max_objects: 12,
            bin: false,
            half_extent: 0.15,
            scan: Scan::Dense,
            scan_resolution: 96,
            scan_samples: 40_000,
            scene_points: 512,
            friction_deg: 10.0,
            clearance: 0.002,
        }
    }
}

impl GenConfig {
    pub fn oracle(&self) -> OracleConfig {
        OracleConfig {
            friction_deg: self.friction_deg,
            clearance: self.clearance,
            ..OracleConfig::default()
        }
    }

    pub fn antipodal(&self) -> AntipodalConfig {
        AntipodalConfig {
            friction_deg: self.friction_deg,
            ..AntipodalConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Default,
    Small,
    Tiny,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    Film,
    TwoStage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Preset,
    pub variant: VariantName,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            preset: Preset::Default,
            variant: VariantName::Film,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self, seed: u64) -> ModelConfig {
        let base = match self.preset {
            Preset::Default => ModelConfig::default(),
            Preset::Tiny => ModelConfig::tiny(),
            Preset::Small => ModelConfig {
                widths: IrrepSpec::new(8, 4, 2),
                levels: 2,
                n_radial: 6,
                encoder_cutoffs: vec![0.4, 1.0],
                query_cutoffs: vec![0.4, 4.0],
                neighbors: 10,
                query_neighbors: 10,
                gripper_points: 16,
                gripper_neighbors: 8,
                time_dim: 8,
                ..ModelConfig::default()
            },
        };
        ModelConfig {
            variant: match self.variant {
                VariantName::Film => Variant::Film,
                VariantName::TwoStage => Variant::TwoStage,
            },
            fps_seed: seed,
            ..base
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub eval_batches: usize,
    /// Cosine decay horizon in steps; zero keeps `lr` constant.
    pub decay_steps: usize,
    pub lr_final: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            steps: d.steps,
            batch_size: d.batch_size,
            lr: d.lr,
            eval_batches: d.eval_batches,
            decay_steps: d.decay_steps,
            lr_final: d.lr_final,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            lr: self.lr,
            seed,
            eval_batches: self.eval_batches,
            decay_steps: self.decay_steps,
            lr_final: self.lr_final,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridName {
    Uniform,
    UniformSigma,
    Quadratic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionSection {
    pub beta0: f64,
    pub beta1: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
    pub noise_scale: f64,
    pub grid: GridName,
}

impl Default for DiffusionSection {
    fn default() -> Self {
        let d = DiffusionSchedule::default();
        let BetaSchedule::Affine { beta0, beta1 } = d.beta else {
            unreachable!("default schedule is affine")
        };
        Self {
            beta0,
            beta1,
            t_min: d.t_min,
            t_max: d.t_max,
            steps: d.steps,
            noise_scale: d.noise_scale,
            grid: GridName::Quadratic,
        }
    }
}

impl DiffusionSection {
    pub fn schedule(&self) -> Result<DiffusionSchedule> {
        let s = DiffusionSchedule {
            beta: BetaSchedule::Affine {
                beta0: self.beta0,
                beta1: self.beta1,
            },
            t_min: self.t_min,
            t_max: self.t_max,
            steps: self.steps,
            noise_scale: self.noise_scale,
            denoise_final: false,
            grid: match self.grid {
                GridName::Uniform => TimeGrid::Uniform,
                GridName::UniformSigma => TimeGrid::UniformSigma,
                GridName::Quadratic => TimeGrid::Quadratic,
            },
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub count: usize,
    /// Largest angle between the approach axis and gravity, degrees; unset
    /// disables the filter outside bin mode.
    pub gravity_deg: Option<f64>,
    /// Filter angle used in bin mode when `gravity_deg` is unset.
    pub bin_gravity_deg: f64,
    /// Chains drawn per requested pose before giving up on the filter.
    pub max_chains_per_pose: usize,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            count: 100,
            gravity_deg: None,
            bin_gravity_deg: 25.0,
            max_chains_per_pose: 20,
        }
    }
}

impl SampleSection {
    pub fn gravity_limit(&self, bin: bool) -> Option<f64> {
        self.gravity_deg.or(bin.then_some(self.bin_gravity_deg))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub grasps_per_round: usize,
    /// Valid dataset grasps each graspable object needs for its scene to be
    /// admitted.
    pub admission: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            grasps_per_round: 100,
            admission: 20,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        if !table.contains_key("seed") {
            return Err(Error::Config("a master `seed` is required".into()));
        }
        let c: Config = table.try_into().map_err(|e| Error::Config(format!("{e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.gen;
        if !(1..=g.max_objects).contains(&g.min_objects) || g.max_objects > 12 {
            return Err(Error::Config("scene object counts must satisfy 1 <= min <= max <= 12".into()));
        }
        let t = &self.train;
        if t.batch_size == 0 || !(t.lr > 0.0) || !(t.lr_final > 0.0) {
            return Err(Error::Config("batch_size, lr and lr_final must be positive".into()));
        }
        if g.scene_points < 64 {
            return Err(Error::Config("scene_points must be at least 64".into()));
        }
        self.gen.antipodal().validate()?;
        self.gen.oracle().validate()?;
        self.diffusion.schedule()?;
        self.model.model_config(self.seed).validate()?;
        if let Some(a) = self.sample.gravity_deg {
            if !(0.0..=180.0).contains(&a) {
                return Err(Error::Config("gravity_deg must lie in [0, 180]".into()));
            }
        }
        Ok(())
    }
}

/// `section.key=value`; the value is read as TOML, falling back to a string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        assert!(Config::from_toml("", &[]).is_err());
        let c = Config::from_toml("seed = 3", &[]).unwrap();
        assert_eq!(c.gen.grasps_per_pair, 200);
        assert_eq!(c.sample.gravity_limit(true), Some(25.0));
        assert_eq!(c.sample.gravity_limit(false), None);
    }

    #[test]
    fn overrides_and_round_trip() {
        let c = Config::from_toml(
            "seed = 1\n[gen]\nbin = true\n",
            &["train.steps=7".into(), "gen.objects=[\"box_s\"]".into(), "model.preset=tiny".into()],
        )
        .unwrap();
        assert_eq!(c.train.steps, 7);
        assert_eq!(c.gen.objects, vec!["box_s".to_string()]);
        assert_eq!(c.model.preset, Preset::Tiny);
        assert!(c.gen.bin);
        assert_eq!(Config::from_toml(&c.to_toml(), &[]).unwrap(), c);
        assert!(Config::from_toml("seed = 1\nbogus = 2", &[]).is_err());
        assert!(Config::from_toml("seed = 1", &["gen.max_objects=13".into()]).is_err());
    }
}
