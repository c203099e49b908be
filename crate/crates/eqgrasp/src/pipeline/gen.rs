//! Dataset generation: per-pair antipodal grasps, heap scenes, scans and
//! transferred labels.

use std::path::Path;

use eqgrasp_core::graspgen::{
    generate_heap, gripper_library, object_library, sample_antipodal, transfer_grasps, GraspRecord, GripperModel,
    HeapConfig, ObjectModel, Scene,
};
use eqgrasp_core::model::ParallelMap;
use eqgrasp_core::pointcloud::{cameras_on_ring, crop_box, fps, render_scan, Aabb, PointCloud, Projection, ScanConfig};
use eqgrasp_core::rng::{derive_seed, stream};
use nalgebra::Vector3;
use rand::Rng;

use crate::config::{Config, GenConfig};
use crate::dataset::{Dataset, SceneEntry};
use crate::error::{Error, Result};
use crate::formats::read_ply;

/// Stream tags separating the random streams of each stage.
pub(crate) const PAIRS: u64 = 1;
pub(crate) const SCENES: u64 = 2;
pub(crate) const SCANS: u64 = 3;

pub fn resolve_objects(cfg: &GenConfig) -> Result<Vec<ObjectModel>> {
    let lib = object_library();
    if cfg.objects.is_empty() {
        return Ok(lib);
    }
    cfg.objects
        .iter()
        .map(|id| {
            lib.iter()
                .find(|o| &o.id == id)
                .cloned()
                .ok_or_else(|| eqgrasp_core::Error::UnknownObject(id.clone()).into())
        })
        .collect()
}

pub fn resolve_grippers(cfg: &GenConfig) -> Result<Vec<GripperModel>> {
    let lib = gripper_library();
    let mut out: Vec<GripperModel> = if cfg.grippers.is_empty() && cfg.gripper_files.is_empty() {
        lib
    } else {
        cfg.grippers
            .iter()
            .map(|id| {
                lib.iter()
                    .find(|g| &g.id == id)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("unknown gripper `{id}`")))
            })
            .collect::<Result<_>>()?
    };
    for f in &cfg.gripper_files {
        let g = GripperModel {
            id: f.id.clone(),
            open: read_ply(&f.open)?.points,
            closed: read_ply(&f.closed)?.points,
            closing: Vector3::from(f.closing),
            approach: Vector3::from(f.approach),
            aperture: f.aperture,
            standoff: f.standoff,
            grasp_center: Vector3::from(f.grasp_center),
        };
        g.validate()?;
        out.push(g);
    }
    let mut ids: Vec<&str> = out.iter().map(|g| g.id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("gripper ids must be unique".into()));
    }
    Ok(out)
}

/// Valid object-frame grasps for one pair, stopping at the configured count
/// or when the attempt budget runs out.
pub fn sample_pair(object: &ObjectModel, gripper: &GripperModel, cfg: &GenConfig, seed: u64) -> Result<Vec<GraspRecord>> {
    let index = Scene::isolated(object).index();
    let mut rng = stream(seed, &[]);
    let (antipodal, oracle) = (cfg.antipodal(), cfg.oracle());
    let mut out = Vec::new();
    for _ in 0..cfg.grasps_per_pair * cfg.attempts_per_grasp {
        if out.len() == cfg.grasps_per_pair {
            break;
        }
        if let Ok(r) = sample_antipodal(object, gripper, &index, &antipodal, &oracle, &mut rng)? {
            out.push(r);
        }
    }
    Ok(out)
}

/// Scan of `scene`, cropped to the placement region and thinned to
/// `cfg.scene_points` by farthest-point sampling.
pub fn scan_scene(scene: &Scene, cfg: &GenConfig, seed: u64) -> Result<PointCloud> {
    let center = Vector3::new(0.0, 0.0, 0.05);
    let cameras = cameras_on_ring(&center, 0.55, 0.45, 10, Projection::Pinhole { fov_y: 0.9 })?;
    let scan_cfg = ScanConfig {
        width: cfg.scan_resolution,
        height: cfg.scan_resolution,
        surface_samples: cfg.scan_samples,
        ..ScanConfig::default()
    };
    let mut rng = stream(seed, &[]);
    let full = render_scan(scene, &cameras, cfg.scan.into(), &scan_cfg, &mut rng)?;
    let reach = match &scene.bin {
        Some(b) => b.inner.x.max(b.inner.y) / 2.0 + b.wall,
        None => cfg.half_extent,
    } + 0.04;
    let cropped = crop_box(&full, &Aabb::new(Vector3::new(-reach, -reach, -0.01), Vector3::new(reach, reach, 1.0)));
    if cropped.len() <= cfg.scene_points {
        return Ok(cropped);
    }
    let keep = fps(&cropped.points, cfg.scene_points, derive_seed(seed, &[1]))?;
    Ok(cropped.select(&keep))
}

/// One heap or bin scene for `gripper` with transferred, relabelled grasps.
fn make_scene<'a>(
    k: usize,
    gripper: &GripperModel,
    objects: &[ObjectModel],
    grasps: impl Fn(&str) -> &'a [GraspRecord],
    config: &Config,
) -> Result<SceneEntry> {
    let cfg = &config.gen;
    let mut rng = stream(config.seed, &[SCENES, k as u64]);
    let heap = HeapConfig {
        count: rng.random_range(cfg.min_objects..=cfg.max_objects),
        half_extent: cfg.half_extent,
        bin: cfg.bin,
        ..HeapConfig::default()
    };
    let scene = generate_heap(objects, &heap, &mut rng)?;
    let cloud = scan_scene(&scene, cfg, derive_seed(config.seed, &[SCANS, k as u64]))?;
    let index = scene.index();
    let mut records = Vec::new();
    for (i, o) in scene.objects.iter().enumerate() {
        records.extend(transfer_grasps(grasps(&o.model.id), &scene, &index, i, gripper, &cfg.oracle())?);
    }
    Ok(SceneEntry {
        id: format!("scene_{k:04}"),
        gripper: gripper.id.clone(),
        scene,
        cloud,
        records,
    })
}

pub fn generate<P: ParallelMap>(config: &Config, pool: &P) -> Result<Dataset> {
    config.validate()?;
    let cfg = &config.gen;
    let objects = resolve_objects(cfg)?;
    let grippers = resolve_grippers(cfg)?;
    let pairs: Vec<(usize, usize)> = (0..objects.len())
        .flat_map(|o| (0..grippers.len()).map(move |g| (o, g)))
        .collect();
    let per_pair = pool.map(pairs.len(), |i| {
        let (o, g) = pairs[i];
        sample_pair(&objects[o], &grippers[g], cfg, derive_seed(config.seed, &[PAIRS, i as u64]))
    });
    let per_pair = per_pair.into_iter().collect::<Result<Vec<_>>>()?;
    let jobs: Vec<usize> = (0..grippers.len())
        .flat_map(|g| std::iter::repeat_n(g, cfg.scenes_per_gripper))
        .collect();
    let scenes = pool.map(jobs.len(), |k| {
        let g = jobs[k];
        let grasps = |model: &str| -> &[GraspRecord] {
            let o = objects.iter().position(|o| o.id == model).expect("heap objects come from the list");
            &per_pair[o * grippers.len() + g]
        };
        make_scene(k, &grippers[g], &objects, grasps, config)
    });
    let scenes = scenes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        config: config.clone(),
        objects,
        grippers,
        object_grasps: per_pair.into_iter().flatten().collect(),
        scenes,
    })
}

/// Generates and writes a dataset to `out`.
pub fn cmd_gen<P: ParallelMap>(config: &Config, out: &Path, pool: &P) -> Result<Dataset> {
    let ds = generate(config, pool)?;
    ds.write(out)?;
    Ok(ds)
}
