//! A generated dataset in memory and its directory layout.
//!
//! ```text
//! manifest.txt            versioned index of objects, grippers and scenes
//! config.toml             configuration echo
//! grippers/<id>_{open,closed}.ply
//! grasps/objects.txt      object-frame records of every object-gripper pair
//! scenes/<scene>.txt      object poses, support plane, bin
//! scenes/<scene>.ply      scan cloud (world frame)
//! grasps/<scene>.txt      scene-frame records after transfer
//! stats.txt               graspability histogram and label counts
//! ```

use std::fmt::Write as _;
use std::path::Path;

use eqgrasp_core::graspgen::{object_library, GraspRecord, GripperModel, Label, ObjectModel, Scene};
use eqgrasp_core::pointcloud::PointCloud;
use nalgebra::Vector3;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::formats::{
    read_ply, read_text, records_from_text, records_to_text, scene_from_text, scene_to_text, write_bytes, write_ply,
    PlyEncoding,
};

pub const MANIFEST_VERSION: u32 = 1;

/// Label provenance written into every manifest.
pub const ORACLE_NOTE: &str = "geometric oracle (antipodal friction cones, aperture, clearance collision); \
no physics simulation of lifting or shaking";

#[derive(Clone, Debug, PartialEq)]
pub struct SceneEntry {
    pub id: String,
    /// Gripper the scene was generated for.
    pub gripper: String,
    pub scene: Scene,
    /// Scan in the world frame.
    pub cloud: PointCloud,
    pub records: Vec<GraspRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: Config,
    pub objects: Vec<ObjectModel>,
    pub grippers: Vec<GripperModel>,
    /// Object-frame records, grouped by object then gripper.
    pub object_grasps: Vec<GraspRecord>,
    pub scenes: Vec<SceneEntry>,
}

impl Dataset {
    pub fn gripper(&self, id: &str) -> Option<&GripperModel> {
        self.grippers.iter().find(|g| g.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&ObjectModel> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn manifest(&self) -> String {
        let mut s = format!("eqgrasp-dataset {MANIFEST_VERSION}\n");
        let _ = writeln!(s, "seed {}", self.config.seed);
        let _ = writeln!(s, "# labels: {ORACLE_NOTE}");
        let _ = writeln!(s, "friction_deg {}", self.config.gen.friction_deg);
        let _ = writeln!(s, "clearance {}", self.config.gen.clearance);
        for o in &self.objects {
            let _ = writeln!(s, "object {} {}", o.id, o.shape.family());
        }
        for g in &self.grippers {
            let v = |v: &Vector3<f64>| format!("{} {} {}", v.x, v.y, v.z);
            let _ = writeln!(
                s,
                "gripper {} {} {} {} {} {}",
                g.id,
                g.aperture,
                g.standoff,
                v(&g.closing),
                v(&g.approach),
                v(&g.grasp_center)
            );
        }
        for e in &self.scenes {
            let kind = if e.scene.bin.is_some() { "bin" } else { "table" };
            let _ = writeln!(s, "scene {} {} {} {kind}", e.id, e.gripper, e.scene.objects.len());
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_bytes(&dir.join("manifest.txt"), self.manifest().as_bytes())?;
        write_bytes(&dir.join("config.toml"), self.config.to_toml().as_bytes())?;
        for g in &self.grippers {
            for (tag, pts) in [("open", &g.open), ("closed", &g.closed)] {
                let cloud = PointCloud::new(pts.clone(), eqgrasp_core::pointcloud::Frame::Gripper);
                write_ply(&dir.join(format!("grippers/{}_{tag}.ply", g.id)), &cloud, PlyEncoding::BinaryLe)?;
            }
        }
        write_bytes(&dir.join("grasps/objects.txt"), records_to_text(&self.object_grasps)?.as_bytes())?;
        for e in &self.scenes {
            write_bytes(&dir.join(format!("scenes/{}.txt", e.id)), scene_to_text(&e.scene)?.as_bytes())?;
            write_ply(&dir.join(format!("scenes/{}.ply", e.id)), &e.cloud, PlyEncoding::BinaryLe)?;
            write_bytes(&dir.join(format!("grasps/{}.txt", e.id)), records_to_text(&e.records)?.as_bytes())?;
        }
        write_bytes(&dir.join("stats.txt"), crate::pipeline::stats::report(self).as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.txt");
        let manifest = read_text(&manifest_path)?;
        let config = Config::load(&dir.join("config.toml"), &[])?;
        let library = object_library();
        let mut lines = manifest.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let bad = |line: usize, msg: String| Error::Parse {
            path: manifest_path.clone(),
            line: line + 1,
            msg,
        };
        match lines.next() {
            Some((_, l)) if l.trim() == format!("eqgrasp-dataset {MANIFEST_VERSION}") => {}
            Some((i, l)) => return Err(bad(i, format!("unsupported manifest header `{l}`"))),
            None => return Err(bad(0, "empty manifest".into())),
        }
        let mut objects = Vec::new();
        let mut grippers = Vec::new();
        let mut scene_ids = Vec::new();
        for (i, l) in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            match t[0] {
                "seed" | "friction_deg" | "clearance" => {}
                "object" if t.len() == 3 => {
                    let o = library
                        .iter()
                        .find(|o| o.id == t[1])
                        .ok_or_else(|| bad(i, format!("unknown object `{}`", t[1])))?;
                    objects.push(o.clone());
                }
                "gripper" if t.len() == 13 => {
                    let f: std::result::Result<Vec<f64>, _> = t[2..].iter().map(|v| v.parse::<f64>()).collect();
                    let f = f.map_err(|_| bad(i, "bad gripper number".into()))?;
                    let v = |k: usize| Vector3::new(f[k], f[k + 1], f[k + 2]);
                    let open = read_ply(&dir.join(format!("grippers/{}_open.ply", t[1])))?;
                    let closed = read_ply(&dir.join(format!("grippers/{}_closed.ply", t[1])))?;
                    let g = GripperModel {
                        id: t[1].to_string(),
                        open: open.points,
                        closed: closed.points,
                        aperture: f[0],
                        standoff: f[1],
                        closing: v(2),
                        approach: v(5),
                        grasp_center: v(8),
                    };
                    g.validate()?;
                    grippers.push(g);
                }
                "scene" if t.len() == 5 => scene_ids.push((t[1].to_string(), t[2].to_string())),
                _ => return Err(bad(i, format!("unexpected manifest entry `{l}`"))),
            }
        }
        let objects_path = dir.join("grasps/objects.txt");
        let object_grasps = records_from_text(&objects_path, &read_text(&objects_path)?)?;
        let lookup = |id: &str| library.iter().find(|o| o.id == id).cloned();
        let scenes = scene_ids
            .into_iter()
            .map(|(id, gripper)| {
                let sp = dir.join(format!("scenes/{id}.txt"));
                let rp = dir.join(format!("grasps/{id}.txt"));
                Ok(SceneEntry {
                    scene: scene_from_text(&sp, &read_text(&sp)?, lookup)?,
                    cloud: read_ply(&dir.join(format!("scenes/{id}.ply")))?,
                    records: records_from_text(&rp, &read_text(&rp)?)?,
                    id,
                    gripper,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            objects,
            grippers,
            object_grasps,
            scenes,
        })
    }

    /// Valid scene records per instance of `entry`.
    pub fn valid_counts(entry: &SceneEntry) -> Vec<usize> {
        entry
            .scene
            .objects
            .iter()
            .map(|o| {
                entry
                    .records
                    .iter()
                    .filter(|r| r.object == o.instance && r.label == Label::Valid)
                    .count()
            })
            .collect()
    }
}
