//! Dataset statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use eqgrasp_core::graspgen::Label;

use crate::dataset::Dataset;

/// `hist[k]` = number of objects that exactly `k` grippers grasp validly at
/// least once (object-frame records).
pub fn graspability(ds: &Dataset) -> Vec<usize> {
    let mut hist = vec![0; ds.grippers.len() + 1];
    for o in &ds.objects {
        let k = ds
            .grippers
            .iter()
            .filter(|g| {
                ds.object_grasps
                    .iter()
                    .any(|r| r.object == o.id && r.gripper == g.id && r.label == Label::Valid)
            })
            .count();
        hist[k] += 1;
    }
    hist
}

const WIDTH_BINS: usize = 10;

pub fn report(ds: &Dataset) -> String {
    let mut s = String::from("eqgrasp-stats 1\n");
    let _ = writeln!(s, "objects {} grippers {} scenes {}", ds.objects.len(), ds.grippers.len(), ds.scenes.len());
    for (k, n) in graspability(ds).iter().enumerate() {
        let _ = writeln!(s, "graspability grippers={k} objects={n}");
    }
    for o in &ds.objects {
        for g in &ds.grippers {
            let n = ds
                .object_grasps
                .iter()
                .filter(|r| r.object == o.id && r.gripper == g.id && r.label == Label::Valid)
                .count();
            let _ = writeln!(s, "pair object={} gripper={} valid={n}", o.id, g.id);
        }
    }
    for g in &ds.grippers {
        let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
        let mut widths = vec![0usize; WIDTH_BINS];
        let mut max_width: f64 = 0.0;
        for r in ds.scenes.iter().flat_map(|e| &e.records).filter(|r| r.gripper == g.id) {
            *labels.entry(r.label.as_str()).or_default() += 1;
            if r.label == Label::Valid {
                max_width = max_width.max(r.width);
                let b = ((r.width / g.aperture) * WIDTH_BINS as f64) as usize;
                widths[b.min(WIDTH_BINS - 1)] += 1;
            }
        }
        let counts: Vec<String> = [Label::Valid, Label::Collision, Label::Unreachable, Label::Unstable]
            .iter()
            .map(|l| format!("{}={}", l.as_str(), labels.get(l.as_str()).copied().unwrap_or(0)))
            .collect();
        let _ = writeln!(s, "labels gripper={} {}", g.id, counts.join(" "));
        let bins: Vec<String> = widths.iter().map(usize::to_string).collect();
        let _ = writeln!(
            s,
            "widths gripper={} aperture={} max_valid={} bins={}",
            g.id,
            g.aperture,
            max_width,
            bins.join(",")
        );
    }
    let mut sizes = [0usize; 13];
    for e in &ds.scenes {
        sizes[e.scene.objects.len().min(12)] += 1;
    }
    let sizes: Vec<String> = sizes[1..].iter().map(usize::to_string).collect();
    let _ = writeln!(s, "scene_sizes 1..12 {}", sizes.join(","));
    s
}

pub fn cmd_stats(data_dir: &std::path::Path) -> crate::Result<String> {
    Ok(report(&Dataset::read(data_dir)?))
}
