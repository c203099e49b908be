//! Clearance queries of gripper points against a labelled scene cloud.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::math;

/// Uniform voxel hash over scene points, each tagged with the object that
/// owns it (`None` for static geometry).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CollisionIndex {
    cell: f64,
    points: Vec<Vector3<f64>>,
    owners: Vec<Option<usize>>,
    cells: BTreeMap<[i64; 3], Vec<u32>>,
}

impl CollisionIndex {
    pub const DEFAULT_CELL: f64 = 0.005;

    pub fn new(points: Vec<Vector3<f64>>, owners: Vec<Option<usize>>, cell: f64) -> Self {
        assert_eq!(points.len(), owners.len());
        let cell = if cell > 0.0 { cell } else { Self::DEFAULT_CELL };
        let mut cells: BTreeMap<[i64; 3], Vec<u32>> = BTreeMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(key(p, cell)).or_default().push(i as u32);
        }
        Self {
            cell,
            points,
            owners,
            cells,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn owners(&self) -> &[Option<usize>] {
        &self.owners
    }

    /// Whether some indexed point not owned by `exclude` lies within
    /// `clearance` of `q`.
    pub fn near(&self, q: &Vector3<f64>, exclude: Option<usize>, clearance: f64) -> bool {
        let reach = math::ceil(clearance / self.cell) as i64;
        let c = key(q, self.cell);
        let r2 = clearance * clearance;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    let Some(list) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    for &i in list {
                        let i = i as usize;
                        if exclude.is_some() && self.owners[i] == exclude {
                            continue;
                        }
                        if (self.points[i] - q).norm_squared() <= r2 {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

fn key(p: &Vector3<f64>, cell: f64) -> [i64; 3] {
    [
        math::floor(p.x / cell) as i64,
        math::floor(p.y / cell) as i64,
        math::floor(p.z / cell) as i64,
    ]
}

/// True iff any gripper point is within `clearance` of a scene point not
/// owned by `exclude`.
pub fn collision_check(gripper: &[Vector3<f64>], scene: &CollisionIndex, exclude: Option<usize>, clearance: f64) -> bool {
    gripper.iter().any(|q| scene.near(q, exclude, clearance))
}

/// Quadratic reference for [`collision_check`].
pub fn collision_check_brute_force(
    gripper: &[Vector3<f64>],
    points: &[Vector3<f64>],
    owners: &[Option<usize>],
    exclude: Option<usize>,
    clearance: f64,
) -> bool {
    let r2 = clearance * clearance;
    gripper.iter().any(|q| {
        points
            .iter()
            .zip(owners)
            .any(|(p, o)| !(exclude.is_some() && *o == exclude) && (p - q).norm_squared() <= r2)
    })
}
