//! Object models and the shipped parametric library.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::SeedableRng;

use super::shape::{Shape, Solid};
use crate::error::Result;
use crate::math;
use crate::rng::{hash_str, StreamRng};

/// Target spacing of object surface clouds, meters.
pub const SURFACE_SPACING: f64 = 0.0025;

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectModel {
    pub id: String,
    pub shape: Shape,
    pub solid: Solid,
    /// Dense boundary samples in the object frame.
    pub cloud: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub center_of_mass: Vector3<f64>,
}

impl ObjectModel {
    pub fn new(id: impl Into<String>, shape: Shape) -> Result<Self> {
        shape.validate()?;
        let id = id.into();
        let solid = shape.solid();
        let n = (shape.area() / (SURFACE_SPACING * SURFACE_SPACING)) as usize;
        let mut rng = StreamRng::seed_from_u64(hash_str(&id));
        let (cloud, normals) = solid.sample_boundary(n.clamp(400, 20_000), &mut rng).into_iter().unzip();
        let center_of_mass = volume_centroid(&solid);
        Ok(Self {
            id,
            shape,
            solid,
            cloud,
            normals,
            center_of_mass,
        })
    }

    /// Lower and upper corners of the object-frame bounding box.
    pub fn extent(&self) -> (Vector3<f64>, Vector3<f64>) {
        let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
        let hi = Vector3::from_fn(|i, _| self.solid.support(&axes[i]));
        let lo = Vector3::from_fn(|i, _| -self.solid.support(&-axes[i]));
        (lo, hi)
    }
}

/// Midpoint-rule centroid over a 32^3 grid of the bounding box.
fn volume_centroid(solid: &Solid) -> Vector3<f64> {
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let hi = Vector3::from_fn(|i, _| solid.support(&axes[i]));
    let lo = Vector3::from_fn(|i, _| -solid.support(&-axes[i]));
    let n = 32;
    let step = (hi - lo) / n as f64;
    let mut sum = Vector3::zeros();
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = lo + Vector3::new(
                    (i as f64 + 0.5) * step.x,
                    (j as f64 + 0.5) * step.y,
                    (k as f64 + 0.5) * step.z,
                );
                if solid.sdf(&p) < 0.0 {
                    sum += p;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        (lo + hi) / 2.0
    } else {
        sum / count as f64
    }
}

/// Two sizes of each of the six families.
pub fn object_library() -> Vec<ObjectModel> {
    let v = Vector3::new;
    let shapes = [
        ("sphere_s", Shape::Sphere { radius: 0.025 }),
        ("sphere_l", Shape::Sphere { radius: 0.035 }),
        ("box_s", Shape::Cuboid { size: v(0.04, 0.05, 0.06) }),
        ("box_l", Shape::Cuboid { size: v(0.05, 0.07, 0.1) }),
        ("cylinder_s", Shape::Cylinder { radius: 0.02, height: 0.08 }),
        ("cylinder_l", Shape::Cylinder { radius: 0.03, height: 0.11 }),
        ("tube_s", Shape::Tube { outer: 0.025, inner: 0.02, height: 0.06 }),
        ("tube_l", Shape::Tube { outer: 0.035, inner: 0.028, height: 0.1 }),
        ("lshape_s", Shape::LShape { length_x: 0.07, length_z: 0.05, thickness: 0.02, depth: 0.03 }),
        ("lshape_l", Shape::LShape { length_x: 0.1, length_z: 0.07, thickness: 0.025, depth: 0.04 }),
        ("capsule_s", Shape::Capsule { radius: 0.018, length: 0.04 }),
        ("capsule_l", Shape::Capsule { radius: 0.025, length: 0.06 }),
    ];
    shapes
        .iter()
        .map(|(id, s)| ObjectModel::new(id.to_string(), *s).expect("library shapes are valid"))
        .collect()
}

/// Upper bound on the horizontal distance from the solid's origin to its
/// surface.
pub(crate) fn planar_radius(solid: &Solid) -> f64 {
    let mut r: f64 = 0.0;
    for k in 0..16 {
        let a = math::TAU * k as f64 / 16.0;
        r = r.max(solid.support(&Vector3::new(math::cos(a), math::sin(a), 0.0)));
    }
    r / math::cos(math::PI / 16.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_is_deterministic_and_well_formed() {
        let a = object_library();
        assert_eq!(a, object_library());
        assert_eq!(a.len(), 12);
        let families: alloc::collections::BTreeSet<_> = a.iter().map(|o| o.shape.family()).collect();
        assert_eq!(families.len(), 6);
        for o in &a {
            assert!(o.cloud.len() >= 400);
            assert!(o.solid.sdf(&o.center_of_mass) < 0.0 || o.shape.family() == "tube" || o.shape.family() == "lshape");
            let (lo, hi) = o.extent();
            assert!(o.cloud.iter().all(|p| (0..3).all(|i| p[i] >= lo[i] - 1e-12 && p[i] <= hi[i] + 1e-12)));
        }
        let sphere = &a[0];
        assert!(sphere.center_of_mass.norm() < 1e-3);
    }
}
