//! Gripper models: open and closed clouds plus the grasp frame.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;

use super::shape::{Primitive, Solid};
use crate::error::{invalid, Error, Result};
use crate::rng::{hash_str, StreamRng};
use crate::se3::{Pose, Rotation};

/// Gripper described in its own frame.
///
/// The grasp pose places `grasp_center` at the contact midpoint with
/// `closing` along the contact line. The stored pre-grasp pose is the grasp
/// pose moved back by `standoff` along `approach`.
#[derive(Clone, Debug, PartialEq)]
pub struct GripperModel {
    pub id: String,
    pub open: Vec<Vector3<f64>>,
    pub closed: Vec<Vector3<f64>>,
    pub closing: Vector3<f64>,
    pub approach: Vector3<f64>,
    pub aperture: f64,
    pub standoff: f64,
    pub grasp_center: Vector3<f64>,
}

impl GripperModel {
    pub fn validate(&self) -> Result<()> {
        if self.open.is_empty() || self.closed.is_empty() {
            return Err(Error::EmptyCloud(alloc::format!("gripper `{}`", self.id)));
        }
        if (self.closing.norm() - 1.0).abs() > 1e-6 || (self.approach.norm() - 1.0).abs() > 1e-6 {
            return Err(invalid("gripper axes must be unit vectors"));
        }
        if self.closing.dot(&self.approach).abs() > 1e-6 {
            return Err(invalid("closing axis must be orthogonal to the approach axis"));
        }
        if !(self.aperture > 0.0) || !(self.standoff >= 0.0) {
            return Err(invalid("aperture must be positive and standoff non-negative"));
        }
        Ok(())
    }

    /// Rotation taking the gripper closing axis to `d` and the approach axis
    /// to `approach` (both unit, orthogonal).
    pub fn orientation(&self, d: &Vector3<f64>, approach: &Vector3<f64>) -> Rotation {
        let local = Matrix3::from_columns(&[self.closing, self.approach, self.closing.cross(&self.approach)]);
        let world = Matrix3::from_columns(&[*d, *approach, d.cross(approach)]);
        Rotation::from_matrix(&(world * local.transpose()))
    }

    /// Grasp pose from a pre-grasp pose.
    pub fn grasp_pose(&self, pre: &Pose) -> Pose {
        Pose::new(pre.rotation, pre.translation + pre.rotation.apply(&self.approach) * self.standoff)
    }

    pub fn pre_grasp_pose(&self, grasp: &Pose) -> Pose {
        Pose::new(grasp.rotation, grasp.translation - grasp.rotation.apply(&self.approach) * self.standoff)
    }
}

/// Target spacing of synthetic gripper clouds, meters.
const GRIPPER_SPACING: f64 = 0.003;

struct JawSpec {
    id: &'static str,
    aperture: f64,
    palm: Vector3<f64>,
    finger: Vector3<f64>,
    /// `(side, y)` of each finger: side -1 on the -x jaw, +1 on the +x jaw.
    fingers: &'static [(f64, f64)],
}

fn cloud(solid: &Solid, area: f64, seed: u64) -> Vec<Vector3<f64>> {
    let n = ((area / (GRIPPER_SPACING * GRIPPER_SPACING)) as usize).max(64);
    let mut rng = StreamRng::seed_from_u64(seed);
    solid.sample_boundary(n, &mut rng).into_iter().map(|(p, _)| p).collect()
}

fn box_area(s: &Vector3<f64>) -> f64 {
    2.0 * (s.x * s.y + s.y * s.z + s.x * s.z)
}

fn build(spec: &JawSpec) -> GripperModel {
    let palm = Solid::placed(
        Primitive::Cuboid { half: spec.palm / 2.0 },
        Pose::from_translation(Vector3::new(0.0, 0.0, -spec.palm.z / 2.0)),
    );
    let jaws = |gap: f64| {
        let mut parts = vec![palm.clone()];
        for &(side, y) in spec.fingers {
            let x = side * (gap / 2.0 + spec.finger.x / 2.0);
            parts.push(Solid::placed(
                Primitive::Cuboid { half: spec.finger / 2.0 },
                Pose::from_translation(Vector3::new(x, y, spec.finger.z / 2.0)),
            ));
        }
        Solid::Union(parts)
    };
    let area = box_area(&spec.palm) + spec.fingers.len() as f64 * box_area(&spec.finger);
    let seed = hash_str(spec.id);
    let depth = (spec.finger.z / 3.0).min(0.015);
    GripperModel {
        id: spec.id.into(),
        open: cloud(&jaws(spec.aperture), area, seed),
        closed: cloud(&jaws(0.006), area, seed ^ 1),
        closing: Vector3::x(),
        approach: Vector3::z(),
        aperture: spec.aperture,
        standoff: spec.finger.z + 0.02,
        grasp_center: Vector3::new(0.0, 0.0, spec.finger.z - depth),
    }
}

/// Parallel-jaw narrow and wide, three-finger, and wide-palm grippers.
pub fn gripper_library() -> Vec<GripperModel> {
    let v = Vector3::new;
    let specs = [
        JawSpec {
            id: "parallel_narrow",
            aperture: 0.07,
            palm: v(0.11, 0.03, 0.012),
            finger: v(0.01, 0.02, 0.05),
            fingers: &[(-1.0, 0.0), (1.0, 0.0)],
        },
        JawSpec {
            id: "parallel_wide",
            aperture: 0.11,
            palm: v(0.16, 0.035, 0.012),
            finger: v(0.012, 0.025, 0.06),
            fingers: &[(-1.0, 0.0), (1.0, 0.0)],
        },
        JawSpec {
            id: "three_finger",
            aperture: 0.09,
            palm: v(0.13, 0.08, 0.012),
            finger: v(0.012, 0.014, 0.055),
            fingers: &[(-1.0, 0.0), (1.0, -0.025), (1.0, 0.025)],
        },
        JawSpec {
            id: "wide_palm",
            aperture: 0.08,
            palm: v(0.13, 0.09, 0.015),
            finger: v(0.012, 0.06, 0.04),
            fingers: &[(-1.0, 0.0), (1.0, 0.0)],
        },
    ];
    specs.iter().map(build).collect()
}
