//! Multi-gripper grasp dataset generation.
//!
//! Objects are parametric solids with exact ray casting. Grasps are sampled
//! antipodally per object and gripper, labelled by a geometric oracle,
//! and transferred into cluttered heap or bin scenes where they are labelled
//! again against the surrounding geometry.

mod antipodal;
mod collision;
mod gripper;
mod object;
mod oracle;
mod scene;
mod shape;

use alloc::string::String;

use nalgebra::Vector3;

use crate::error::{invalid, Result};
use crate::pointcloud::Frame;
use crate::se3::Pose;

pub use antipodal::{antipodal_candidate, grasp_from_contacts, sample_antipodal, AntipodalConfig, Attempt, Contacts, Rejection};
pub use collision::{collision_check, collision_check_brute_force, CollisionIndex};
pub use gripper::{gripper_library, GripperModel};
pub use object::{object_library, ObjectModel, SURFACE_SPACING};
pub use oracle::{evaluate_pose, grasp_oracle, transfer_grasps, OracleConfig, PoseOutcome};
pub use scene::{generate_heap, interpenetration, Bin, HeapConfig, PlacedObject, Plane, Scene, SceneIndex};
pub use shape::{Primitive, Shape, Solid, Span};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Valid,
    Collision,
    Unreachable,
    Unstable,
}

impl Label {
    pub const fn as_str(&self) -> &'static str {
        match self {
            Label::Valid => "valid",
            Label::Collision => "collision",
            Label::Unreachable => "unreachable",
            Label::Unstable => "unstable",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "valid" => Ok(Label::Valid),
            "collision" => Ok(Label::Collision),
            "unreachable" => Ok(Label::Unreachable),
            "unstable" => Ok(Label::Unstable),
            _ => Err(invalid(alloc::format!("unknown grasp label `{s}`"))),
        }
    }
}

/// A labelled pre-grasp pose with its contacts.
#[derive(Clone, Debug, PartialEq)]
pub struct GraspRecord {
    pub gripper: String,
    pub object: String,
    /// Pre-grasp pose of the gripper frame.
    pub pose: Pose,
    /// Frame `pose` and `contacts` are expressed in: object or world (scene).
    pub frame: Frame,
    pub label: Label,
    pub contacts: [Vector3<f64>; 2],
    pub width: f64,
}

impl GraspRecord {
    pub fn transformed(&self, t: &Pose, frame: Frame) -> Self {
        Self {
            pose: t.compose(&self.pose),
            frame,
            contacts: [t.apply(&self.contacts[0]), t.apply(&self.contacts[1])],
            ..self.clone()
        }
    }
}
