//! Gripper-conditioned SE(3) diffusion for grasp synthesis.
//!
//! This crate is `no_std` (with `alloc`) and holds every algorithm: Lie-group
//! arithmetic, the isotropic Gaussian on SO(3), forward/reverse diffusion on
//! SE(3), the equivariant feature algebra and score model, point-cloud
//! primitives, and grasp dataset generation. File formats, parallel drivers
//! and the command-line interface live in the `eqgrasp` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod math;
pub mod igso3;
pub mod se3;
pub mod rng;
pub mod diffusion;
pub mod equivariant;
pub mod pointcloud;
pub mod model;
pub mod graspgen;

pub use error::{Error, Result};
pub use se3::{Pose, Rotation, Twist};
