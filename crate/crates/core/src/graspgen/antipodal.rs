//! Antipodal grasp sampling.

use alloc::string::ToString;

use nalgebra::Vector3;
use rand::Rng;

use super::gripper::GripperModel;
use super::object::ObjectModel;
use super::oracle::{grasp_oracle, OracleConfig};
use super::scene::SceneIndex;
use super::shape::Solid;
use super::{GraspRecord, Label};
use crate::error::{invalid, Result};
use crate::math;
use crate::pointcloud::Frame;
use crate::se3::{Pose, Rotation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AntipodalConfig {
    /// Friction cone half-angle, degrees.
    pub friction_deg: f64,
    /// Half-angle of the cone around the inward normal that rays are cast
    /// in, degrees. Zero casts along the inward normal.
    pub ray_cone_deg: f64,
}

impl Default for AntipodalConfig {
    fn default() -> Self {
        Self {
            friction_deg: 10.0,
            ray_cone_deg: 0.0,
        }
    }
}

impl AntipodalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.friction_deg > 0.0 && self.friction_deg < 45.0) {
            return Err(invalid("friction angle must lie in (0, 45) degrees"));
        }
        if !(self.ray_cone_deg >= 0.0 && self.ray_cone_deg < 90.0) {
            return Err(invalid("ray cone must lie in [0, 90) degrees"));
        }
        Ok(())
    }
}

/// Two contacts with outward normals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contacts {
    pub c1: Vector3<f64>,
    pub n1: Vector3<f64>,
    pub c2: Vector3<f64>,
    pub n2: Vector3<f64>,
}

impl Contacts {
    pub fn width(&self) -> f64 {
        (self.c2 - self.c1).norm()
    }

    pub fn direction(&self) -> Vector3<f64> {
        (self.c2 - self.c1) / self.width()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rejection {
    /// The ray found no exit point.
    Miss,
    /// A contact normal lies outside its friction cone.
    Cone,
    Width,
    /// The gripper collides with the object itself.
    Collision,
}

pub type Attempt = core::result::Result<GraspRecord, Rejection>;

/// Uniform direction within `half_angle` of `axis`.
fn sample_cone<R: Rng + ?Sized>(axis: &Vector3<f64>, half_angle: f64, rng: &mut R) -> Vector3<f64> {
    if half_angle <= 0.0 {
        return *axis;
    }
    let cos_a = 1.0 - rng.random::<f64>() * (1.0 - math::cos(half_angle));
    let sin_a = math::sqrt((1.0 - cos_a * cos_a).max(0.0));
    let phi = rng.random::<f64>() * math::TAU;
    let u = math::any_orthogonal(axis);
    let v = axis.cross(&u);
    axis * cos_a + (u * math::cos(phi) + v * math::sin(phi)) * sin_a
}

/// Surface point, inward ray, exit point; the cone and width tests.
pub fn antipodal_candidate<R: Rng + ?Sized>(
    solid: &Solid,
    surface: (Vector3<f64>, Vector3<f64>),
    config: &AntipodalConfig,
    aperture: f64,
    rng: &mut R,
) -> core::result::Result<Contacts, Rejection> {
    let c1 = surface.0;
    let n1 = solid.normal(&c1);
    let ray = sample_cone(&-n1, config.ray_cone_deg.to_radians(), rng);
    let lift = 1e-7;
    let origin = c1 - ray * lift;
    let span = solid
        .spans(&origin, &ray)
        .into_iter()
        .find(|s| s.t1 > 2.0 * lift && s.t0 < 2.0 * lift)
        .ok_or(Rejection::Miss)?;
    let c2 = origin + ray * span.t1;
    let n2 = solid.normal(&c2);
    let contacts = Contacts { c1, n1, c2, n2 };
    let w = contacts.width();
    if !(w > 1e-6) {
        return Err(Rejection::Miss);
    }
    let d = contacts.direction();
    let cos_f = math::cos(config.friction_deg.to_radians());
    if n1.dot(&-d) < cos_f || n2.dot(&d) < cos_f {
        return Err(Rejection::Cone);
    }
    if w > aperture {
        return Err(Rejection::Width);
    }
    Ok(contacts)
}

/// Pre-grasp pose closing along the contact line, centred at the midpoint,
/// with the approach axis rolled by `roll` about the line.
pub fn grasp_from_contacts(contacts: &Contacts, gripper: &GripperModel, roll: f64) -> Pose {
    let d = contacts.direction();
    let a0 = math::any_orthogonal(&d);
    let approach = Rotation::from_axis_angle(&d, roll).apply(&a0);
    let r = gripper.orientation(&d, &approach);
    let mid = (contacts.c1 + contacts.c2) / 2.0;
    let grasp = Pose::new(r, mid - r.apply(&gripper.grasp_center));
    gripper.pre_grasp_pose(&grasp)
}

/// One antipodal attempt on an isolated object, in the object frame.
/// `isolated` indexes the object alone at the identity pose; an accepted
/// record is valid under [`grasp_oracle`] against it.
pub fn sample_antipodal<R: Rng + ?Sized>(
    object: &ObjectModel,
    gripper: &GripperModel,
    isolated: &SceneIndex,
    config: &AntipodalConfig,
    oracle: &OracleConfig,
    rng: &mut R,
) -> Result<Attempt> {
    config.validate()?;
    let surface = object.solid.sample_boundary(1, rng)[0];
    let contacts = match antipodal_candidate(&object.solid, surface, config, gripper.aperture, rng) {
        Ok(c) => c,
        Err(r) => return Ok(Err(r)),
    };
    let roll = rng.random::<f64>() * math::TAU;
    let record = GraspRecord {
        gripper: gripper.id.clone(),
        object: object.id.to_string(),
        pose: grasp_from_contacts(&contacts, gripper, roll),
        frame: Frame::Object,
        label: Label::Valid,
        contacts: [contacts.c1, contacts.c2],
        width: contacts.width(),
    };
    let label = grasp_oracle(&record, isolated, gripper, oracle)?;
    Ok(match label {
        Label::Valid => Ok(record),
        Label::Collision => Err(Rejection::Collision),
        Label::Unreachable => Err(Rejection::Width),
        Label::Unstable => Err(Rejection::Cone),
    })
}
