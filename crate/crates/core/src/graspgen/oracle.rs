//! Geometric grasp oracle.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::Vector3;

use super::gripper::GripperModel;
use super::scene::{Scene, SceneIndex};
use super::{GraspRecord, Label};
use crate::error::{invalid, Error, Result};
use crate::math;
use crate::pointcloud::Frame;
use crate::se3::Pose;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    /// Friction cone half-angle, degrees.
    pub friction_deg: f64,
    /// Gripper points closer than this to obstacles collide, meters.
    pub clearance: f64,
    /// Largest contact distance from the target surface and the closing line.
    pub contact_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            friction_deg: 10.0,
            clearance: 0.002,
            contact_tol: 1e-4,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.friction_deg > 0.0 && self.friction_deg < 45.0) {
            return Err(invalid("friction angle must lie in (0, 45) degrees"));
        }
        if !(self.clearance >= 0.0 && self.contact_tol > 0.0) {
            return Err(invalid("clearance must be non-negative and contact tolerance positive"));
        }
        Ok(())
    }
}

/// Target instance of a record: an exact instance id, or a model id shared
/// by exactly one object in the scene.
fn resolve(index: &SceneIndex, name: &str) -> Result<usize> {
    if let Some(i) = index.find(name) {
        return Ok(i);
    }
    let mut hits = index.models.iter().enumerate().filter(|(_, m)| *m == name);
    match (hits.next(), hits.next()) {
        (Some((i, _)), None) => Ok(i),
        _ => Err(Error::UnknownObject(name.to_string())),
    }
}

/// Label of a grasp record in the scene it is expressed in.
///
/// Checks run in order: contacts on the target surface and the closing line
/// inside their friction cones (else unstable); width within the aperture
/// (else unreachable); the open gripper at the pre-grasp pose clear of all
/// geometry, the open gripper at the grasp pose clear of non-target geometry
/// and outside the target, and the closed gripper clear of non-target
/// geometry (else collision).
pub fn grasp_oracle(record: &GraspRecord, index: &SceneIndex, gripper: &GripperModel, cfg: &OracleConfig) -> Result<Label> {
    cfg.validate()?;
    if record.gripper != gripper.id {
        return Err(invalid("record and gripper ids differ"));
    }
    let target = resolve(index, &record.object)?;
    let solid = &index.solids[target];
    let grasp = gripper.grasp_pose(&record.pose);
    let center = grasp.apply(&gripper.grasp_center);
    let axis = grasp.rotation.apply(&gripper.closing);
    let [c1, c2] = record.contacts;
    let width = (c2 - c1).norm();
    let off_line = |c: &Vector3<f64>| {
        let v = c - center;
        (v - axis * v.dot(&axis)).norm()
    };
    if !(width > 0.0)
        || record.contacts.iter().any(|c| math::abs(solid.sdf(c)) > cfg.contact_tol || off_line(c) > cfg.contact_tol)
    {
        return Ok(Label::Unstable);
    }
    let d = (c2 - c1) / width;
    let cos_f = math::cos(cfg.friction_deg.to_radians());
    if solid.normal(&c1).dot(&-d) < cos_f || solid.normal(&c2).dot(&d) < cos_f {
        return Ok(Label::Unstable);
    }
    if width > gripper.aperture {
        return Ok(Label::Unreachable);
    }
    let posed = |pose: &Pose, cloud: &[Vector3<f64>]| -> Vec<Vector3<f64>> { cloud.iter().map(|p| pose.apply(p)).collect() };
    if index.obstructed(&posed(&record.pose, &gripper.open), None, cfg.clearance) {
        return Ok(Label::Collision);
    }
    let open = posed(&grasp, &gripper.open);
    if open.iter().any(|p| solid.sdf(p) < 0.0) || index.obstructed(&open, Some(target), cfg.clearance) {
        return Ok(Label::Collision);
    }
    if index.obstructed(&posed(&grasp, &gripper.closed), Some(target), cfg.clearance) {
        return Ok(Label::Collision);
    }
    Ok(Label::Valid)
}

/// Oracle verdict for a bare pre-grasp pose.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseOutcome {
    pub label: Label,
    /// Object index the jaws close on, when the closing line finds one.
    pub object: Option<usize>,
    /// Labelled record, when contacts were found.
    pub record: Option<GraspRecord>,
}

/// Closes the jaws along the closing line through the grasp centre and
/// labels the resulting contacts.
///
/// The first entry and last exit along the line must belong to the same
/// object with nothing else between; a line starting or ending inside an
/// object collides, a line meeting nothing is unstable.
pub fn evaluate_pose(pre: &Pose, index: &SceneIndex, gripper: &GripperModel, cfg: &OracleConfig) -> Result<PoseOutcome> {
    cfg.validate()?;
    let grasp = gripper.grasp_pose(pre);
    let center = grasp.apply(&gripper.grasp_center);
    let axis = grasp.rotation.apply(&gripper.closing);
    let reach = gripper.aperture;
    let origin = center - axis * (reach / 2.0);
    let miss = |label| PoseOutcome {
        label,
        object: None,
        record: None,
    };
    let mut hits: Vec<(f64, f64, usize)> = Vec::new();
    for (i, s) in index.solids.iter().enumerate() {
        for span in s.spans(&origin, &axis) {
            if span.t1 <= 0.0 || span.t0 >= reach {
                continue;
            }
            if span.t0 <= 0.0 || span.t1 >= reach {
                return Ok(PoseOutcome {
                    label: Label::Collision,
                    object: Some(i),
                    record: None,
                });
            }
            hits.push((span.t0, span.t1, i));
        }
    }
    if hits.is_empty() {
        return Ok(miss(Label::Unstable));
    }
    let first = hits.iter().min_by(|a, b| a.0.total_cmp(&b.0)).copied().unwrap_or(hits[0]);
    let last = hits.iter().max_by(|a, b| a.1.total_cmp(&b.1)).copied().unwrap_or(hits[0]);
    if first.2 != last.2 || hits.iter().any(|h| h.2 != first.2) {
        return Ok(PoseOutcome {
            label: Label::Unstable,
            object: None,
            record: None,
        });
    }
    let target = first.2;
    let mut record = GraspRecord {
        gripper: gripper.id.clone(),
        object: index.instances[target].clone(),
        pose: *pre,
        frame: Frame::World,
        label: Label::Valid,
        contacts: [origin + axis * first.0, origin + axis * last.1],
        width: last.1 - first.0,
    };
    record.label = grasp_oracle(&record, index, gripper, cfg)?;
    Ok(PoseOutcome {
        label: record.label,
        object: Some(target),
        record: Some(record),
    })
}

/// Moves object-frame grasps onto object `instance` of `scene` and labels
/// them there. One output per input, in order.
pub fn transfer_grasps(
    grasps: &[GraspRecord],
    scene: &Scene,
    index: &SceneIndex,
    instance: usize,
    gripper: &GripperModel,
    cfg: &OracleConfig,
) -> Result<Vec<GraspRecord>> {
    let placed = scene
        .objects
        .get(instance)
        .ok_or_else(|| invalid("object index out of range"))?;
    grasps
        .iter()
        .map(|g| {
            if g.object != placed.model.id {
                return Err(Error::UnknownObject(g.object.clone()));
            }
            let mut r = g.transformed(&placed.pose, Frame::World);
            r.object = placed.instance.clone();
            r.label = grasp_oracle(&r, index, gripper, cfg)?;
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graspgen::{
        antipodal_candidate, generate_heap, gripper_library, object_library, sample_antipodal, AntipodalConfig, Bin,
        HeapConfig, ObjectModel, PlacedObject, Primitive, Rejection, Shape, Solid,
    };
    use crate::se3::sample_uniform_rotation;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn valid_grasps(object: &ObjectModel, gripper: &GripperModel, n: usize, rng: &mut ChaCha8Rng) -> Vec<GraspRecord> {
        let index = Scene::isolated(object).index();
        let (a, o) = (AntipodalConfig::default(), OracleConfig::default());
        let mut out = Vec::new();
        for _ in 0..50 * n {
            if let Ok(r) = sample_antipodal(object, gripper, &index, &a, &o, rng).unwrap() {
                out.push(r);
                if out.len() == n {
                    break;
                }
            }
        }
        out
    }

    #[test]
    fn sphere_chords_pass_through_the_center() {
        let s = Solid::primitive(Primitive::Sphere { radius: 1.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for surface in s.sample_boundary(500, &mut rng) {
            let c = antipodal_candidate(&s, surface, &AntipodalConfig::default(), 2.5, &mut rng).unwrap();
            assert!(c.c1.cross(&c.direction()).norm() < 1e-6);
            assert!((c.c1 + c.c2).norm() < 1e-6);
        }
    }

    #[test]
    fn long_box_is_grasped_across_its_sides() {
        let s = Shape::Cuboid { size: Vector3::new(0.04, 0.04, 0.3) }.solid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let mut ok = 0;
        for surface in s.sample_boundary(n, &mut rng) {
            match antipodal_candidate(&s, surface, &AntipodalConfig::default(), 0.08, &mut rng) {
                Ok(c) => {
                    assert!((c.width() - 0.04).abs() < 1e-9);
                    assert!(c.n1.dot(&c.n2) < -1.0 + 1e-9);
                    ok += 1;
                }
                Err(r) => assert_eq!(r, Rejection::Width),
            }
        }
        // only the square end caps are too wide
        let expected = 0.048 / 0.0512;
        assert!((ok as f64 / n as f64 - expected).abs() < 0.01);
    }

    #[test]
    fn cone_acceptance_rate_matches_chord_geometry() {
        // sphere radius r, rays within psi of the inward normal, friction theta:
        // a ray at angle a has chord 2 r cos a and both contact angles equal a
        let (r, psi, theta, aperture) = (0.03f64, 20f64.to_radians(), 10f64.to_radians(), 0.0595);
        let s = Solid::primitive(Primitive::Sphere { radius: r });
        let cfg = AntipodalConfig { friction_deg: 10.0, ray_cone_deg: 20.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let sampled = s
            .sample_boundary(n, &mut rng)
            .into_iter()
            .filter(|&p| antipodal_candidate(&s, p, &cfg, aperture, &mut rng).is_ok())
            .count() as f64
            / n as f64;
        let brute = (0..n)
            .filter(|_| {
                let cos_a = 1.0 - rng.random::<f64>() * (1.0 - psi.cos());
                cos_a >= theta.cos() && 2.0 * r * cos_a <= aperture
            })
            .count() as f64
            / n as f64;
        let exact = ((aperture / (2.0 * r)) - theta.cos()) / (1.0 - psi.cos());
        assert!((sampled - brute).abs() < 0.02, "{sampled} {brute}");
        assert!((brute - exact).abs() < 0.02);
    }

    #[test]
    fn sampled_grasps_are_valid_and_reproducible() {
        let objects = object_library();
        let grippers = gripper_library();
        let cfg = OracleConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for o in &objects {
            let index = Scene::isolated(o).index();
            let mut any = false;
            for g in &grippers {
                let grasps = valid_grasps(o, g, 5, &mut rng);
                any |= !grasps.is_empty();
                for r in &grasps {
                    assert_eq!(grasp_oracle(r, &index, g, &cfg).unwrap(), Label::Valid);
                    assert!(r.width <= g.aperture);
                    let eval = evaluate_pose(&r.pose, &index, g, &cfg).unwrap();
                    assert_eq!(eval.object, Some(0));
                }
            }
            assert!(any, "{}", o.id);
        }
    }

    fn grasp_on_box() -> (ObjectModel, GripperModel, GraspRecord) {
        let o = object_library().into_iter().find(|o| o.id == "box_s").unwrap();
        let g = gripper_library().remove(0);
        let r = valid_grasps(&o, &g, 1, &mut ChaCha8Rng::seed_from_u64(4)).remove(0);
        (o, g, r)
    }

    #[test]
    fn walls_and_neighbours_block_grasps() {
        let (o, g, r) = grasp_on_box();
        let cfg = OracleConfig::default();
        let mut scene = Scene::isolated(&o);
        let world = r.transformed(&Pose::identity(), Frame::World);
        assert_eq!(grasp_oracle(&world, &scene.index(), &g, &cfg).unwrap(), Label::Valid);

        // a wall through the palm at the pre-grasp pose
        let palm = r.pose.apply(&Vector3::new(0.0, 0.0, -0.005));
        let bin = Bin { inner: Vector3::new(0.3, 0.3, 0.2), wall: 0.01, pose: Pose::identity() };
        let local = bin.walls()[0].sdf(&Vector3::zeros());
        assert!(local > 0.0);
        let wall_center = Vector3::new(-(bin.inner.x + bin.wall) / 2.0, 0.0, bin.inner.z / 2.0);
        scene.bin = Some(Bin { pose: Pose::from_translation(palm - wall_center), ..bin });
        assert_eq!(grasp_oracle(&world, &scene.index(), &g, &cfg).unwrap(), Label::Collision);

        // a neighbour sitting on the contact line outside the jaws
        let mut scene = Scene::isolated(&o);
        let gp = g.grasp_pose(&r.pose);
        let finger = gp.apply(&Vector3::new(g.aperture / 2.0 + 0.02, 0.0, g.grasp_center.z));
        let ball = ObjectModel::new("ball", Shape::Sphere { radius: 0.015 }).unwrap();
        scene.objects.push(PlacedObject { instance: "ball#1".into(), model: ball, pose: Pose::from_translation(finger) });
        let index = scene.index();
        assert_eq!(grasp_oracle(&world, &index, &g, &cfg).unwrap(), Label::Collision);
        let moved = transfer_grasps(&[r.clone()], &scene, &index, 0, &g, &cfg).unwrap();
        assert_eq!(moved[0].label, Label::Collision);
        assert!(transfer_grasps(&[r], &scene, &index, 1, &g, &cfg).is_err());
    }

    #[test]
    fn bad_contacts_and_width() {
        let (o, g, r) = grasp_on_box();
        let index = Scene::isolated(&o).index();
        let cfg = OracleConfig::default();
        let mut off = r.clone();
        off.contacts[0] += Vector3::new(0.0, 0.0, 1e-3);
        assert_eq!(grasp_oracle(&off, &index, &g, &cfg).unwrap(), Label::Unstable);
        let mut narrow = g.clone();
        narrow.aperture = r.width * 0.9;
        assert_eq!(grasp_oracle(&r, &index, &narrow, &cfg).unwrap(), Label::Unreachable);
        let mut missing = r;
        missing.object = "nothing".into();
        assert!(matches!(grasp_oracle(&missing, &index, &g, &cfg), Err(Error::UnknownObject(_))));
    }

    #[test]
    fn labels_are_invariant_under_rigid_motion() {
        let lib = object_library();
        let grippers = gripper_library();
        let cfg = OracleConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scene = generate_heap(&lib, &HeapConfig { count: 4, ..HeapConfig::default() }, &mut rng).unwrap();
        let index = scene.index();
        let mut cases = Vec::new();
        for (i, placed) in scene.objects.iter().enumerate() {
            for g in &grippers[..2] {
                let local = valid_grasps(&placed.model, g, 2, &mut rng);
                for r in transfer_grasps(&local, &scene, &index, i, g, &cfg).unwrap() {
                    cases.push((r, g));
                }
            }
        }
        assert!(cases.len() >= 10);
        let mut labels = vec![0usize; 4];
        let mut checked = 0;
        while checked < 1000 {
            let t = Pose::new(
                sample_uniform_rotation(&mut rng),
                Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            );
            let moved = scene.transformed(&t).index();
            for (r, g) in &cases {
                let a = grasp_oracle(r, &index, g, &cfg).unwrap();
                let b = grasp_oracle(&r.transformed(&t, Frame::World), &moved, g, &cfg).unwrap();
                assert_eq!(a, b);
                labels[a as usize] += 1;
                checked += 1;
            }
        }
        assert!(labels[Label::Valid as usize] > 0 && labels[Label::Collision as usize] > 0, "{labels:?}");
    }
}
