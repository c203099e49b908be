//! Heap and bin scenes.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};

use super::collision::{collision_check, CollisionIndex};
use super::object::{planar_radius, ObjectModel};
use super::shape::{Primitive, Solid};
use crate::error::{invalid, Error, Result};
use crate::math;
use crate::pointcloud::SurfaceSampler;
use crate::rng::StreamRng;
use crate::se3::{Pose, Rotation};

/// Object instance placed in a scene.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacedObject {
    /// Unique within the scene: `<model id>#<k>`.
    pub instance: String,
    pub model: ObjectModel,
    pub pose: Pose,
}

impl PlacedObject {
    pub fn solid(&self) -> Solid {
        self.model.solid.transformed(&self.pose)
    }

    pub fn cloud(&self) -> Vec<Vector3<f64>> {
        self.model.cloud.iter().map(|p| self.pose.apply(p)).collect()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.pose.apply(&self.model.center_of_mass)
    }
}

/// Half-space `normal . x <= offset` is solid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn ground() -> Self {
        Self {
            normal: Vector3::z(),
            offset: 0.0,
        }
    }

    pub fn height(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn transformed(&self, t: &Pose) -> Self {
        let normal = t.rotation.apply(&self.normal);
        Self {
            normal,
            offset: self.offset + normal.dot(&t.translation),
        }
    }
}

/// Open-top box standing on the support plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bin {
    /// Inner length, width and wall height.
    pub inner: Vector3<f64>,
    pub wall: f64,
    pub pose: Pose,
}

impl Bin {
    pub fn walls(&self) -> Vec<Solid> {
        let (x, y, h, w) = (self.inner.x, self.inner.y, self.inner.z, self.wall);
        let slab = |size: Vector3<f64>, at: Vector3<f64>| {
            Solid::placed(Primitive::Cuboid { half: size / 2.0 }, self.pose.compose(&Pose::from_translation(at)))
        };
        vec![
            slab(Vector3::new(w, y + 2.0 * w, h), Vector3::new(-(x + w) / 2.0, 0.0, h / 2.0)),
            slab(Vector3::new(w, y + 2.0 * w, h), Vector3::new((x + w) / 2.0, 0.0, h / 2.0)),
            slab(Vector3::new(x, w, h), Vector3::new(0.0, -(y + w) / 2.0, h / 2.0)),
            slab(Vector3::new(x, w, h), Vector3::new(0.0, (y + w) / 2.0, h / 2.0)),
        ]
    }

    /// Whether `p` lies over the inner footprint.
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let q = self.pose.inverse().apply(p);
        math::abs(q.x) <= self.inner.x / 2.0 && math::abs(q.y) <= self.inner.y / 2.0
    }

    fn wall_area(&self) -> f64 {
        let (x, y, h, w) = (self.inner.x, self.inner.y, self.inner.z, self.wall);
        let a = |s: Vector3<f64>| 2.0 * (s.x * s.y + s.y * s.z + s.x * s.z);
        2.0 * a(Vector3::new(w, y + 2.0 * w, h)) + 2.0 * a(Vector3::new(x, w, h))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub objects: Vec<PlacedObject>,
    pub support: Option<Plane>,
    pub bin: Option<Bin>,
    /// Half-size of the square table patch drawn in scans.
    pub table_half_extent: f64,
}

/// Wall cloud spacing; walls are also tested exactly by their solids.
const WALL_SPACING: f64 = 0.005;

impl Scene {
    /// `model` alone at the identity pose, floating.
    pub fn isolated(model: &ObjectModel) -> Self {
        Self {
            objects: vec![PlacedObject {
                instance: format!("{}#0", model.id),
                model: model.clone(),
                pose: Pose::identity(),
            }],
            support: None,
            bin: None,
            table_half_extent: 0.0,
        }
    }

    pub fn find(&self, instance: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.instance == instance)
    }

    pub fn transformed(&self, t: &Pose) -> Self {
        Self {
            objects: self
                .objects
                .iter()
                .map(|o| PlacedObject {
                    pose: t.compose(&o.pose),
                    ..o.clone()
                })
                .collect(),
            support: self.support.map(|p| p.transformed(t)),
            bin: self.bin.map(|b| Bin {
                pose: t.compose(&b.pose),
                ..b
            }),
            table_half_extent: self.table_half_extent,
        }
    }

    /// The scene without object `i`; nothing else moves.
    pub fn without(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.objects.remove(i);
        s
    }

    fn wall_cloud(&self) -> Vec<Vector3<f64>> {
        let Some(bin) = &self.bin else {
            return Vec::new();
        };
        // sampled in the bin frame so that the cloud moves rigidly with it
        let local = Bin {
            pose: Pose::identity(),
            ..*bin
        };
        let n = (bin.wall_area() / (WALL_SPACING * WALL_SPACING)) as usize;
        let mut rng = StreamRng::seed_from_u64(0x5eed_b1);
        let walls = Solid::Union(local.walls());
        walls
            .sample_boundary(n, &mut rng)
            .into_iter()
            .map(|(p, _)| bin.pose.apply(&p))
            .collect()
    }

    pub fn index(&self) -> SceneIndex {
        let mut points = Vec::new();
        let mut owners = Vec::new();
        for (i, o) in self.objects.iter().enumerate() {
            let c = o.cloud();
            owners.extend(core::iter::repeat_n(Some(i), c.len()));
            points.extend(c);
        }
        let walls = self.wall_cloud();
        owners.extend(core::iter::repeat_n(None, walls.len()));
        points.extend(walls);
        SceneIndex {
            instances: self.objects.iter().map(|o| o.instance.clone()).collect(),
            models: self.objects.iter().map(|o| o.model.id.clone()).collect(),
            poses: self.objects.iter().map(|o| o.pose).collect(),
            solids: self.objects.iter().map(PlacedObject::solid).collect(),
            walls: self.bin.map(|b| b.walls()).unwrap_or_default(),
            support: self.support,
            cloud: CollisionIndex::new(points, owners, CollisionIndex::DEFAULT_CELL),
        }
    }
}

/// Everything the grasp oracle queries, prepared once per scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneIndex {
    pub instances: Vec<String>,
    pub models: Vec<String>,
    pub poses: Vec<Pose>,
    pub solids: Vec<Solid>,
    pub walls: Vec<Solid>,
    pub support: Option<Plane>,
    pub cloud: CollisionIndex,
}

impl SceneIndex {
    pub fn find(&self, instance: &str) -> Option<usize> {
        self.instances.iter().position(|i| i == instance)
    }

    /// Whether gripper points come within `clearance` of scene geometry other
    /// than object `exclude`, or penetrate it.
    pub fn obstructed(&self, points: &[Vector3<f64>], exclude: Option<usize>, clearance: f64) -> bool {
        if let Some(plane) = &self.support {
            if points.iter().any(|p| plane.height(p) < clearance) {
                return true;
            }
        }
        if collision_check(points, &self.cloud, exclude, clearance) {
            return true;
        }
        let inside = |s: &Solid| points.iter().any(|p| s.sdf(p) < 0.0);
        self.walls.iter().any(inside)
            || self
                .solids
                .iter()
                .enumerate()
                .any(|(i, s)| Some(i) != exclude && inside(s))
    }
}

/// Largest depth of either point set inside the other solid; the collision
/// proxy for object pairs.
pub fn interpenetration(a: &PlacedObject, b: &PlacedObject) -> f64 {
    depth(&a.cloud(), &b.solid()).max(depth(&b.cloud(), &a.solid()))
}

fn depth(points: &[Vector3<f64>], solid: &Solid) -> f64 {
    points.iter().map(|p| -solid.sdf(p)).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeapConfig {
    /// Objects to place, `1..=12`.
    pub count: usize,
    /// Half-size of the square drop region on the table.
    pub half_extent: f64,
    pub bin: bool,
    pub max_attempts: usize,
    pub max_tilt_deg: f64,
    /// Largest allowed interpenetration by the proxy, meters.
    pub tolerance: f64,
}

impl Default for HeapConfig {
    fn default() -> Self {
        Self {
            count: 6,
            half_extent: 0.15,
            bin: false,
            max_attempts: 50,
            max_tilt_deg: 5.0,
            tolerance: 1e-3,
        }
    }
}

/// Drop height: the largest lift that puts the object on the plane, a wall
/// top or a placed object under its footprint.
fn drop_height(rotated: &Solid, cloud: &[Vector3<f64>], xy: (f64, f64), obstacles: &[Solid]) -> f64 {
    let mut lift = rotated.support(&-Vector3::z());
    let top = 10.0;
    let down = -Vector3::z();
    for p in cloud {
        let (x, y) = (p.x + xy.0, p.y + xy.1);
        for s in obstacles {
            if let Some(span) = s.spans(&Vector3::new(x, y, top), &down).first() {
                lift = lift.max(top - span.t0 - p.z);
            }
        }
    }
    lift
}

/// Sequential drop placement of `config.count` library objects.
pub fn generate_heap<R: Rng + ?Sized>(library: &[ObjectModel], config: &HeapConfig, rng: &mut R) -> Result<Scene> {
    if !(1..=12).contains(&config.count) {
        return Err(invalid("heaps hold one to twelve objects"));
    }
    if library.is_empty() {
        return Err(invalid("empty object library"));
    }
    let bin = config.bin.then(|| Bin {
        inner: Vector3::new(rng.random_range(0.28..0.38), rng.random_range(0.22..0.32), rng.random_range(0.1..0.15)),
        wall: 0.01,
        pose: Pose::identity(),
    });
    let footprint = match &bin {
        Some(b) => (b.inner.x / 2.0, b.inner.y / 2.0),
        None => (config.half_extent, config.half_extent),
    };
    let walls = bin.map(|b| b.walls()).unwrap_or_default();
    let wall_cloud = Scene {
        objects: Vec::new(),
        support: None,
        bin,
        table_half_extent: 0.0,
    }
    .wall_cloud();
    let mut placed: Vec<PlacedObject> = Vec::with_capacity(config.count);
    let mut solids: Vec<Solid> = walls.clone();
    for k in 0..config.count {
        let model = &library[rng.random_range(0..library.len())];
        let rests = model.shape.rest_orientations();
        let stride = model.cloud.len().div_ceil(600);
        let mut done = None;
        for _ in 0..config.max_attempts {
            let rest = rests[rng.random_range(0..rests.len())];
            let a = rng.random::<f64>() * math::TAU;
            let tilt = Rotation::from_axis_angle(
                &Vector3::new(math::cos(a), math::sin(a), 0.0),
                rng.random::<f64>() * config.max_tilt_deg.to_radians(),
            );
            let yaw = Rotation::from_axis_angle(&Vector3::z(), rng.random::<f64>() * math::TAU);
            let rot = yaw.compose(&tilt).compose(&rest);
            let rotated = model.solid.transformed(&Pose::from_rotation(rot));
            let r = planar_radius(&rotated);
            let hx = (footprint.0 - r).max(0.0);
            let hy = (footprint.1 - r).max(0.0);
            let xy = (rng.random_range(-hx..=hx), rng.random_range(-hy..=hy));
            let cloud: Vec<Vector3<f64>> = model.cloud.iter().step_by(stride).map(|p| rot.apply(p)).collect();
            let z = drop_height(&rotated, &cloud, xy, &solids);
            let candidate = PlacedObject {
                instance: format!("{}#{k}", model.id),
                model: model.clone(),
                pose: Pose::new(rot, Vector3::new(xy.0, xy.1, z)),
            };
            if let Some(b) = &bin {
                if !b.contains(&candidate.centroid()) {
                    continue;
                }
                let c = candidate.cloud();
                let solid = candidate.solid();
                let worst = walls.iter().map(|w| depth(&c, w)).fold(depth(&wall_cloud, &solid), f64::max);
                if worst > config.tolerance {
                    continue;
                }
            }
            if placed.iter().all(|o| interpenetration(o, &candidate) <= config.tolerance) {
                done = Some(candidate);
                break;
            }
        }
        let obj = done.ok_or_else(|| Error::Unplaceable(model.id.clone()))?;
        solids.push(obj.solid());
        placed.push(obj);
    }
    Ok(Scene {
        objects: placed,
        support: Some(Plane::ground()),
        bin,
        table_half_extent: footprint.0.max(footprint.1) + 0.1,
    })
}

impl SurfaceSampler for Scene {
    fn sample_surface<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        let mut parts: Vec<(f64, Option<Solid>)> = self
            .objects
            .iter()
            .map(|o| (o.model.shape.area(), Some(o.solid())))
            .collect();
        if let Some(b) = &self.bin {
            parts.push((b.wall_area(), Some(Solid::Union(b.walls()))));
        }
        let table = self.support.filter(|_| self.table_half_extent > 0.0);
        if table.is_some() {
            parts.push((4.0 * self.table_half_extent * self.table_half_extent, None));
        }
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if total <= 0.0 {
            return Vec::new();
        }
        // multinomial split of the sample budget
        let mut counts = vec![0usize; parts.len()];
        for _ in 0..count {
            let mut u = rng.random::<f64>() * total;
            let mut k = parts.len() - 1;
            for (i, p) in parts.iter().enumerate() {
                if u < p.0 {
                    k = i;
                    break;
                }
                u -= p.0;
            }
            counts[k] += 1;
        }
        let mut out = Vec::with_capacity(count);
        for ((_, solid), n) in parts.iter().zip(counts) {
            match solid {
                Some(s) => out.extend(s.sample_boundary(n, rng)),
                None => {
                    let plane = table.expect("table part implies a support plane");
                    let e1 = math::any_orthogonal(&plane.normal);
                    let e2 = plane.normal.cross(&e1);
                    let h = self.table_half_extent;
                    for _ in 0..n {
                        let p = plane.normal * plane.offset
                            + e1 * rng.random_range(-h..=h)
                            + e2 * rng.random_range(-h..=h);
                        out.push((p, plane.normal));
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graspgen::object_library;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_object_rests_on_the_plane() {
        let lib = object_library();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let cfg = HeapConfig { count: 1, ..HeapConfig::default() };
            let s = generate_heap(&lib, &cfg, &mut rng).unwrap();
            let low = -s.objects[0].solid().support(&-Vector3::z());
            assert!((-1e-4..=1e-3).contains(&low), "{low}");
        }
    }

    #[test]
    fn twelve_objects_without_interpenetration() {
        let lib = object_library();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for bin in [false, true] {
            let cfg = HeapConfig { count: 12, bin, ..HeapConfig::default() };
            let s = generate_heap(&lib, &cfg, &mut rng).unwrap();
            assert_eq!(s.objects.len(), 12);
            for i in 0..12 {
                for j in 0..i {
                    assert!(interpenetration(&s.objects[i], &s.objects[j]) <= 1e-3);
                }
                let low = -s.objects[i].solid().support(&-Vector3::z());
                assert!(low >= -1e-4);
            }
            if let Some(b) = &s.bin {
                assert!(s.objects.iter().all(|o| b.contains(&o.centroid())));
            }
        }
        assert!(generate_heap(&lib, &HeapConfig { count: 13, ..HeapConfig::default() }, &mut rng).is_err());
    }

    #[test]
    fn index_and_transform() {
        let lib = object_library();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = generate_heap(&lib, &HeapConfig { count: 3, bin: true, ..HeapConfig::default() }, &mut rng).unwrap();
        let idx = s.index();
        assert_eq!(idx.instances.len(), 3);
        // a point in the bin wall is obstructed, one high above is not
        let b = s.bin.unwrap();
        let wall = Vector3::new((b.inner.x + b.wall) / 2.0, 0.0, 0.05);
        assert!(idx.obstructed(&[wall], None, 0.002));
        assert!(!idx.obstructed(&[Vector3::new(0.0, 0.0, 1.0)], None, 0.002));
        let t = Pose::new(Rotation::from_axis_angle(&Vector3::new(1.0, 1.0, 0.0), 0.3), Vector3::new(0.2, 0.1, -0.4));
        let moved = s.transformed(&t).index();
        assert!(moved.obstructed(&[t.apply(&wall)], None, 0.002));
        assert!((moved.cloud.points()[5] - t.apply(&idx.cloud.points()[5])).norm() < 1e-12);
    }
}
