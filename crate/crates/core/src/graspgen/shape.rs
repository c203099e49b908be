//! Parametric solids: signed distance, exact ray spans, surface sampling.
//!
//! Solids are unions and differences of spheres, boxes and z-aligned
//! cylinders. Ray spans are closed intervals `[t0, t1]` along a ray inside
//! the solid, with the outward normal at each end.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::math::{self, PI, TAU};
use crate::pointcloud::SurfaceSampler;
use crate::se3::{sample_unit_vector, Pose, Rotation};

const EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    Sphere { radius: f64 },
    /// Axis-aligned box with the given half extents.
    Cuboid { half: Vector3<f64> },
    /// Capped cylinder along z.
    Cylinder { radius: f64, half_height: f64 },
}

/// An interval of a ray inside a solid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Span {
    pub t0: f64,
    pub n0: Vector3<f64>,
    pub t1: f64,
    pub n1: Vector3<f64>,
}

impl Primitive {
    fn sdf_grad(&self, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
        match *self {
            Primitive::Sphere { radius } => {
                let r = p.norm();
                let g = if r > 0.0 { p / r } else { Vector3::z() };
                (r - radius, g)
            }
            Primitive::Cuboid { half } => {
                let q = p.abs() - half;
                let outside = q.map(|v| v.max(0.0));
                let on = outside.norm();
                if on > 0.0 {
                    let g = Vector3::from_fn(|i, _| outside[i] * math::sign(p[i])) / on;
                    (on, g)
                } else {
                    let i = q.imax();
                    let mut g = Vector3::zeros();
                    g[i] = math::sign(p[i]);
                    (q[i], g)
                }
            }
            Primitive::Cylinder { radius, half_height } => {
                let rho = math::hypot(p.x, p.y);
                let radial = if rho > 0.0 {
                    Vector3::new(p.x / rho, p.y / rho, 0.0)
                } else {
                    Vector3::x()
                };
                let axial = Vector3::new(0.0, 0.0, math::sign(p.z));
                let (dr, dz) = (rho - radius, math::abs(p.z) - half_height);
                if dr > 0.0 && dz > 0.0 {
                    let n = math::hypot(dr, dz);
                    (n, (radial * dr + axial * dz) / n)
                } else if dr > dz {
                    (dr, radial)
                } else {
                    (dz, axial)
                }
            }
        }
    }

    fn span(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Span> {
        match *self {
            Primitive::Sphere { radius } => {
                let b = o.dot(d);
                let c = o.norm_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let s = math::sqrt(disc);
                let (t0, t1) = (-b - s, -b + s);
                Some(Span {
                    t0,
                    n0: (o + d * t0) / radius,
                    t1,
                    n1: (o + d * t1) / radius,
                })
            }
            Primitive::Cuboid { half } => {
                let mut lo = (f64::NEG_INFINITY, Vector3::zeros());
                let mut hi = (f64::INFINITY, Vector3::zeros());
                for i in 0..3 {
                    if math::abs(d[i]) < EPS {
                        if math::abs(o[i]) > half[i] {
                            return None;
                        }
                        continue;
                    }
                    let (a, b) = ((-half[i] - o[i]) / d[i], (half[i] - o[i]) / d[i]);
                    let (near, far) = if a < b { (a, b) } else { (b, a) };
                    let mut n = Vector3::zeros();
                    n[i] = -math::sign(d[i]);
                    if near > lo.0 {
                        lo = (near, n);
                    }
                    if far < hi.0 {
                        hi = (far, -n);
                    }
                }
                (lo.0 <= hi.0).then_some(Span {
                    t0: lo.0,
                    n0: lo.1,
                    t1: hi.0,
                    n1: hi.1,
                })
            }
            Primitive::Cylinder { radius, half_height } => {
                let mut lo = (f64::NEG_INFINITY, Vector3::zeros());
                let mut hi = (f64::INFINITY, Vector3::zeros());
                let a = d.x * d.x + d.y * d.y;
                if a < EPS {
                    if o.x * o.x + o.y * o.y > radius * radius {
                        return None;
                    }
                } else {
                    let b = o.x * d.x + o.y * d.y;
                    let c = o.x * o.x + o.y * o.y - radius * radius;
                    let disc = b * b - a * c;
                    if disc < 0.0 {
                        return None;
                    }
                    let s = math::sqrt(disc);
                    let (t0, t1) = ((-b - s) / a, (-b + s) / a);
                    let radial = |t: f64| {
                        let p = o + d * t;
                        Vector3::new(p.x, p.y, 0.0) / radius
                    };
                    lo = (t0, radial(t0));
                    hi = (t1, radial(t1));
                }
                if math::abs(d.z) < EPS {
                    if math::abs(o.z) > half_height {
                        return None;
                    }
                } else {
                    let (a, b) = ((-half_height - o.z) / d.z, (half_height - o.z) / d.z);
                    let (near, far) = if a < b { (a, b) } else { (b, a) };
                    let n = Vector3::new(0.0, 0.0, -math::sign(d.z));
                    if near > lo.0 {
                        lo = (near, n);
                    }
                    if far < hi.0 {
                        hi = (far, -n);
                    }
                }
                (lo.0 <= hi.0).then_some(Span {
                    t0: lo.0,
                    n0: lo.1,
                    t1: hi.0,
                    n1: hi.1,
                })
            }
        }
    }

    fn area(&self) -> f64 {
        match *self {
            Primitive::Sphere { radius } => 4.0 * PI * radius * radius,
            Primitive::Cuboid { half } => 8.0 * (half.x * half.y + half.y * half.z + half.x * half.z),
            Primitive::Cylinder { radius, half_height } => TAU * radius * (2.0 * half_height + radius),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vector3<f64>, Vector3<f64>) {
        match *self {
            Primitive::Sphere { radius } => {
                let n = sample_unit_vector(rng);
                (n * radius, n)
            }
            Primitive::Cuboid { half } => {
                let faces = [half.y * half.z, half.x * half.z, half.x * half.y];
                let total = faces[0] + faces[1] + faces[2];
                let mut u = rng.random::<f64>() * total;
                let mut axis = 2;
                for (i, a) in faces.iter().enumerate() {
                    if u < *a {
                        axis = i;
                        break;
                    }
                    u -= a;
                }
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mut p = Vector3::from_fn(|i, _| half[i] * rng.random_range(-1.0..=1.0));
                p[axis] = s * half[axis];
                let mut n = Vector3::zeros();
                n[axis] = s;
                (p, n)
            }
            Primitive::Cylinder { radius, half_height } => {
                let side = 2.0 * half_height;
                let u = rng.random::<f64>() * (side + radius);
                let phi = rng.random::<f64>() * TAU;
                let (c, s) = (math::cos(phi), math::sin(phi));
                if u < side {
                    let z = rng.random_range(-half_height..=half_height);
                    (Vector3::new(radius * c, radius * s, z), Vector3::new(c, s, 0.0))
                } else {
                    let r = radius * math::sqrt(rng.random::<f64>());
                    let sz = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    (Vector3::new(r * c, r * s, sz * half_height), Vector3::new(0.0, 0.0, sz))
                }
            }
        }
    }

    fn support(&self, d: &Vector3<f64>) -> f64 {
        match *self {
            Primitive::Sphere { radius } => radius,
            Primitive::Cuboid { half } => half.dot(&d.abs()),
            Primitive::Cylinder { radius, half_height } => half_height * math::abs(d.z) + radius * math::hypot(d.x, d.y),
        }
    }
}

/// Constructive solid: placed primitives combined by union and difference.
#[derive(Clone, Debug, PartialEq)]
pub enum Solid {
    Primitive(Primitive, Pose),
    Union(Vec<Solid>),
    Difference(Box<Solid>, Box<Solid>),
}

fn merge(mut spans: Vec<Span>) -> Vec<Span> {
    spans.sort_by(|a, b| a.t0.total_cmp(&b.t0));
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if s.t0 <= last.t1 + EPS => {
                if s.t1 > last.t1 {
                    last.t1 = s.t1;
                    last.n1 = s.n1;
                }
            }
            _ => out.push(s),
        }
    }
    out
}

fn subtract(a: Vec<Span>, b: &[Span]) -> Vec<Span> {
    let mut out = Vec::new();
    for mut s in a {
        for c in b {
            if c.t1 <= s.t0 || c.t0 >= s.t1 {
                continue;
            }
            if c.t0 > s.t0 {
                out.push(Span {
                    t0: s.t0,
                    n0: s.n0,
                    t1: c.t0,
                    n1: -c.n0,
                });
            }
            s.t0 = c.t1;
            s.n0 = -c.n1;
            if s.t0 >= s.t1 {
                break;
            }
        }
        if s.t0 < s.t1 {
            out.push(s);
        }
    }
    out
}

impl Solid {
    pub fn primitive(p: Primitive) -> Self {
        Solid::Primitive(p, Pose::identity())
    }

    pub fn placed(p: Primitive, pose: Pose) -> Self {
        Solid::Primitive(p, pose)
    }

    /// Signed distance (a bound for unions and differences, exact on the
    /// zero set) and its gradient.
    pub fn sdf_grad(&self, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
        match self {
            Solid::Primitive(prim, pose) => {
                let (d, g) = prim.sdf_grad(&pose.inverse().apply(p));
                (d, pose.rotation.apply(&g))
            }
            Solid::Union(parts) => parts
                .iter()
                .map(|s| s.sdf_grad(p))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap_or((f64::INFINITY, Vector3::z())),
            Solid::Difference(a, b) => {
                let (da, ga) = a.sdf_grad(p);
                let (db, gb) = b.sdf_grad(p);
                if da >= -db {
                    (da, ga)
                } else {
                    (-db, -gb)
                }
            }
        }
    }

    pub fn sdf(&self, p: &Vector3<f64>) -> f64 {
        self.sdf_grad(p).0
    }

    /// Outward unit normal near the surface.
    pub fn normal(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.sdf_grad(p).1.normalize()
    }

    /// Sorted disjoint spans of the ray `o + t d` (`d` unit) inside the solid.
    pub fn spans(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Vec<Span> {
        match self {
            Solid::Primitive(prim, pose) => {
                let inv = pose.inverse();
                let (lo, ld) = (inv.apply(o), inv.rotation.apply(d));
                prim.span(&lo, &ld)
                    .map(|s| Span {
                        n0: pose.rotation.apply(&s.n0),
                        n1: pose.rotation.apply(&s.n1),
                        ..s
                    })
                    .into_iter()
                    .collect()
            }
            Solid::Union(parts) => merge(parts.iter().flat_map(|s| s.spans(o, d)).collect()),
            Solid::Difference(a, b) => subtract(a.spans(o, d), &b.spans(o, d)),
        }
    }

    /// `max_{x in solid} <x, d>` for unit `d` (outer hull for differences).
    pub fn support(&self, d: &Vector3<f64>) -> f64 {
        match self {
            Solid::Primitive(prim, pose) => {
                pose.translation.dot(d) + prim.support(&pose.rotation.inverse().apply(d))
            }
            Solid::Union(parts) => parts.iter().map(|s| s.support(d)).fold(f64::NEG_INFINITY, f64::max),
            Solid::Difference(a, _) => a.support(d),
        }
    }

    /// Placed primitive surfaces that can contribute to the boundary, with the
    /// orientation sign of their normals.
    fn patches(&self, sign: f64, out: &mut Vec<(Primitive, Pose, f64)>) {
        match self {
            Solid::Primitive(p, pose) => out.push((*p, *pose, sign)),
            Solid::Union(parts) => parts.iter().for_each(|s| s.patches(sign, out)),
            Solid::Difference(a, b) => {
                a.patches(sign, out);
                b.patches(-sign, out);
            }
        }
    }

    /// Whether a primitive surface point lies on the boundary of the solid.
    fn on_boundary(&self, p: &Vector3<f64>, n: &Vector3<f64>) -> bool {
        let h = 1e-7;
        self.sdf(&(p + n * h)) > 0.0 && self.sdf(&(p - n * h)) < 0.0
    }

    /// Area-uniform boundary samples with outward normals, by rejection over
    /// the primitive surfaces.
    pub fn sample_boundary<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        let mut patches = Vec::new();
        self.patches(1.0, &mut patches);
        let areas: Vec<f64> = patches.iter().map(|(p, _, _)| p.area()).collect();
        let total: f64 = areas.iter().sum();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let mut u = rng.random::<f64>() * total;
            let mut k = patches.len() - 1;
            for (i, a) in areas.iter().enumerate() {
                if u < *a {
                    k = i;
                    break;
                }
                u -= a;
            }
            let (prim, pose, sign) = &patches[k];
            let (p, n) = prim.sample(rng);
            let (p, n) = (pose.apply(&p), pose.rotation.apply(&n) * *sign);
            if self.on_boundary(&p, &n) {
                out.push((p, n));
            }
        }
        out
    }

    pub fn transformed(&self, t: &Pose) -> Solid {
        match self {
            Solid::Primitive(p, pose) => Solid::Primitive(*p, t.compose(pose)),
            Solid::Union(parts) => Solid::Union(parts.iter().map(|s| s.transformed(t)).collect()),
            Solid::Difference(a, b) => Solid::Difference(Box::new(a.transformed(t)), Box::new(b.transformed(t))),
        }
    }
}

/// The shipped object families, in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    Cuboid { size: Vector3<f64> },
    /// Axis along z.
    Cylinder { radius: f64, height: f64 },
    /// Open-ended hollow cylinder along z.
    Tube { outer: f64, inner: f64, height: f64 },
    /// Bar along x (`length_x` by `depth` by `thickness`) with a post along z
    /// on top of its `x = 0` end.
    LShape { length_x: f64, length_z: f64, thickness: f64, depth: f64 },
    /// Cylinder of length `length` along z with hemispherical caps.
    Capsule { radius: f64, length: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        let ok = match *self {
            Shape::Sphere { radius } => positive(&[radius]),
            Shape::Cuboid { size } => positive(size.as_slice()),
            Shape::Cylinder { radius, height } => positive(&[radius, height]),
            Shape::Tube { outer, inner, height } => positive(&[outer, inner, height]) && inner < outer,
            Shape::LShape { length_x, length_z, thickness, depth } => {
                positive(&[length_x, length_z, thickness, depth]) && thickness < length_x && thickness < length_z
            }
            Shape::Capsule { radius, length } => positive(&[radius, length]),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("shape dimensions must be positive and consistent"))
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Cuboid { .. } => "box",
            Shape::Cylinder { .. } => "cylinder",
            Shape::Tube { .. } => "tube",
            Shape::LShape { .. } => "lshape",
            Shape::Capsule { .. } => "capsule",
        }
    }

    pub fn solid(&self) -> Solid {
        let at = |x: f64, y: f64, z: f64| Pose::from_translation(Vector3::new(x, y, z));
        match *self {
            Shape::Sphere { radius } => Solid::primitive(Primitive::Sphere { radius }),
            Shape::Cuboid { size } => Solid::primitive(Primitive::Cuboid { half: size / 2.0 }),
            Shape::Cylinder { radius, height } => Solid::primitive(Primitive::Cylinder {
                radius,
                half_height: height / 2.0,
            }),
            Shape::Tube { outer, inner, height } => Solid::Difference(
                Box::new(Solid::primitive(Primitive::Cylinder { radius: outer, half_height: height / 2.0 })),
                Box::new(Solid::primitive(Primitive::Cylinder {
                    radius: inner,
                    half_height: height / 2.0 + outer,
                })),
            ),
            Shape::LShape { length_x, length_z, thickness: t, depth } => {
                let bar = Primitive::Cuboid { half: Vector3::new(length_x, depth, t) / 2.0 };
                let post = Primitive::Cuboid { half: Vector3::new(t, depth, length_z - t) / 2.0 };
                Solid::Union(vec![
                    Solid::placed(bar, at(length_x / 2.0, 0.0, t / 2.0)),
                    Solid::placed(post, at(t / 2.0, 0.0, t + (length_z - t) / 2.0)),
                ])
            }
            Shape::Capsule { radius, length } => Solid::Union(vec![
                Solid::primitive(Primitive::Cylinder { radius, half_height: length / 2.0 }),
                Solid::placed(Primitive::Sphere { radius }, at(0.0, 0.0, length / 2.0)),
                Solid::placed(Primitive::Sphere { radius }, at(0.0, 0.0, -length / 2.0)),
            ]),
        }
    }

    /// Exact boundary area.
    pub fn area(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => 4.0 * PI * radius * radius,
            Shape::Cuboid { size } => 2.0 * (size.x * size.y + size.y * size.z + size.x * size.z),
            Shape::Cylinder { radius, height } => TAU * radius * (height + radius),
            Shape::Tube { outer, inner, height } => {
                TAU * (outer + inner) * height + TAU * (outer * outer - inner * inner)
            }
            Shape::LShape { length_x, length_z, thickness: t, depth } => {
                let bar = 2.0 * (length_x * depth + depth * t + length_x * t);
                let h = length_z - t;
                let post = 2.0 * (t * depth + depth * h + t * h);
                bar + post - 2.0 * t * depth
            }
            Shape::Capsule { radius, length } => TAU * radius * length + 4.0 * PI * radius * radius,
        }
    }

    /// Orientations that rest flat on a plane before random tilts.
    pub fn rest_orientations(&self) -> Vec<Rotation> {
        let x90 = Rotation::from_axis_angle(&Vector3::x(), PI / 2.0);
        let y90 = Rotation::from_axis_angle(&Vector3::y(), PI / 2.0);
        match self {
            Shape::Sphere { .. } => vec![Rotation::identity()],
            Shape::Cylinder { .. } | Shape::Tube { .. } | Shape::Capsule { .. } => {
                vec![Rotation::identity(), x90]
            }
            Shape::Cuboid { .. } | Shape::LShape { .. } => vec![Rotation::identity(), x90, y90],
        }
    }
}

impl SurfaceSampler for Solid {
    fn sample_surface<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        self.sample_boundary(count, rng)
    }
}
