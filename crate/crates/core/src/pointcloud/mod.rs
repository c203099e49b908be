//! Point clouds: sampling, neighbor queries, rigid transforms and synthetic scans.

mod fps;
mod knn;
mod scan;

use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::equivariant::IrrepFeature;
use crate::error::{invalid, Error, Result};
use crate::se3::Pose;

pub use fps::{fps, fps_from};
pub use knn::{knn, knn_brute_force, KnnIndex};
pub use scan::{
    cameras_on_ring, cameras_on_sphere, look_at, render_scan, Camera, Projection, ScanConfig,
    ScanMode, SurfaceSampler,
};

/// Coordinate frame a cloud is expressed in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Frame {
    #[default]
    World,
    Gripper,
    Object,
}

impl Frame {
    pub fn as_str(&self) -> &'static str {
        match self {
            Frame::World => "world",
            Frame::Gripper => "gripper",
            Frame::Object => "object",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "world" => Ok(Frame::World),
            "gripper" => Ok(Frame::Gripper),
            "object" => Ok(Frame::Object),
            _ => Err(invalid("unknown frame tag")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub features: Option<Vec<IrrepFeature>>,
    pub frame: Frame,
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn of_points(points: &[Vector3<f64>]) -> Option<Self> {
        let first = *points.first()?;
        Some(points.iter().fold(Self::new(first, first), |b, p| {
            Self::new(b.min.inf(p), b.max.sup(p))
        }))
    }
}

/// Data needed to undo [`normalize`]: `original = centroid + scale * normalized`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub centroid: Vector3<f64>,
    pub scale: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            centroid: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn forward_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        (p - self.centroid) / self.scale
    }

    pub fn inverse_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.centroid + p * self.scale
    }

    /// World pose to normalized-scene pose.
    pub fn forward_pose(&self, pose: &Pose) -> Pose {
        Pose::new(pose.rotation, self.forward_point(&pose.translation))
    }

    pub fn inverse_pose(&self, pose: &Pose) -> Pose {
        Pose::new(pose.rotation, self.inverse_point(&pose.translation))
    }
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, frame: Frame) -> Self {
        Self {
            points,
            normals: None,
            features: None,
            frame,
        }
    }

    pub fn with_normals(
        points: Vec<Vector3<f64>>,
        normals: Vec<Vector3<f64>>,
        frame: Frame,
    ) -> Result<Self> {
        let cloud = Self {
            points,
            normals: Some(normals),
            features: None,
            frame,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = &self.normals {
            if n.len() != self.points.len() {
                return Err(Error::ShapeMismatch("normal count differs from point count".into()));
            }
            if n.iter().any(|v| !((v.norm() - 1.0).abs() <= 1e-6)) {
                return Err(invalid("normals must be unit length"));
            }
        }
        if let Some(f) = &self.features {
            if f.len() != self.points.len() {
                return Err(Error::ShapeMismatch("feature count differs from point count".into()));
            }
        }
        if self.points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(invalid("non-finite point"));
        }
        Ok(())
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self.normals.as_ref().map(|n| indices.iter().map(|&i| n[i]).collect()),
            features: self
                .features
                .as_ref()
                .map(|f| indices.iter().map(|&i| f[i].clone()).collect()),
            frame: self.frame,
        }
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.is_empty() {
            return None;
        }
        Some(self.points.iter().sum::<Vector3<f64>>() / self.len() as f64)
    }
}

/// Applies `pose` to points and rotates normals and features.
pub fn transform_cloud(cloud: &PointCloud, pose: &Pose) -> PointCloud {
    let w = cloud
        .features
        .as_ref()
        .map(|_| crate::equivariant::Wigner::new(&pose.rotation));
    PointCloud {
        points: cloud.points.iter().map(|p| pose.apply(p)).collect(),
        normals: cloud
            .normals
            .as_ref()
            .map(|n| n.iter().map(|v| pose.rotation.apply(v)).collect()),
        features: cloud.features.as_ref().map(|f| {
            let w = w.as_ref().expect("built above");
            f.iter().map(|x| x.transformed(w)).collect()
        }),
        frame: cloud.frame,
    }
}

/// Points inside `aabb` (boundary inclusive).
pub fn crop_box(cloud: &PointCloud, aabb: &Aabb) -> PointCloud {
    let keep: Vec<usize> = (0..cloud.len()).filter(|&i| aabb.contains(&cloud.points[i])).collect();
    cloud.select(&keep)
}

/// Centroid to the origin and maximum radius to 1.
pub fn normalize(cloud: &PointCloud) -> Result<(PointCloud, Normalization)> {
    let centroid = cloud.centroid().ok_or_else(|| Error::EmptyCloud("normalize".into()))?;
    let radius = cloud
        .points
        .iter()
        .map(|p| (p - centroid).norm())
        .fold(0.0, f64::max);
    let scale = if radius > 0.0 { radius } else { 1.0 };
    let n = Normalization { centroid, scale };
    let mut out = cloud.clone();
    for p in &mut out.points {
        *p = n.forward_point(p);
    }
    Ok((out, n))
}

pub fn denormalize(cloud: &PointCloud, n: &Normalization) -> PointCloud {
    let mut out = cloud.clone();
    for p in &mut out.points {
        *p = n.inverse_point(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{sample_uniform_rotation, sample_unit_vector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n)
            .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random(), rng.random::<f64>() * 3.0))
            .collect();
        let normals = (0..n).map(|_| sample_unit_vector(&mut rng)).collect();
        PointCloud::with_normals(points, normals, Frame::Object).unwrap()
    }

    #[test]
    fn transforms_and_roundtrips() {
        let c = random_cloud(50, 0);
        assert_eq!(transform_cloud(&c, &Pose::identity()), c);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pose = Pose::new(sample_uniform_rotation(&mut rng), Vector3::new(1.0, 2.0, 3.0));
        let t = transform_cloud(&c, &pose);
        for i in 0..c.len() {
            let n = t.normals.as_ref().unwrap()[i];
            assert!((n - pose.rotation.apply(&c.normals.as_ref().unwrap()[i])).norm() < 1e-15);
        }
        let back = transform_cloud(&t, &pose.inverse());
        for (a, b) in back.points.iter().zip(&c.points) {
            assert!((a - b).norm() < 1e-12);
        }

        let (norm, info) = normalize(&c).unwrap();
        assert!(norm.centroid().unwrap().norm() < 1e-12);
        let rmax = norm.points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        assert!((rmax - 1.0).abs() < 1e-12);
        for (a, b) in denormalize(&norm, &info).points.iter().zip(&c.points) {
            assert!((a - b).norm() < 1e-9);
        }
        assert!(normalize(&PointCloud::default()).is_err());

        let bb = Aabb::of_points(&c.points).unwrap();
        assert_eq!(crop_box(&c, &bb), c);
        let half = crop_box(&c, &Aabb::new(Vector3::new(-1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 3.0)));
        assert!(half.len() < c.len() && half.points.iter().all(|p| p.x <= 0.0));
        let empty = crop_box(&c, &Aabb::new(Vector3::repeat(10.0), Vector3::repeat(11.0)));
        assert!(empty.is_empty());
    }

    #[test]
    fn validation() {
        let bad = PointCloud::with_normals(
            alloc::vec![Vector3::zeros()],
            alloc::vec![Vector3::new(0.0, 0.0, 2.0)],
            Frame::World,
        );
        assert!(bad.is_err());
        let mismatch = PointCloud::with_normals(alloc::vec![Vector3::zeros()], alloc::vec![], Frame::World);
        assert!(mismatch.is_err());
        assert_eq!(Frame::parse("gripper").unwrap(), Frame::Gripper);
        assert!(Frame::parse("camera").is_err());
    }
}
