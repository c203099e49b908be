//! Synthetic depth scans by z-buffered surface sampling.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Frame, PointCloud};
use crate::error::{invalid, Error, Result};
use crate::math::{self, PI, TAU};
use crate::se3::{Pose, Rotation};

/// Anything that can draw area-uniform surface points with outward normals.
pub trait SurfaceSampler {
    fn sample_surface<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<(Vector3<f64>, Vector3<f64>)>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    /// Vertical field of view in radians.
    Pinhole { fov_y: f64 },
    /// Vertical extent of the image plane in meters.
    Orthographic { height: f64 },
}

/// Camera-to-world pose; the camera looks along its +z axis, +x right, +y down.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub pose: Pose,
    pub projection: Projection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScanMode {
    /// Ten merged views.
    Dense,
    /// One view.
    Sparse,
}

impl ScanMode {
    pub const fn views(&self) -> usize {
        match self {
            ScanMode::Dense => 10,
            ScanMode::Sparse => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanConfig {
    pub width: usize,
    pub height: usize,
    pub surface_samples: usize,
    /// Standard deviation of Gaussian depth noise along the viewing ray.
    pub depth_noise: f64,
    /// Depth slack for visibility after splatting.
    pub depth_tolerance: f64,
    /// Splat half-width in pixels.
    pub splat: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            width: 96,
            height: 96,
            surface_samples: 40_000,
            depth_noise: 0.0,
            depth_tolerance: 2e-3,
            splat: 0,
        }
    }
}

/// Camera at `eye` looking at `target`, image-up roughly along `up`.
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> Result<Pose> {
    let z = target - eye;
    if !(z.norm() > 1e-12) {
        return Err(invalid("look_at: eye equals target"));
    }
    let z = z.normalize();
    let mut x = z.cross(&-up);
    if x.norm() < 1e-9 {
        x = math::any_orthogonal(&z);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Ok(Pose::new(Rotation::from_frame(&x, &y, &z), *eye))
}

/// `count` cameras on a horizontal circle of `radius` at `height` above `center`.
pub fn cameras_on_ring(
    center: &Vector3<f64>,
    radius: f64,
    height: f64,
    count: usize,
    projection: Projection,
) -> Result<Vec<Camera>> {
    (0..count)
        .map(|i| {
            let a = TAU * i as f64 / count as f64;
            let eye = center + Vector3::new(radius * math::cos(a), radius * math::sin(a), height);
            Ok(Camera {
                pose: look_at(&eye, center, &Vector3::z())?,
                projection,
            })
        })
        .collect()
}

/// `count` cameras on a Fibonacci sphere of `distance` around `center`.
pub fn cameras_on_sphere(
    center: &Vector3<f64>,
    distance: f64,
    count: usize,
    projection: Projection,
) -> Result<Vec<Camera>> {
    let golden = PI * (3.0 - math::sqrt(5.0));
    (0..count)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / count as f64;
            let r = math::sqrt(1.0 - z * z);
            let a = golden * i as f64;
            let dir = Vector3::new(r * math::cos(a), r * math::sin(a), z);
            Ok(Camera {
                pose: look_at(&(center + dir * distance), center, &Vector3::z())?,
                projection,
            })
        })
        .collect()
}

impl Camera {
    /// Pixel coordinates and depth of a camera-frame point.
    fn project(&self, pc: &Vector3<f64>, w: usize, h: usize) -> Option<(f64, f64)> {
        let (fw, fh) = (w as f64, h as f64);
        let (u, v) = match self.projection {
            Projection::Pinhole { fov_y } => {
                if pc.z <= 1e-6 {
                    return None;
                }
                let f = 0.5 * fh / math::tan(0.5 * fov_y);
                (f * pc.x / pc.z + 0.5 * fw, f * pc.y / pc.z + 0.5 * fh)
            }
            Projection::Orthographic { height } => {
                if pc.z <= 0.0 {
                    return None;
                }
                let s = fh / height;
                (s * pc.x + 0.5 * fw, s * pc.y + 0.5 * fh)
            }
        };
        (u >= 0.0 && v >= 0.0 && u < fw && v < fh).then_some((u, v))
    }

    /// Unit direction from the camera to a world point.
    fn ray(&self, p: &Vector3<f64>) -> Vector3<f64> {
        match self.projection {
            Projection::Pinhole { .. } => (p - self.pose.translation).normalize(),
            Projection::Orthographic { .. } => self.pose.rotation.apply(&Vector3::z()),
        }
    }

    fn faces(&self, p: &Vector3<f64>, n: &Vector3<f64>) -> bool {
        n.dot(&self.ray(p)) < 0.0
    }
}

/// Visible surface samples from the first `mode.views()` cameras, merged,
/// in the world frame with normals.
pub fn render_scan<S: SurfaceSampler, R: Rng + ?Sized>(
    scene: &S,
    cameras: &[Camera],
    mode: ScanMode,
    config: &ScanConfig,
    rng: &mut R,
) -> Result<PointCloud> {
    if cameras.len() < mode.views() {
        return Err(invalid("not enough cameras for the scan mode"));
    }
    if config.width == 0 || config.height == 0 || config.surface_samples == 0 {
        return Err(invalid("scan resolution must be positive"));
    }
    let samples = scene.sample_surface(config.surface_samples, rng);
    let (w, h) = (config.width, config.height);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for cam in &cameras[..mode.views()] {
        let inv = cam.pose.inverse();
        let mut zbuf = vec![f64::INFINITY; w * h];
        let mut projected = Vec::with_capacity(samples.len());
        for (i, (p, n)) in samples.iter().enumerate() {
            if !cam.faces(p, n) {
                continue;
            }
            let pc = inv.apply(p);
            if let Some((u, v)) = cam.project(&pc, w, h) {
                let (px, py) = (u as usize, v as usize);
                projected.push((i, py * w + px, pc.z));
                let s = config.splat;
                for y in py.saturating_sub(s)..(py + s + 1).min(h) {
                    for x in px.saturating_sub(s)..(px + s + 1).min(w) {
                        let z = &mut zbuf[y * w + x];
                        *z = z.min(pc.z);
                    }
                }
            }
        }
        // one sample per pixel: the nearest that survives the splatted z-test
        let mut best: Vec<Option<(f64, usize)>> = vec![None; w * h];
        for &(i, pix, depth) in &projected {
            if depth <= zbuf[pix] + config.depth_tolerance {
                match best[pix] {
                    Some((d, j)) if d < depth || (d == depth && j < i) => {}
                    _ => best[pix] = Some((depth, i)),
                }
            }
        }
        for (_, i) in best.into_iter().flatten() {
            let (p, n) = samples[i];
            let noisy = if config.depth_noise > 0.0 {
                let e: f64 = rng.sample(StandardNormal);
                p + cam.ray(&p) * (config.depth_noise * e)
            } else {
                p
            };
            points.push(noisy);
            normals.push(n);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyScan);
    }
    PointCloud::with_normals(points, normals, Frame::World)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::sample_unit_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Sphere(f64);

    impl SurfaceSampler for Sphere {
        fn sample_surface<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<(Vector3<f64>, Vector3<f64>)> {
            (0..count)
                .map(|_| {
                    let n = sample_unit_vector(rng);
                    (n * self.0, n)
                })
                .collect()
        }
    }

    /// Axis-aligned box `[-a, a] x [-a, a] x [0, 2a]`.
    struct Cube(f64);

    impl SurfaceSampler for Cube {
        fn sample_surface<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<(Vector3<f64>, Vector3<f64>)> {
            let a = self.0;
            (0..count)
                .map(|_| {
                    let face = rng.random_range(0..6);
                    let (s, t) = (rng.random_range(-a..a), rng.random_range(-a..a));
                    let axis = face / 2;
                    let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
                    let mut p = Vector3::zeros();
                    let mut n = Vector3::zeros();
                    p[axis] = sign * a;
                    n[axis] = sign;
                    p[(axis + 1) % 3] = s;
                    p[(axis + 2) % 3] = t;
                    (p + Vector3::new(0.0, 0.0, a), n)
                })
                .collect()
        }
    }

    #[test]
    fn surrounding_cameras_cover_the_sphere() {
        let cams = cameras_on_sphere(&Vector3::zeros(), 0.5, 10, Projection::Pinhole { fov_y: 0.8 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let scan = render_scan(&Sphere(0.05), &cams, ScanMode::Dense, &ScanConfig::default(), &mut rng).unwrap();
        // equal-area bins: 20 in z, 40 in azimuth
        let mut bins = vec![false; 800];
        for p in &scan.points {
            let d = p.normalize();
            let zi = (((d.z + 1.0) / 2.0 * 20.0) as usize).min(19);
            let ai = (((d.y.atan2(d.x) + PI) / TAU * 40.0) as usize).min(39);
            bins[zi * 40 + ai] = true;
        }
        let covered = bins.iter().filter(|b| **b).count() as f64 / 800.0;
        assert!(covered >= 0.95, "{covered}");
    }

    #[test]
    fn top_down_scan_sees_no_underside() {
        let a = 0.03;
        let cam = Camera {
            pose: look_at(&Vector3::new(0.0, 0.0, 0.5), &Vector3::new(0.0, 0.0, a), &Vector3::y()).unwrap(),
            projection: Projection::Pinhole { fov_y: 0.6 },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scan = render_scan(&Cube(a), &[cam], ScanMode::Sparse, &ScanConfig::default(), &mut rng).unwrap();
        let zmax = scan.points.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
        let zmin = scan.points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        assert!(zmax >= 2.0 * a - 1e-12);
        assert!(zmin > 1e-6);
        assert!(render_scan(&Cube(a), &[cam], ScanMode::Dense, &ScanConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn deterministic_and_noisy_variants() {
        let cams = cameras_on_ring(&Vector3::zeros(), 0.4, 0.3, 10, Projection::Orthographic { height: 0.2 }).unwrap();
        let run = |seed, noise| {
            let cfg = ScanConfig { depth_noise: noise, ..ScanConfig::default() };
            render_scan(&Sphere(0.05), &cams, ScanMode::Dense, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
        };
        assert_eq!(run(3, 0.0), run(3, 0.0));
        let noisy = run(3, 1e-3);
        let clean = run(3, 0.0);
        assert_eq!(noisy.len(), clean.len());
        assert_ne!(noisy.points, clean.points);
        let away = Camera {
            pose: look_at(&Vector3::new(0.0, 0.0, 1.0), &Vector3::new(0.0, 0.0, 2.0), &Vector3::y()).unwrap(),
            projection: Projection::Pinhole { fov_y: 0.5 },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = render_scan(&Sphere(0.05), &[away], ScanMode::Sparse, &ScanConfig::default(), &mut rng);
        assert!(matches!(err, Err(Error::EmptyScan)));
    }
}
