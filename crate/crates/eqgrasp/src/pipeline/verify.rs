//! Self-check suite: normalization, representation algebra, equivariance,
//! gradients and geometric oracles, each with its measured error.

use std::fmt::Write as _;
use std::time::Instant;

use eqgrasp_core::diffusion::DiffusionSchedule;
use eqgrasp_core::equivariant::{cg, real_spherical_harmonics, rotate_in_place, IrrepSpec, TensorProduct, Wigner};
use eqgrasp_core::graspgen::{
    antipodal_candidate, collision_check, collision_check_brute_force, AntipodalConfig, CollisionIndex, Primitive,
    Solid,
};
use eqgrasp_core::igso3::IgSo3Bank;
use eqgrasp_core::igso3::{build_table, haar_angle_density, igso3_density, log_density, DEFAULT_TRUNCATION, MIN_GRID};
use eqgrasp_core::model::{
    dsm_loss, dsm_loss_and_gradient, encode_gripper, encode_scene, score_model, BatchItem, GraspSample, GripperInput,
    ModelConfig, ModelParams, SceneInput, Sequential,
};
use eqgrasp_core::pointcloud::{fps, knn, knn_brute_force, Normalization};
use eqgrasp_core::rng::{stream, StreamRng};
use eqgrasp_core::se3::{sample_uniform_rotation, sample_unit_vector};
use eqgrasp_core::{Pose, Rotation};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

/// Deliberate convention bug for checking that the suite catches it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    None,
    /// Swap the first two rows of every `l = 1` Wigner matrix.
    SwapL1Rows,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One line per check: `check <name> <PASS|FAIL> measured=<e> tolerance=<t>`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "check {} {verdict} measured={:e} tolerance={:e}", c.name, c.measured, c.tolerance);
        }
        let _ = writeln!(s, "summary {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

fn below(name: &'static str, measured: f64, tolerance: f64) -> Check {
    Check {
        name,
        measured,
        tolerance,
        passed: measured < tolerance,
    }
}

fn d1(r: &Rotation, m: Mutation) -> Matrix3<f64> {
    let mut d = Wigner::new(r).d1;
    if m == Mutation::SwapL1Rows {
        d.swap_rows(0, 1);
    }
    d
}

/// `D_l` as a dynamic matrix, with the mutation applied to `l = 1`.
fn d_of(l: usize, r: &Rotation, m: Mutation) -> DMatrix<f64> {
    match l {
        0 => DMatrix::identity(1, 1),
        1 => DMatrix::from_iterator(3, 3, d1(r, m).iter().copied()),
        _ => DMatrix::from_iterator(5, 5, Wigner::new(r).d2.iter().copied()),
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn igso3_haar() -> Check {
    let worst = [0.05, 0.5, 2.0, 8.0]
        .iter()
        .map(|&t| {
            let f = |w: f64| igso3_density(w, t, DEFAULT_TRUNCATION).expect("valid time") * haar_angle_density(w);
            (simpson(f, 0.0, std::f64::consts::PI, 20_000) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    below("igso3_haar_normalization", worst, 1e-6)
}

fn igso3_ks(samples: usize) -> Check {
    let table = build_table(0.5, DEFAULT_TRUNCATION, 4096).expect("valid table");
    let mut rng = stream(1, &[]);
    let mut xs: Vec<f64> = (0..samples).map(|_| table.sample_angle(&mut rng)).collect();
    xs.sort_by(f64::total_cmp);
    // reference CDF by direct quadrature of the density between consecutive
    // sorted samples, independent of the table
    let f = |x: f64| log_density(x, 0.5).exp() * haar_angle_density(x);
    let n = xs.len() as f64;
    let (mut c, mut prev, mut ks) = (0.0, 0.0, 0.0_f64);
    for (i, &x) in xs.iter().enumerate() {
        c += simpson(f, prev, x, 2);
        prev = x;
        ks = ks.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs());
    }
    below("igso3_sampler_ks", ks, 0.01)
}

fn wigner_checks(m: Mutation, trials: usize) -> [Check; 3] {
    let mut rng = stream(2, &[]);
    let (mut hom, mut orth, mut sh): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..trials {
        let a = sample_uniform_rotation(&mut rng);
        let b = sample_uniform_rotation(&mut rng);
        for l in 1..=2 {
            let lhs = d_of(l, &a.compose(&b), m);
            hom = hom.max((lhs - d_of(l, &a, m) * d_of(l, &b, m)).abs().max());
            let d = d_of(l, &a, m);
            orth = orth.max((&d * d.transpose() - DMatrix::identity(2 * l + 1, 2 * l + 1)).abs().max());
        }
        let u = sample_unit_vector(&mut rng);
        let y = real_spherical_harmonics(&u).expect("unit vector");
        let yr = real_spherical_harmonics(&a.apply(&u)).expect("unit vector");
        let y1 = d_of(1, &a, m) * DVector::from_column_slice(&y[1..4]);
        let y2 = d_of(2, &a, m) * DVector::from_column_slice(&y[4..9]);
        sh = sh
            .max((y1 - DVector::from_column_slice(&yr[1..4])).abs().max())
            .max((y2 - DVector::from_column_slice(&yr[4..9])).abs().max());
    }
    [
        below("wigner_homomorphism", hom, 1e-9),
        below("wigner_orthogonality", orth, 1e-9),
        below("sh_intertwining", sh, 1e-10),
    ]
}

fn cg_intertwining(m: Mutation, trials: usize) -> Check {
    let mut rng = stream(3, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let r = sample_uniform_rotation(&mut rng);
        for p in cg::PATHS.iter() {
            let (n1, n2, n3) = p.dims();
            let a = DVector::from_fn(n1, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(n2, |_, _| rng.random_range(-1.0..1.0));
            let mut out = vec![0.0; n3];
            cg::couple(*p, a.as_slice(), b.as_slice(), 1.0, &mut out);
            let ra = d_of(p.l1, &r, m) * &a;
            let rb = d_of(p.l2, &r, m) * &b;
            let mut rot = vec![0.0; n3];
            cg::couple(*p, ra.as_slice(), rb.as_slice(), 1.0, &mut rot);
            let expect = d_of(p.l3, &r, m) * DVector::from_vec(out);
            worst = worst.max((DVector::from_vec(rot) - expect).abs().max());
        }
    }
    below("cg_intertwining", worst, 1e-10)
}

fn layer_equivariance(trials: usize) -> Check {
    let mut rng = stream(4, &[]);
    let (sa, sb, so) = (IrrepSpec::new(2, 2, 1), IrrepSpec::new(1, 1, 1), IrrepSpec::new(2, 2, 2));
    let tp = TensorProduct::new(sa, sb, so);
    let w: Vec<f64> = (0..tp.num_weights()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let r = sample_uniform_rotation(&mut rng);
        let wig = Wigner::new(&r);
        let a: Vec<f64> = (0..sa.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..sb.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut out = vec![0.0; so.dim()];
        tp.forward(&a, &b, &w, &mut out);
        rotate_in_place(&so, &mut out, &wig);
        let (mut ra, mut rb) = (a.clone(), b.clone());
        rotate_in_place(&sa, &mut ra, &wig);
        rotate_in_place(&sb, &mut rb, &wig);
        let mut rot = vec![0.0; so.dim()];
        tp.forward(&ra, &rb, &w, &mut rot);
        worst = worst.max(out.iter().zip(&rot).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    below("tensor_product_equivariance", worst, 1e-10)
}

fn blob(n: usize, rng: &mut StreamRng) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| {
            let u = sample_unit_vector(rng);
            Vector3::new(0.6 * u.x, 0.4 * u.y, 0.3 * u.z) * rng.random_range(0.8..1.0)
        })
        .collect()
}

fn jaws(rng: &mut StreamRng) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    let finger = |x: f64, rng: &mut StreamRng| -> Vec<Vector3<f64>> {
        (0..12)
            .map(|i| Vector3::new(x + rng.random_range(-1e-3..1e-3), rng.random_range(-5e-3..5e-3), 0.004 * i as f64))
            .collect()
    };
    let palm: Vec<Vector3<f64>> = (0..10)
        .map(|i| Vector3::new(-0.045 + 0.01 * i as f64, rng.random_range(-5e-3..5e-3), -0.005))
        .collect();
    let mut open = palm.clone();
    open.extend(finger(-0.04, rng));
    open.extend(finger(0.04, rng));
    let mut closed = palm;
    closed.extend(finger(-0.01, rng));
    closed.extend(finger(0.01, rng));
    (open, closed)
}

/// End-to-end invariance of the score model under a joint rigid motion of
/// scene and pose: the gripper-frame score must not change.
fn model_invariance(trials: usize) -> Check {
    let mut rng = stream(5, &[]);
    let params = ModelParams::init(ModelConfig::tiny(), 6).expect("valid config");
    let pts = blob(120, &mut rng);
    let (open, closed) = jaws(&mut rng);
    let norm = Normalization { centroid: Vector3::zeros(), scale: 0.2 };
    let sched = DiffusionSchedule::default();
    let scene = encode_scene(&pts, norm, &params).expect("encodes");
    let g = encode_gripper(&open, &closed, &params).expect("encodes");
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let r = Pose::new(sample_uniform_rotation(&mut rng), Vector3::new(rng.random_range(-0.3..0.3), 0.1, -0.1));
        let t = rng.random_range(0.01..1.0);
        let delta = Pose::new(
            sample_uniform_rotation(&mut rng),
            Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        );
        let moved: Vec<_> = pts.iter().map(|p| delta.apply(p)).collect();
        let a = score_model(&r, t, &scene, &g, &params, &sched).expect("scores").as_array();
        let scene2 = encode_scene(&moved, norm, &params).expect("encodes");
        let b = score_model(&delta.compose(&r), t, &scene2, &g, &params, &sched)
            .expect("scores")
            .as_array();
        let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(num / den);
    }
    below("model_joint_invariance", worst, 1e-5)
}

fn dsm_gradient(probes: usize) -> Check {
    let mut rng = stream(7, &[]);
    let (open, closed) = jaws(&mut rng);
    let grasps = (0..6)
        .map(|i| GraspSample {
            scene: 0,
            gripper: 0,
            object: i % 2,
            pose: Pose::new(sample_uniform_rotation(&mut rng), Vector3::new(rng.random_range(-0.4..0.4), 0.0, 0.2)),
        })
        .collect();
    let data = eqgrasp_core::model::Dataset {
        scenes: vec![SceneInput {
            points: blob(96, &mut rng),
            normalization: Normalization { centroid: Vector3::zeros(), scale: 0.25 },
        }],
        grippers: vec![GripperInput { open, closed }],
        grasps,
    };
    let sched = DiffusionSchedule::default();
    let tables = IgSo3Bank::with_resolution(&[], DEFAULT_TRUNCATION, MIN_GRID).expect("bank");
    let params = ModelParams::init(ModelConfig::tiny(), 8).expect("valid config");
    let batch: Vec<BatchItem> = (0..4).map(BatchItem).collect();
    let loss = |p: &ModelParams| dsm_loss(p, &data, &batch, &sched, &tables, &mut stream(9, &[]), &Sequential).expect("loss");
    let (_, grad) =
        dsm_loss_and_gradient(&params, &data, &batch, &sched, &tables, &mut stream(9, &[]), &Sequential).expect("grad");
    let h = 1e-5;
    let n = params.num_params();
    let mut worst: f64 = 0.0;
    for k in 0..probes {
        let i = (k * 7919) % n;
        let mut p = params.clone();
        p.values[i] += h;
        let up = loss(&p);
        p.values[i] -= 2.0 * h;
        let down = loss(&p);
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6));
    }
    below("dsm_gradient_finite_difference", worst, 1e-3)
}

fn random_cloud(rng: &mut StreamRng, n: usize) -> Vec<Vector3<f64>> {
    (0..n).map(|_| Vector3::new(rng.random(), rng.random(), rng.random())).collect()
}

fn point_oracles(instances: usize) -> [Check; 3] {
    let mut rng = stream(10, &[]);
    let (mut fps_bad, mut knn_bad, mut coll_bad) = (0usize, 0usize, 0usize);
    for trial in 0..instances {
        let n = rng.random_range(5..150);
        let pts = random_cloud(&mut rng, n);
        let k = rng.random_range(1..=n);
        let sel = fps(&pts, k, trial as u64).expect("non-empty");
        let d = |i: usize, set: &[usize]| set.iter().map(|&j| (pts[i] - pts[j]).norm_squared()).fold(f64::INFINITY, f64::min);
        for s in 1..k {
            let best = (0..n).map(|i| d(i, &sel[..s])).fold(0.0, f64::max);
            if d(sel[s], &sel[..s]) != best {
                fps_bad += 1;
            }
        }
        let queries = random_cloud(&mut rng, 20);
        let kk = rng.random_range(1..=n.min(16));
        if knn(&pts, &queries, kk).expect("k <= n") != knn_brute_force(&pts, &queries, kk).expect("k <= n") {
            knn_bad += 1;
        }
        let owners: Vec<Option<usize>> = (0..n).map(|i| Some(i % 3)).collect();
        let gripper: Vec<Vector3<f64>> = random_cloud(&mut rng, 30).iter().map(|p| p * 1.2).collect();
        let clearance = rng.random_range(0.0..0.1);
        let exclude = Some(trial % 3);
        let index = CollisionIndex::new(pts.clone(), owners.clone(), 0.05);
        if collision_check(&gripper, &index, exclude, clearance)
            != collision_check_brute_force(&gripper, &pts, &owners, exclude, clearance)
        {
            coll_bad += 1;
        }
    }
    [
        below("fps_greedy_mismatches", fps_bad as f64, 0.5),
        below("knn_mismatches", knn_bad as f64, 0.5),
        below("collision_mismatches", coll_bad as f64, 0.5),
    ]
}

fn antipodal_sphere(samples: usize) -> Check {
    let s = Solid::primitive(Primitive::Sphere { radius: 1.0 });
    let mut rng = stream(11, &[]);
    let mut worst: f64 = 0.0;
    for surface in s.sample_boundary(samples, &mut rng) {
        if let Ok(c) = antipodal_candidate(&s, surface, &AntipodalConfig::default(), 2.5, &mut rng) {
            worst = worst.max(c.c1.cross(&c.direction()).norm());
        }
    }
    below("antipodal_sphere_center_line", worst, 1e-6)
}

/// Runs the suite; returns the report and the elapsed seconds.
pub fn run(level: Level, mutation: Mutation) -> (VerifyReport, f64) {
    let start = Instant::now();
    let (trials, probes, instances, ks) = match level {
        Level::Quick => (100, 40, 100, 100_000),
        Level::Full => (1000, 200, 300, 400_000),
    };
    let mut checks = vec![igso3_haar(), igso3_ks(ks)];
    checks.extend(wigner_checks(mutation, trials));
    checks.push(cg_intertwining(mutation, trials / 10));
    checks.push(layer_equivariance(trials));
    checks.push(model_invariance(trials / if level == Level::Quick { 5 } else { 1 }));
    checks.push(dsm_gradient(probes));
    checks.extend(point_oracles(instances));
    checks.push(antipodal_sphere(trials * 5));
    (VerifyReport { checks }, start.elapsed().as_secs_f64())
}
