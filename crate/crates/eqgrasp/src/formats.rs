//! On-disk formats. Text forms print floats in shortest round-trip notation,
//! so equal values give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use eqgrasp_core::equivariant::IrrepSpec;
use eqgrasp_core::graspgen::{Bin, GraspRecord, Label, ObjectModel, PlacedObject, Plane, Scene};
use eqgrasp_core::igso3::IgSo3Table;
use eqgrasp_core::model::{ModelConfig, Variant};
use eqgrasp_core::pointcloud::{Frame, PointCloud};
use eqgrasp_core::Pose;
use nalgebra::Vector3;

use crate::error::{io_err, Error, Result};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

/// Writes `bytes`, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn format_err(what: &str, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("{what}: {msg}"))
}

fn check_token(what: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(format_err(what, format!("`{s}` must be a non-empty token without whitespace")));
    }
    Ok(())
}

fn floats<const N: usize>(tokens: &[&str]) -> std::result::Result<[f64; N], String> {
    if tokens.len() != N {
        return Err(format!("expected {N} numbers, got {}", tokens.len()));
    }
    let mut out = [0.0; N];
    for (o, t) in out.iter_mut().zip(tokens) {
        *o = t.parse().map_err(|_| format!("bad number `{t}`"))?;
    }
    Ok(out)
}

fn vec3(v: &Vector3<f64>) -> String {
    format!("{} {} {}", v.x, v.y, v.z)
}

/// Line-oriented reader that tags errors with file and line.
struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Self {
            path,
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            msg: msg.into(),
        }
    }

    /// Next non-empty, non-comment line split into tokens.
    fn next_tokens(&mut self) -> Option<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Some(l.split_whitespace().collect());
            }
        }
        None
    }

    fn header(&mut self, magic: &str, version: u32) -> Result<()> {
        let t = self.next_tokens().ok_or_else(|| self.err("empty file"))?;
        if t.len() != 2 || t[0] != magic {
            return Err(self.err(format!("expected `{magic} {version}` header")));
        }
        if t[1] != version.to_string() {
            return Err(self.err(format!("unsupported {magic} version {}", t[1])));
        }
        Ok(())
    }
}

// Poses

pub fn poses_to_text(poses: &[Pose]) -> String {
    poses.iter().map(|p| format!("{p}\n")).collect()
}

pub fn poses_from_text(path: &Path, text: &str) -> Result<Vec<Pose>> {
    let mut lines = Lines::new(path, text);
    let mut out = Vec::new();
    while let Some(t) = lines.next_tokens() {
        let a = floats::<7>(&t).map_err(|m| lines.err(m))?;
        out.push(Pose::from_array(&a).map_err(|e| lines.err(e.to_string()))?);
    }
    Ok(out)
}

const POSE_MAGIC: &[u8; 8] = b"EQPOSES1";

pub fn poses_to_bytes(poses: &[Pose]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 56 * poses.len());
    out.extend_from_slice(POSE_MAGIC);
    out.extend_from_slice(&(poses.len() as u64).to_le_bytes());
    for p in poses {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn poses_from_bytes(bytes: &[u8]) -> Result<Vec<Pose>> {
    if bytes.len() < 16 || &bytes[..8] != POSE_MAGIC {
        return Err(format_err("pose file", "bad magic"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    if bytes.len() != 16 + 56 * n {
        return Err(format_err("pose file", "length does not match the pose count"));
    }
    bytes[16..].chunks_exact(56).map(|c| Ok(Pose::from_le_bytes(c)?)).collect()
}

// PLY

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLe,
}

pub fn ply_to_bytes(cloud: &PointCloud, encoding: PlyEncoding) -> Vec<u8> {
    let normals = cloud.normals.as_ref();
    let mut h = String::from("ply\n");
    h += match encoding {
        PlyEncoding::Ascii => "format ascii 1.0\n",
        PlyEncoding::BinaryLe => "format binary_little_endian 1.0\n",
    };
    let _ = writeln!(h, "comment frame {}", cloud.frame.as_str());
    let _ = writeln!(h, "element vertex {}", cloud.len());
    let mut props = vec!["x", "y", "z"];
    if normals.is_some() {
        props.extend(["nx", "ny", "nz"]);
    }
    for p in &props {
        let _ = writeln!(h, "property double {p}");
    }
    h += "end_header\n";
    let mut out = h.into_bytes();
    for i in 0..cloud.len() {
        let mut vals = vec![cloud.points[i].x, cloud.points[i].y, cloud.points[i].z];
        if let Some(n) = normals {
            vals.extend([n[i].x, n[i].y, n[i].z]);
        }
        match encoding {
            PlyEncoding::Ascii => {
                let line: Vec<String> = vals.iter().map(f64::to_string).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
            PlyEncoding::BinaryLe => vals.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Scalar {
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "float" | "float32" => Some(Scalar::F32),
            "double" | "float64" => Some(Scalar::F64),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

/// Reads vertex positions and optional normals. Supports ASCII and binary
/// little-endian files whose vertex element has only float or double
/// properties; other elements must follow the vertices.
pub fn ply_from_bytes(bytes: &[u8]) -> Result<PointCloud> {
    let err = |m: &str| format_err("ply", m);
    let end = bytes
        .windows(11)
        .position(|w| w == b"end_header\n")
        .ok_or_else(|| err("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| err("header is not UTF-8"))?;
    let body = &bytes[end + 11..];
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(err("missing ply magic"));
    }
    let mut binary = None;
    let mut frame = Frame::World;
    let mut count = None;
    let mut props: Vec<(String, Scalar)> = Vec::new();
    let mut in_vertex = false;
    for l in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        match t.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", f, _] => return Err(err(&format!("unsupported format {f}"))),
            ["comment", "frame", f] => frame = Frame::parse(f)?,
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| err("bad vertex count"))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty).ok_or_else(|| err(&format!("unsupported vertex property type {ty}")))?;
                props.push((name.to_string(), s));
            }
            ["property", ..] => {}
            _ => return Err(err(&format!("unexpected header line `{l}`"))),
        }
    }
    let binary = binary.ok_or_else(|| err("missing format line"))?;
    let n = count.ok_or_else(|| err("missing vertex element"))?;
    let find = |k: &str| props.iter().position(|(p, _)| p == k);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(err("vertex needs x, y and z")),
    };
    let normal_idx = match (find("nx"), find("ny"), find("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    if binary {
        let stride: usize = props.iter().map(|(_, s)| s.size()).sum();
        if body.len() < stride * n {
            return Err(err("truncated binary body"));
        }
        for r in 0..n {
            let mut off = r * stride;
            let mut row = Vec::with_capacity(props.len());
            for (_, s) in &props {
                let v = match s {
                    Scalar::F32 => f32::from_le_bytes(body[off..off + 4].try_into().expect("4 bytes")) as f64,
                    Scalar::F64 => f64::from_le_bytes(body[off..off + 8].try_into().expect("8 bytes")),
                };
                off += s.size();
                row.push(v);
            }
            rows.push(row);
        }
    } else {
        let text = std::str::from_utf8(body).map_err(|_| err("ASCII body is not UTF-8"))?;
        let mut it = text.lines().filter(|l| !l.trim().is_empty());
        for _ in 0..n {
            let l = it.next().ok_or_else(|| err("too few vertex lines"))?;
            let row: std::result::Result<Vec<f64>, _> = l.split_whitespace().map(str::parse).collect();
            let row = row.map_err(|_| err("bad vertex value"))?;
            if row.len() != props.len() {
                return Err(err("vertex line has the wrong number of values"));
            }
            rows.push(row);
        }
    }
    let points = rows.iter().map(|r| Vector3::new(r[ix], r[iy], r[iz])).collect();
    let mut cloud = PointCloud::new(points, frame);
    if let Some((a, b, c)) = normal_idx {
        cloud.normals = Some(rows.iter().map(|r| Vector3::new(r[a], r[b], r[c])).collect());
    }
    cloud.validate()?;
    Ok(cloud)
}

pub fn write_ply(path: &Path, cloud: &PointCloud, encoding: PlyEncoding) -> Result<()> {
    write_bytes(path, &ply_to_bytes(cloud, encoding))
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    ply_from_bytes(&read_bytes(path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

// IGSO3 tables

const TABLE_MAGIC: &[u8; 8] = b"EQIGSO31";

pub fn table_to_bytes(table: &IgSo3Table) -> Vec<u8> {
    let mut out = TABLE_MAGIC.to_vec();
    out.extend(table.to_bytes());
    out
}

pub fn table_from_bytes(bytes: &[u8]) -> Result<IgSo3Table> {
    if bytes.len() < 8 || &bytes[..8] != TABLE_MAGIC {
        return Err(format_err("igso3 table", "bad magic"));
    }
    Ok(IgSo3Table::from_bytes(&bytes[8..])?)
}

// Loss curve

pub fn loss_csv(rows: &[(usize, f64)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "loss"])?;
    for (s, l) in rows {
        w.write_record([s.to_string(), l.to_string()])?;
    }
    w.into_inner().map_err(|e| format_err("loss csv", e))
}

pub fn parse_loss_csv(bytes: &[u8]) -> Result<Vec<(usize, f64)>> {
    let mut r = csv::Reader::from_reader(bytes);
    r.records()
        .map(|rec| {
            let rec = rec?;
            let s = rec.get(0).and_then(|v| v.parse().ok());
            let l = rec.get(1).and_then(|v| v.parse().ok());
            s.zip(l).ok_or_else(|| format_err("loss csv", "bad row"))
        })
        .collect()
}

// Grasp records

/// `gripper object frame qw qx qy qz tx ty tz label width c1(3) c2(3)`.
pub fn record_line(r: &GraspRecord) -> Result<String> {
    check_token("gripper id", &r.gripper)?;
    check_token("object id", &r.object)?;
    Ok(format!(
        "{} {} {} {} {} {} {} {}",
        r.gripper,
        r.object,
        r.frame.as_str(),
        r.pose,
        r.label.as_str(),
        r.width,
        vec3(&r.contacts[0]),
        vec3(&r.contacts[1])
    ))
}

pub fn parse_record(tokens: &[&str]) -> std::result::Result<GraspRecord, String> {
    if tokens.len() != 18 {
        return Err(format!("grasp record needs 18 fields, got {}", tokens.len()));
    }
    let pose = Pose::from_array(&floats::<7>(&tokens[3..10])?).map_err(|e| e.to_string())?;
    let label = Label::parse(tokens[10]).map_err(|e| e.to_string())?;
    let [width] = floats::<1>(&tokens[11..12])?;
    let c = floats::<6>(&tokens[12..18])?;
    Ok(GraspRecord {
        gripper: tokens[0].to_string(),
        object: tokens[1].to_string(),
        frame: Frame::parse(tokens[2]).map_err(|e| e.to_string())?,
        pose,
        label,
        contacts: [Vector3::new(c[0], c[1], c[2]), Vector3::new(c[3], c[4], c[5])],
        width,
    })
}

pub fn records_to_text(records: &[GraspRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s += &record_line(r)?;
        s.push('\n');
    }
    Ok(s)
}

pub fn records_from_text(path: &Path, text: &str) -> Result<Vec<GraspRecord>> {
    let mut lines = Lines::new(path, text);
    let mut out = Vec::new();
    while let Some(t) = lines.next_tokens() {
        out.push(parse_record(&t).map_err(|m| lines.err(m))?);
    }
    Ok(out)
}

// Scenes

pub fn scene_to_text(scene: &Scene) -> Result<String> {
    let mut s = String::from("eqgrasp-scene 1\n");
    if let Some(p) = &scene.support {
        let _ = writeln!(s, "support {} {}", vec3(&p.normal), p.offset);
    }
    let _ = writeln!(s, "table {}", scene.table_half_extent);
    if let Some(b) = &scene.bin {
        let _ = writeln!(s, "bin {} {} {}", vec3(&b.inner), b.wall, b.pose);
    }
    for o in &scene.objects {
        check_token("instance id", &o.instance)?;
        let _ = writeln!(s, "object {} {} {}", o.instance, o.model.id, o.pose);
    }
    Ok(s)
}

/// Parses a scene; `model` resolves object model ids.
pub fn scene_from_text(path: &Path, text: &str, model: impl Fn(&str) -> Option<ObjectModel>) -> Result<Scene> {
    let mut lines = Lines::new(path, text);
    lines.header("eqgrasp-scene", 1)?;
    let mut scene = Scene {
        objects: Vec::new(),
        support: None,
        bin: None,
        table_half_extent: 0.0,
    };
    let pose = |t: &[&str]| -> std::result::Result<Pose, String> {
        Pose::from_array(&floats::<7>(t)?).map_err(|e| e.to_string())
    };
    while let Some(t) = lines.next_tokens() {
        let parsed: std::result::Result<(), String> = (|| {
            match t[0] {
                "support" => {
                    let v = floats::<4>(&t[1..])?;
                    scene.support = Some(Plane {
                        normal: Vector3::new(v[0], v[1], v[2]),
                        offset: v[3],
                    });
                }
                "table" => scene.table_half_extent = floats::<1>(&t[1..])?[0],
                "bin" if t.len() == 12 => {
                    let v = floats::<4>(&t[1..5])?;
                    scene.bin = Some(Bin {
                        inner: Vector3::new(v[0], v[1], v[2]),
                        wall: v[3],
                        pose: pose(&t[5..])?,
                    });
                }
                "object" if t.len() == 10 => {
                    let m = model(t[2]).ok_or_else(|| format!("unknown object model `{}`", t[2]))?;
                    scene.objects.push(PlacedObject {
                        instance: t[1].to_string(),
                        model: m,
                        pose: pose(&t[3..])?,
                    });
                }
                k => return Err(format!("unexpected scene entry `{k}`")),
            }
            Ok(())
        })();
        parsed.map_err(|m| lines.err(m))?;
    }
    Ok(scene)
}

// Checkpoints

/// Model weights, optimizer state and the training context they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub values: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_step: i32,
    pub steps_done: usize,
    pub seed: u64,
    pub lr: f64,
    /// Gripper ids the model was trained with.
    pub grippers: Vec<String>,
}

const CHECKPOINT_VERSION: u32 = 1;

fn list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Text header terminated by `end`, then little-endian `f64` payload:
/// values, Adam first moments, Adam second moments.
pub fn checkpoint_to_bytes(c: &Checkpoint) -> Result<Vec<u8>> {
    for g in &c.grippers {
        check_token("gripper id", g)?;
    }
    let m = &c.config;
    let mut h = format!("eqgrasp-checkpoint {CHECKPOINT_VERSION}\n");
    let w = m.widths.mult;
    let _ = writeln!(h, "widths {} {} {}", w[0], w[1], w[2]);
    let _ = writeln!(h, "levels {}", m.levels);
    let _ = writeln!(h, "level_ratio {}", m.level_ratio);
    let _ = writeln!(h, "neighbors {}", m.neighbors);
    let _ = writeln!(h, "n_radial {}", m.n_radial);
    let _ = writeln!(h, "encoder_cutoffs {}", list(&m.encoder_cutoffs));
    let _ = writeln!(h, "query_cutoffs {}", list(&m.query_cutoffs));
    let _ = writeln!(h, "query_neighbors {}", m.query_neighbors);
    let _ = writeln!(h, "gripper_points {}", m.gripper_points);
    let _ = writeln!(h, "gripper_neighbors {}", m.gripper_neighbors);
    let _ = writeln!(h, "gripper_cutoff {}", m.gripper_cutoff);
    let _ = writeln!(h, "time_dim {}", m.time_dim);
    let variant = match m.variant {
        Variant::Film => "film",
        Variant::TwoStage => "two_stage",
    };
    let _ = writeln!(h, "variant {variant}");
    let _ = writeln!(h, "split_time {}", m.split_time);
    let _ = writeln!(h, "fps_seed {}", m.fps_seed);
    let _ = writeln!(h, "skip_variance {}", m.skip_variance);
    let _ = writeln!(h, "seed {}", c.seed);
    let _ = writeln!(h, "lr {}", c.lr);
    let _ = writeln!(h, "steps_done {}", c.steps_done);
    let _ = writeln!(h, "adam_step {}", c.adam_step);
    let _ = writeln!(h, "grippers {}", c.grippers.join(","));
    let _ = writeln!(h, "params {}", c.values.len());
    h += "end\n";
    let mut out = h.into_bytes();
    for v in c.values.iter().chain(&c.adam_m).chain(&c.adam_v) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let err = |m: String| format_err("checkpoint", m);
    let end = bytes
        .windows(5)
        .position(|w| w == b"\nend\n")
        .ok_or_else(|| err("missing header terminator".into()))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| err("header is not UTF-8".into()))?;
    let payload = &bytes[end + 5..];
    let mut lines = header.lines();
    let magic = lines.next().unwrap_or_default();
    match magic.split_once(' ') {
        Some(("eqgrasp-checkpoint", v)) if v == CHECKPOINT_VERSION.to_string() => {}
        Some(("eqgrasp-checkpoint", v)) => return Err(err(format!("unsupported version {v}"))),
        _ => return Err(err("bad magic".into())),
    }
    let mut kv = std::collections::BTreeMap::new();
    for l in lines {
        let (k, v) = l.split_once(' ').unwrap_or((l, ""));
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| kv.get(k).cloned().ok_or_else(|| err(format!("missing `{k}`")));
    fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
        v.trim().parse().map_err(|_| format_err("checkpoint", format!("bad value for `{k}`")))
    }
    let nums = |k: &str| -> Result<Vec<f64>> {
        let v = get(k)?;
        v.split(',').filter(|s| !s.is_empty()).map(|s| num(k, s)).collect()
    };
    let widths: Vec<usize> = get("widths")?.split_whitespace().map(|s| num("widths", s)).collect::<Result<_>>()?;
    if widths.len() != 3 {
        return Err(err("widths needs three multiplicities".into()));
    }
    let config = ModelConfig {
        widths: IrrepSpec::new(widths[0], widths[1], widths[2]),
        levels: num("levels", &get("levels")?)?,
        level_ratio: num("level_ratio", &get("level_ratio")?)?,
        neighbors: num("neighbors", &get("neighbors")?)?,
        n_radial: num("n_radial", &get("n_radial")?)?,
        encoder_cutoffs: nums("encoder_cutoffs")?,
        query_cutoffs: nums("query_cutoffs")?,
        query_neighbors: num("query_neighbors", &get("query_neighbors")?)?,
        gripper_points: num("gripper_points", &get("gripper_points")?)?,
        gripper_neighbors: num("gripper_neighbors", &get("gripper_neighbors")?)?,
        gripper_cutoff: num("gripper_cutoff", &get("gripper_cutoff")?)?,
        time_dim: num("time_dim", &get("time_dim")?)?,
        variant: match get("variant")?.as_str() {
            "film" => Variant::Film,
            "two_stage" => Variant::TwoStage,
            v => return Err(err(format!("unknown variant `{v}`"))),
        },
        split_time: num("split_time", &get("split_time")?)?,
        fps_seed: num("fps_seed", &get("fps_seed")?)?,
        skip_variance: num("skip_variance", &get("skip_variance")?)?,
    };
    let n: usize = num("params", &get("params")?)?;
    if payload.len() != 3 * 8 * n {
        return Err(err(format!("payload holds {} bytes, expected {}", payload.len(), 24 * n)));
    }
    let mut all = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut take = |k: usize| -> Vec<f64> { all.by_ref().take(k).collect() };
    let values = take(n);
    let adam_m = take(n);
    let adam_v = take(n);
    // validates the parameter count against the configuration
    eqgrasp_core::model::ModelParams::from_values(config.clone(), values.clone())?;
    Ok(Checkpoint {
        config,
        values,
        adam_m,
        adam_v,
        adam_step: num("adam_step", &get("adam_step")?)?,
        steps_done: num("steps_done", &get("steps_done")?)?,
        seed: num("seed", &get("seed")?)?,
        lr: num("lr", &get("lr")?)?,
        grippers: get("grippers")?.split(',').filter(|s| !s.is_empty()).map(String::from).collect(),
    })
}
