//! Scene and gripper encoders.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;

use super::conv::{ConvCache, Edges};
use super::{ModelParams, GRIPPER_REDUCED};
use crate::equivariant::{IrrepSpec, RadialBasis};
use crate::error::{Error, Result};
use crate::pointcloud::{fps, knn, Normalization};
use crate::rng::derive_seed;

/// Minimum scene size.
pub const MIN_SCENE_POINTS: usize = 64;

/// One level of the scene hierarchy.
#[derive(Clone, Debug, PartialEq)]
pub struct EdfLevel {
    pub index: usize,
    pub points: Vec<Vector3<f64>>,
    /// `points.len() x spec.dim()`, point-major.
    pub features: Vec<f64>,
    pub spec: IrrepSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneEncoding {
    pub levels: Vec<EdfLevel>,
    /// Mean of the input points.
    pub centroid: Vector3<f64>,
    pub normalization: Normalization,
    pub(crate) edges: Vec<Edges>,
    pub(crate) caches: Vec<ConvCache>,
}

/// Gripper query points with their encoded features, in the gripper frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GripperQuery {
    /// Meters.
    pub points: Vec<Vector3<f64>>,
    /// 0 for open, 1 for closed.
    pub tags: Vec<f64>,
    /// `points.len() x widths.dim()`.
    pub features: Vec<f64>,
    /// `points.len() x 9`, one channel per degree.
    pub reduced: Vec<f64>,
    pub(crate) cloud: Vec<Vector3<f64>>,
    pub(crate) inputs: Vec<f64>,
    pub(crate) edges: Edges,
    pub(crate) cache: ConvCache,
}

/// Hierarchical encoding of a normalized scene cloud.
pub fn encode_scene(
    points: &[Vector3<f64>],
    normalization: Normalization,
    params: &ModelParams,
) -> Result<SceneEncoding> {
    let c = &params.config;
    if points.len() < MIN_SCENE_POINTS {
        return Err(Error::TooFewPoints {
            need: MIN_SCENE_POINTS,
            got: points.len(),
        });
    }
    let (layers, layout) = params.layers();
    let w = c.widths;
    let mut levels: Vec<EdfLevel> = Vec::with_capacity(c.levels);
    let mut edges = Vec::with_capacity(c.levels);
    let mut caches = Vec::with_capacity(c.levels);
    let ones = vec![1.0; points.len()];
    for l in 0..c.levels {
        let (src_pts, src_feats): (&[Vector3<f64>], &[f64]) = match levels.last() {
            None => (points, &ones),
            Some(prev) => (&prev.points, &prev.features),
        };
        let pts: Vec<Vector3<f64>> = if l == 0 {
            points.to_vec()
        } else {
            let m = c.level_size(points.len(), l);
            fps(src_pts, m, derive_seed(c.fps_seed, &[l as u64]))?
                .iter()
                .map(|&i| src_pts[i])
                .collect()
        };
        let k = c.neighbors.min(src_pts.len());
        let nbrs = knn(src_pts, &pts, k)?;
        let basis = RadialBasis::new(c.n_radial, c.encoder_cutoffs[l])?;
        let e = Edges::build(src_pts, &pts, &nbrs, &basis);
        let mut feats = vec![0.0; pts.len() * w.dim()];
        let cache = layers.encoder[l].forward(&e, src_feats, &params.values[layout.encoder[l].clone()], &mut feats);
        edges.push(e);
        caches.push(cache);
        levels.push(EdfLevel {
            index: l,
            points: pts,
            features: feats,
            spec: w,
        });
    }
    let centroid = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    Ok(SceneEncoding {
        levels,
        centroid,
        normalization,
        edges,
        caches,
    })
}

impl SceneEncoding {
    /// Accumulates encoder weight gradients from gradients on level features.
    pub(crate) fn backward(&self, params: &ModelParams, mut d_levels: Vec<Vec<f64>>, dw: &mut [f64]) {
        let (layers, layout) = params.layers();
        let ones = vec![1.0; self.edges[0].queries()];
        for l in (0..self.levels.len()).rev() {
            let g = core::mem::take(&mut d_levels[l]);
            let r = layout.encoder[l].clone();
            let w = &params.values[r.clone()];
            if l == 0 {
                layers.encoder[0].backward(&self.edges[0], &ones, w, &self.caches[0], &g, &mut dw[r], None);
            } else {
                let (lower, _) = d_levels.split_at_mut(l);
                let src = &self.levels[l - 1].features;
                layers.encoder[l].backward(&self.edges[l], src, w, &self.caches[l], &g, &mut dw[r], Some(&mut lower[l - 1]));
            }
        }
    }

    pub fn zero_level_grads(&self) -> Vec<Vec<f64>> {
        self.levels.iter().map(|l| vec![0.0; l.features.len()]).collect()
    }
}

/// Encodes the union of the open and closed gripper clouds (meters, gripper
/// frame) into a fixed-size query set.
pub fn encode_gripper(
    open: &[Vector3<f64>],
    closed: &[Vector3<f64>],
    params: &ModelParams,
) -> Result<GripperQuery> {
    if open.is_empty() || closed.is_empty() {
        return Err(Error::EmptyCloud("gripper open/closed cloud".into()));
    }
    let c = &params.config;
    let (layers, layout) = params.layers();
    let cloud: Vec<Vector3<f64>> = open.iter().chain(closed).copied().collect();
    let tag_of = |i: usize| if i < open.len() { 0.0 } else { 1.0 };
    let inputs: Vec<f64> = (0..cloud.len()).flat_map(|i| [1.0, tag_of(i)]).collect();
    let m = c.gripper_points.min(cloud.len());
    let idx = fps(&cloud, m, derive_seed(c.fps_seed, &[u64::MAX]))?;
    let points: Vec<Vector3<f64>> = idx.iter().map(|&i| cloud[i]).collect();
    let tags = idx.iter().map(|&i| tag_of(i)).collect();
    let nbrs = knn(&cloud, &points, c.gripper_neighbors.min(cloud.len()))?;
    let basis = RadialBasis::new(c.n_radial, c.gripper_cutoff)?;
    let edges = Edges::build(&cloud, &points, &nbrs, &basis);
    let w = c.widths;
    let mut features = vec![0.0; m * w.dim()];
    let cache = layers.gripper.forward(&edges, &inputs, &params.values[layout.gripper.clone()], &mut features);
    let mut reduced = vec![0.0; m * GRIPPER_REDUCED.dim()];
    let rw = &params.values[layout.reduce.clone()];
    for k in 0..m {
        layers.reduce.forward(
            &features[k * w.dim()..(k + 1) * w.dim()],
            rw,
            &mut reduced[k * 9..(k + 1) * 9],
        );
    }
    Ok(GripperQuery {
        points,
        tags,
        features,
        reduced,
        cloud,
        inputs,
        edges,
        cache,
    })
}

impl GripperQuery {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Accumulates gripper-encoder weight gradients from gradients on `reduced`.
    pub(crate) fn backward(&self, params: &ModelParams, d_reduced: &[f64], dw: &mut [f64]) {
        let (layers, layout) = params.layers();
        let wd = params.config.widths.dim();
        let mut d_feat = vec![0.0; self.features.len()];
        let rw = &params.values[layout.reduce.clone()];
        for k in 0..self.len() {
            layers.reduce.backward(
                &self.features[k * wd..(k + 1) * wd],
                rw,
                &d_reduced[k * 9..(k + 1) * 9],
                &mut d_feat[k * wd..(k + 1) * wd],
                &mut dw[layout.reduce.clone()],
            );
        }
        let r = layout.gripper.clone();
        layers.gripper.backward(&self.edges, &self.inputs, &params.values[r.clone()], &self.cache, &d_feat, &mut dw[r], None);
    }
}
