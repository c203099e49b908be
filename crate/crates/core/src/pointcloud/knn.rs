use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::error::{invalid, Result};
use crate::math;

/// Uniform-grid index for exact k-nearest-neighbor queries.
///
/// Results equal [`knn_brute_force`]: candidates are ordered by squared
/// distance, then index, and a query stops only once every unvisited cell is
/// strictly farther than the current k-th candidate.
#[derive(Clone, Debug)]
pub struct KnnIndex<'a> {
    points: &'a [Vector3<f64>],
    origin: Vector3<f64>,
    cell: f64,
    dims: [usize; 3],
    /// Point indices sorted by cell; `starts[c]..starts[c + 1]` is cell `c`.
    order: Vec<usize>,
    starts: Vec<usize>,
}

impl<'a> KnnIndex<'a> {
    pub fn new(points: &'a [Vector3<f64>]) -> Self {
        let (min, max) = points.iter().fold(
            (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        );
        let n = points.len().max(1);
        let extent = if points.is_empty() { Vector3::zeros() } else { max - min };
        // about two points per occupied cell for surface-like clouds
        let volume = extent.iter().map(|e| e.max(1e-9)).product::<f64>();
        let mut cell = math::cbrt(2.0 * volume / n as f64);
        let longest = extent.max();
        if !(cell > 0.0) || !cell.is_finite() {
            cell = 1.0;
        }
        cell = cell.max(longest / 64.0).max(1e-9);
        let dims: [usize; 3] =
            core::array::from_fn(|i| ((extent[i] / cell) as usize + 1).min(1 << 10));
        let origin = if points.is_empty() { Vector3::zeros() } else { min };
        let mut index = Self {
            points,
            origin,
            cell,
            dims,
            order: Vec::new(),
            starts: Vec::new(),
        };
        let ncell = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0usize; ncell + 1];
        let cells: Vec<usize> = points.iter().map(|p| index.flat(index.cell_of(p))).collect();
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for c in 0..ncell {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut order = vec![0; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            order[fill[c]] = i;
            fill[c] += 1;
        }
        index.order = order;
        index.starts = counts;
        index
    }

    fn cell_of(&self, p: &Vector3<f64>) -> [usize; 3] {
        core::array::from_fn(|i| {
            let f = math::floor((p[i] - self.origin[i]) / self.cell);
            (f.max(0.0) as usize).min(self.dims[i] - 1)
        })
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    /// Lower bound on the distance from `q` to any point outside the box
    /// of cells `lo..=hi`.
    fn outside_bound(&self, q: &Vector3<f64>, lo: [i64; 3], hi: [i64; 3]) -> f64 {
        let mut bound = f64::INFINITY;
        for i in 0..3 {
            if lo[i] > 0 {
                bound = bound.min(q[i] - (self.origin[i] + lo[i] as f64 * self.cell));
            }
            if hi[i] < self.dims[i] as i64 - 1 {
                bound = bound.min(self.origin[i] + (hi[i] + 1) as f64 * self.cell - q[i]);
            }
        }
        bound
    }

    /// The `k` nearest points to `q`, nearest first.
    pub fn query(&self, q: &Vector3<f64>, k: usize) -> Result<Vec<usize>> {
        let n = self.points.len();
        if k > n {
            return Err(invalid("knn needs k <= n"));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let center = self.cell_of(q);
        let mut cand: Vec<(f64, usize)> = Vec::with_capacity(4 * k);
        let mut ring = 0i64;
        loop {
            let lo: [i64; 3] = core::array::from_fn(|i| (center[i] as i64 - ring).max(0));
            let hi: [i64; 3] =
                core::array::from_fn(|i| (center[i] as i64 + ring).min(self.dims[i] as i64 - 1));
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let on_shell = [x, y, z]
                            .iter()
                            .zip(center.iter())
                            .any(|(a, c)| (*a - *c as i64).abs() == ring);
                        if !on_shell {
                            continue;
                        }
                        let c = self.flat([x as usize, y as usize, z as usize]);
                        for &i in &self.order[self.starts[c]..self.starts[c + 1]] {
                            cand.push(((self.points[i] - q).norm_squared(), i));
                        }
                    }
                }
            }
            let bound = self.outside_bound(q, lo, hi);
            let covers_all = cand.len() == n;
            if cand.len() >= k {
                cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                cand.truncate(k.max(cand.len().min(k)));
                let kth = cand[k - 1].0;
                if covers_all || kth < bound * bound && bound > 0.0 {
                    return Ok(cand.iter().take(k).map(|c| c.1).collect());
                }
            } else if covers_all {
                unreachable!("k <= n");
            }
            ring += 1;
        }
    }
}

/// Exact k nearest neighbors of every query (ties by smaller index).
pub fn knn(points: &[Vector3<f64>], queries: &[Vector3<f64>], k: usize) -> Result<Vec<Vec<usize>>> {
    if k > points.len() {
        return Err(invalid("knn needs k <= n"));
    }
    let index = KnnIndex::new(points);
    queries.iter().map(|q| index.query(q, k)).collect()
}

/// O(n) per query reference implementation.
pub fn knn_brute_force(
    points: &[Vector3<f64>],
    queries: &[Vector3<f64>],
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    if k > points.len() {
        return Err(invalid("knn needs k <= n"));
    }
    Ok(queries
        .iter()
        .map(|q| {
            let mut all: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .map(|(i, p)| ((p - q).norm_squared(), i))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.iter().take(k).map(|c| c.1).collect()
        })
        .collect())
}
