use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};

use crate::error::{invalid, Result};
use crate::rng::StreamRng;

/// Farthest-point sampling with a seeded first pick.
pub fn fps(points: &[Vector3<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(invalid("fps on an empty cloud"));
    }
    let first = StreamRng::seed_from_u64(seed).random_range(0..points.len());
    fps_from(points, k, first)
}

/// Greedy max-min selection starting at `first`; ties go to the smallest index.
pub fn fps_from(points: &[Vector3<f64>], k: usize, first: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(invalid("fps needs 1 <= k <= n"));
    }
    if first >= n {
        return Err(invalid("fps start index out of range"));
    }
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut cur = first;
    loop {
        chosen.push(cur);
        taken[cur] = true;
        if chosen.len() == k {
            return Ok(chosen);
        }
        let c = points[cur];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let d = (points[i] - c).norm_squared();
            if d < dist[i] {
                dist[i] = d;
            }
            if dist[i] > best_d {
                best_d = dist[i];
                best = i;
            }
        }
        cur = best;
    }
}
