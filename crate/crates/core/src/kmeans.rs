//! Seeded Lloyd's K-Means over dense rows, shared by the geographic sampler
//! and the product-quantizer codebook trainer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Result of a K-Means run. Every cluster has at least one member.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub dim: usize,
    /// Row-major `k × dim` centroid table.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub sse_history: Vec<f64>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once no centroid moves by more than this (Euclidean).
    pub tol: f64,
    pub seed: u64,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters `data` (row-major, `dim` columns).
///
/// Initial centroids are `k` distinct rows drawn with a seeded shuffle; when
/// fewer than `k` distinct rows exist the remainder are repeats. After every
/// assignment step an empty cluster takes over the point farthest from its
/// own centroid (among clusters with more than one member).
pub fn kmeans(data: &[f64], dim: usize, params: KMeansParams) -> Result<Clustering> {
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(Error::invalid("k-means data length is not a multiple of the dimension"));
    }
    let n = data.len() / dim;
    if n == 0 {
        return Err(Error::invalid("k-means on an empty point set"));
    }
    if params.k == 0 || params.k > n {
        return Err(Error::invalid(format!(
            "k-means needs 1 <= k <= {n} points, got k = {}",
            params.k
        )));
    }
    let k = params.k;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let mut seeds: Vec<usize> = Vec::with_capacity(k);
    for &i in &order {
        if seeds.len() == k {
            break;
        }
        if !seeds.iter().any(|&s| row(s) == row(i)) {
            seeds.push(i);
        }
    }
    for &i in &order {
        if seeds.len() == k {
            break;
        }
        if !seeds.contains(&i) {
            seeds.push(i);
        }
    }
    let mut centroids: Vec<f64> = seeds.iter().flat_map(|&i| row(i).iter().copied()).collect();

    let mut assignments = vec![0usize; n];
    let mut sse_history = Vec::new();
    let mut iter = 0;
    loop {
        let sse = assign(data, dim, &mut centroids, &mut assignments, k);
        sse_history.push(sse);
        iter += 1;
        if iter > params.max_iters {
            break;
        }

        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *s += x;
            }
        }
        let mut max_shift = 0.0f64;
        for c in 0..k {
            let new: Vec<f64> = sums[c * dim..(c + 1) * dim]
                .iter()
                .map(|s| s / counts[c] as f64)
                .collect();
            let old = &mut centroids[c * dim..(c + 1) * dim];
            max_shift = max_shift.max(sq_dist(old, &new).sqrt());
            old.copy_from_slice(&new);
        }
        if max_shift <= params.tol {
            let sse = assign(data, dim, &mut centroids, &mut assignments, k);
            sse_history.push(sse);
            break;
        }
    }
    Ok(Clustering { dim, centroids, assignments, sse_history })
}

/// Nearest-centroid assignment (ties to the lowest index) followed by the
/// empty-cluster repair. Returns the within-cluster SSE.
fn assign(
    data: &[f64],
    dim: usize,
    centroids: &mut [f64],
    assignments: &mut [usize],
    k: usize,
) -> f64 {
    let n = assignments.len();
    let mut dists = vec![0.0f64; n];
    for i in 0..n {
        let x = &data[i * dim..(i + 1) * dim];
        let (best, best_d) = nearest(x, centroids, dim);
        assignments[i] = best;
        dists[i] = best_d;
    }
    let mut counts = vec![0usize; k];
    for &c in assignments.iter() {
        counts[c] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut donor: Option<usize> = None;
        for i in 0..n {
            if counts[assignments[i]] < 2 {
                continue;
            }
            if donor.is_none_or(|d| dists[i] > dists[d]) {
                donor = Some(i);
            }
        }
        let i = donor.expect("k <= n guarantees a cluster with spare members");
        counts[assignments[i]] -= 1;
        counts[c] = 1;
        assignments[i] = c;
        dists[i] = 0.0;
        centroids[c * dim..(c + 1) * dim].copy_from_slice(&data[i * dim..(i + 1) * dim]);
    }
    dists.iter().sum()
}

/// Index and squared distance of the centroid nearest to `x`, ties to the lowest index.
pub(crate) fn nearest(x: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    (best, best_d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize) -> KMeansParams {
        KMeansParams { k, max_iters: 100, tol: 0.0, seed: 7 }
    }

    #[test]
    fn rejects_bad_k() {
        assert!(kmeans(&[0.0, 1.0], 1, params(3)).is_err());
        assert!(kmeans(&[0.0, 1.0], 1, params(0)).is_err());
        assert!(kmeans(&[], 1, params(1)).is_err());
    }

    #[test]
    fn every_cluster_nonempty_with_duplicates() {
        let data = [1.0, 1.0, 1.0, 1.0];
        let c = kmeans(&data, 1, params(3)).unwrap();
        let mut counts = vec![0; 3];
        for &a in &c.assignments {
            counts[a] += 1;
        }
        assert!(counts.iter().all(|&n| n > 0), "{counts:?}");
    }

    #[test]
    fn sse_non_increasing() {
        let data: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64).sin() * 10.0).collect();
        for seed in 0..10 {
            let c = kmeans(&data, 2, KMeansParams { k: 7, max_iters: 50, tol: 0.0, seed }).unwrap();
            for w in c.sse_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", c.sse_history);
            }
        }
    }
}
