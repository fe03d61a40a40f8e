//! Geographically spread sampling and leakage-free train/test splitting.
//!
//! Clustering runs on raw (lat, lon) degrees as if they were planar. At city
//! scale the east-west stretch of a degree is nearly constant, which is what
//! the sampler relies on; continent-scale inputs will be biased towards
//! splitting along longitude.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{cell_of, GeoPoint, GridCellId};
use crate::kmeans::{self, KMeansParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Number of clusters, and so of sampled points.
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Centroid-shift stop threshold in degrees.
    pub tol: f64,
}

impl SamplingConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        SamplingConfig { k, seed, max_iters: 100, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoClusters {
    pub assignments: Vec<usize>,
    pub centroids: Vec<GeoPoint>,
    pub sse_history: Vec<f64>,
}

fn flatten(points: &[GeoPoint]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.lat(), p.lon()]).collect()
}

pub fn kmeans(points: &[GeoPoint], cfg: &SamplingConfig) -> Result<GeoClusters> {
    if points.is_empty() {
        return Err(Error::invalid("cannot cluster an empty point set"));
    }
    if cfg.k == 0 || cfg.k > points.len() {
        return Err(Error::invalid(format!(
            "K = {} must be between 1 and the number of points ({})",
            cfg.k,
            points.len()
        )));
    }
    let data = flatten(points);
    let clustering = kmeans::kmeans(
        &data,
        2,
        KMeansParams { k: cfg.k, max_iters: cfg.max_iters, tol: cfg.tol, seed: cfg.seed },
    )?;
    let centroids = clustering
        .centroids
        .chunks_exact(2)
        .map(|c| GeoPoint::new(c[0], c[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeoClusters {
        assignments: clustering.assignments,
        centroids,
        sse_history: clustering.sse_history,
    })
}

/// Indices (ascending) of one medoid per cluster.
pub fn sample_spread_indices(points: &[GeoPoint], cfg: &SamplingConfig) -> Result<Vec<usize>> {
    let clusters = kmeans(points, cfg)?;
    let mut best: Vec<Option<(f64, usize)>> = vec![None; cfg.k];
    for (i, (&c, p)) in clusters.assignments.iter().zip(points).enumerate() {
        let centroid = clusters.centroids[c];
        let d = kmeans::sq_dist(&[p.lat(), p.lon()], &[centroid.lat(), centroid.lon()]);
        if best[c].is_none_or(|(bd, _)| d < bd) {
            best[c] = Some((d, i));
        }
    }
    let mut picked: Vec<usize> = best
        .into_iter()
        .map(|b| b.expect("clusters are never empty").1)
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// One representative point per K-Means cluster: the member nearest its
/// centroid, ties to the lowest input index. Output follows input order.
pub fn sample_spread(points: &[GeoPoint], cfg: &SamplingConfig) -> Result<Vec<GeoPoint>> {
    Ok(sample_spread_indices(points, cfg)?.into_iter().map(|i| points[i]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
}

impl Partition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Test => "test",
        }
    }
}

impl std::str::FromStr for Partition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Partition::Train),
            "test" => Ok(Partition::Test),
            other => Err(Error::invalid(format!("unknown partition `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub cell_deg: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitConfig {
    pub const DEFAULT_CELL_DEG: f64 = 0.01;

    pub fn new(seed: u64) -> Self {
        SplitConfig { cell_deg: Self::DEFAULT_CELL_DEG, train_fraction: 0.8, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.cell_deg.is_finite() || self.cell_deg <= 0.0 {
            return Err(Error::invalid(format!("cell size must be positive, got {}", self.cell_deg)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seeded, stateless 64-bit mix of a few words.
pub(crate) fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x243F_6A88_85A3_08D3, |h, &w| splitmix64(h ^ splitmix64(w)))
}

/// Partition assigned to one grid cell. Depends only on the cell and the seed.
pub fn cell_partition(cell: GridCellId, cfg: &SplitConfig) -> Partition {
    let h = mix(&[cfg.seed, cell.row as u64, cell.col as u64]);
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    if u < cfg.train_fraction {
        Partition::Train
    } else {
        Partition::Test
    }
}

/// Assigns every record the partition of its grid cell.
pub fn grid_split<I: Copy + Ord>(
    records: &[(I, GeoPoint)],
    cfg: &SplitConfig,
) -> Result<BTreeMap<I, Partition>> {
    cfg.validate()?;
    let mut out = BTreeMap::new();
    for &(id, p) in records {
        out.insert(id, cell_partition(cell_of(p, cfg.cell_deg)?, cfg));
    }
    Ok(out)
}

/// Cells whose records landed in more than one partition. Empty for any
/// output of [`grid_split`].
pub fn leakage_audit<I: Copy + Ord>(
    records: &[(I, GeoPoint)],
    split: &BTreeMap<I, Partition>,
    cell_deg: f64,
) -> Result<Vec<GridCellId>> {
    let mut seen: HashMap<GridCellId, Partition> = HashMap::new();
    let mut leaking = Vec::new();
    for &(id, p) in records {
        let Some(&part) = split.get(&id) else { continue };
        let cell = cell_of(p, cell_deg)?;
        match seen.get(&cell) {
            Some(&prev) if prev != part => leaking.push(cell),
            Some(_) => {}
            None => {
                seen.insert(cell, part);
            }
        }
    }
    leaking.sort_unstable();
    leaking.dedup();
    Ok(leaking)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn sse(points: &[GeoPoint], groups: &[Vec<usize>]) -> f64 {
        groups
            .iter()
            .map(|g| {
                let n = g.len() as f64;
                let (la, lo) = g.iter().fold((0.0, 0.0), |(a, b), &i| {
                    (a + points[i].lat(), b + points[i].lon())
                });
                let (la, lo) = (la / n, lo / n);
                g.iter()
                    .map(|&i| (points[i].lat() - la).powi(2) + (points[i].lon() - lo).powi(2))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Brute-force best 2-partition of a small point set.
    fn best_two_partition(points: &[GeoPoint]) -> Vec<Vec<usize>> {
        let n = points.len();
        let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
        for mask in 1u32..(1 << n) - 1 {
            let a: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let b: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
            let groups = vec![a, b];
            let s = sse(points, &groups);
            if best.as_ref().is_none_or(|(bs, _)| s < *bs) {
                best = Some((s, groups));
            }
        }
        best.unwrap().1
    }

    fn four_points() -> Vec<GeoPoint> {
        vec![p(0.0, 0.0), p(0.0, 1.0), p(10.0, 10.0), p(10.0, 11.0)]
    }

    #[test]
    fn two_cluster_fixture_matches_enumeration() {
        let pts = four_points();
        let oracle = best_two_partition(&pts);
        let mut oracle_sets: Vec<Vec<usize>> = oracle;
        oracle_sets.iter_mut().for_each(|g| g.sort());
        oracle_sets.sort();
        assert_eq!(oracle_sets, vec![vec![0, 1], vec![2, 3]]);

        for seed in 0..20 {
            let c = kmeans(&pts, &SamplingConfig::new(2, seed)).unwrap();
            assert_eq!(c.assignments[0], c.assignments[1]);
            assert_eq!(c.assignments[2], c.assignments[3]);
            assert_ne!(c.assignments[0], c.assignments[2]);
        }
    }

    #[test]
    fn k_equals_n() {
        let pts = four_points();
        let c = kmeans(&pts, &SamplingConfig::new(4, 3)).unwrap();
        let mut cents = c.centroids.clone();
        cents.sort_by(|a, b| a.lat().total_cmp(&b.lat()).then(a.lon().total_cmp(&b.lon())));
        assert_eq!(cents, pts);
        assert_eq!(sample_spread(&pts, &SamplingConfig::new(4, 3)).unwrap(), pts);
    }

    #[test]
    fn k_one_is_mean() {
        let pts = four_points();
        let c = kmeans(&pts, &SamplingConfig::new(1, 0)).unwrap();
        assert!((c.centroids[0].lat() - 5.0).abs() < 1e-12);
        assert!((c.centroids[0].lon() - 5.5).abs() < 1e-12);
    }

    #[test]
    fn medoids_of_pairs() {
        // Pair means are (0, 0.5) and (10, 10.5): members tie, lowest index wins.
        let pts = four_points();
        let out = sample_spread(&pts, &SamplingConfig::new(2, 11)).unwrap();
        assert_eq!(out, vec![pts[0], pts[2]]);

        let pts = vec![p(0.0, 0.0), p(0.0, 0.9), p(0.0, 1.0), p(10.0, 10.0), p(10.0, 11.0), p(10.0, 10.6)];
        // Means: (0, 0.6333) -> nearest (0, 0.9); (10, 10.5333) -> nearest (10, 10.6).
        let out = sample_spread(&pts, &SamplingConfig::new(2, 5)).unwrap();
        assert_eq!(out, vec![pts[1], pts[5]]);
    }

    #[test]
    fn duplicate_points() {
        let a = p(1.0, 1.0);
        let b = p(2.0, 2.0);
        let out = sample_spread(&[a, a, b, b], &SamplingConfig::new(2, 9)).unwrap();
        assert_eq!(out, vec![a, b]);
    }

    #[test]
    fn rejects_bad_k() {
        let pts = four_points();
        assert!(kmeans(&pts, &SamplingConfig::new(5, 0)).is_err());
        assert!(kmeans(&[], &SamplingConfig::new(1, 0)).is_err());
    }

    #[test]
    fn split_single_cell() {
        let recs: Vec<(u64, GeoPoint)> =
            (0..20).map(|i| (i, p(0.001 + i as f64 * 1e-4, 0.002))).collect();
        for seed in 0..10 {
            let split = grid_split(&recs, &SplitConfig::new(seed)).unwrap();
            let first = split[&0];
            assert!(split.values().all(|&v| v == first));
        }
    }

    #[test]
    fn split_reproducible() {
        let recs = vec![(1u64, p(0.005, 0.005)), (2, p(0.105, 0.005))];
        let cfg = SplitConfig::new(42);
        assert_eq!(grid_split(&recs, &cfg).unwrap(), grid_split(&recs, &cfg).unwrap());
    }

    #[test]
    fn split_fraction_concentrates() {
        let cfg = SplitConfig::new(2024);
        let mut train = 0;
        let total = 10_000;
        for r in 0..100 {
            for c in 0..100 {
                if cell_partition(GridCellId { row: r, col: c }, &cfg) == Partition::Train {
                    train += 1;
                }
            }
        }
        let share = train as f64 / total as f64;
        assert!((share - 0.8).abs() <= 0.02, "share {share}");
    }

    #[test]
    fn split_config_validation() {
        let mut cfg = SplitConfig::new(0);
        cfg.train_fraction = 1.0;
        assert!(cfg.validate().is_err());
        cfg.train_fraction = 0.5;
        cfg.cell_deg = 0.0;
        assert!(cfg.validate().is_err());
    }
}
