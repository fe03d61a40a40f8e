//! Exact and product-quantized nearest-neighbour search.
//!
//! Distances are squared Euclidean everywhere. Result lists are sorted by
//! distance, then by ascending id, so every ranking is deterministic.
//!
//! The product quantizer splits each vector into `m` equal slices and learns a
//! small K-Means codebook per slice. A database vector is stored as `m` bytes,
//! one centroid index per slice. Queries are compared to codes with
//! asymmetric distance computation: a `m × k_centroids` table of squared
//! distances from the raw query slices to every centroid is built once, and
//! each code's distance is the sum of `m` lookups.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::{self, KMeansParams};

/// Dense row-major set of equal-length `f32` vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSet {
    dim: usize,
    data: Vec<f32>,
}

impl VectorSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("vector dimension must be positive"));
        }
        Ok(VectorSet { dim, data: Vec::new() })
    }

    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values cannot form rows of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite value in row {}", pos / dim)));
        }
        Ok(VectorSet { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut set = VectorSet::new(dim)?;
        for r in rows {
            set.push(r.as_ref())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, row: &[f32]) -> Result<()> {
        check_dim(self.dim, row.len())?;
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite embedding value"));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// Scales every non-zero row to unit L2 norm.
    pub fn l2_normalize(&mut self) {
        for row in self.data.chunks_exact_mut(self.dim) {
            l2_normalize(row);
        }
    }
}

pub fn l2_normalize(row: &mut [f32]) {
    let norm = row.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    if norm > 0.0 {
        row.iter_mut().for_each(|x| *x = (*x as f64 / norm) as f32);
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: u64,
    /// Squared Euclidean (or asymmetric PQ) distance.
    pub distance: f64,
}

pub fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

fn top_k(mut all: Vec<Neighbor>, k: usize) -> Vec<Neighbor> {
    all.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    all.truncate(k);
    all
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must be between 1 and {n}")));
    }
    Ok(())
}

/// Brute-force k nearest rows of `dataset`; `ids[i]` names row `i`.
pub fn exact_knn(query: &[f32], dataset: &VectorSet, ids: &[u64], k: usize) -> Result<Vec<Neighbor>> {
    check_dim(dataset.dim(), query.len())?;
    check_ids(ids, dataset.len())?;
    check_k(k, dataset.len())?;
    let all = dataset
        .rows()
        .zip(ids)
        .map(|(row, &id)| Neighbor { id, distance: squared_l2(query, row) })
        .collect();
    Ok(top_k(all, k))
}

fn check_ids(ids: &[u64], n: usize) -> Result<()> {
    if ids.len() != n {
        return Err(Error::invalid(format!("{} ids for {n} vectors", ids.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PqConfig {
    /// Number of subspaces; must divide the vector dimension.
    pub m: usize,
    /// Centroids per subspace, 2..=256.
    pub k_centroids: usize,
    pub train_iters: usize,
    pub seed: u64,
}

impl PqConfig {
    /// `dim / 4` subspaces capped at 16 (the largest divisor of `dim` not
    /// above that), 256 centroids each.
    pub fn default_for_dim(dim: usize, seed: u64) -> Self {
        let target = (dim / 4).clamp(1, 16);
        let m = (1..=target).rev().find(|m| dim.is_multiple_of(*m)).unwrap_or(1);
        PqConfig { m, k_centroids: 256, train_iters: 25, seed }
    }

    fn validate(&self, dim: usize, n_train: usize) -> Result<()> {
        if self.m == 0 || !dim.is_multiple_of(self.m) {
            return Err(Error::invalid(format!("m = {} does not divide dimension {dim}", self.m)));
        }
        if !(2..=256).contains(&self.k_centroids) {
            return Err(Error::invalid(format!(
                "k_centroids = {} outside 2..=256",
                self.k_centroids
            )));
        }
        if self.k_centroids > n_train {
            return Err(Error::invalid(format!(
                "k_centroids = {} exceeds the {n_train} training vectors",
                self.k_centroids
            )));
        }
        Ok(())
    }
}

/// One centroid table per subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqCodebook {
    dim: usize,
    m: usize,
    k_centroids: usize,
    /// `m × k_centroids × (dim / m)` values.
    centroids: Vec<f32>,
}

impl PqCodebook {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k_centroids(&self) -> usize {
        self.k_centroids
    }

    pub fn sub_dim(&self) -> usize {
        self.dim / self.m
    }

    /// Centroid `c` of subspace `s`.
    pub fn centroid(&self, s: usize, c: usize) -> &[f32] {
        let d = self.sub_dim();
        let start = (s * self.k_centroids + c) * d;
        &self.centroids[start..start + d]
    }

    pub fn table(&self, s: usize) -> &[f32] {
        let len = self.k_centroids * self.sub_dim();
        &self.centroids[s * len..(s + 1) * len]
    }

    /// Concatenation of the centroids named by `code`.
    pub fn decode(&self, code: &[u8]) -> Vec<f32> {
        code.iter()
            .enumerate()
            .flat_map(|(s, &c)| self.centroid(s, c as usize).iter().copied())
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0
            || !self.dim.is_multiple_of(self.m)
            || !(1..=256).contains(&self.k_centroids)
            || self.centroids.len() != self.dim * self.k_centroids
        {
            return Err(Error::invalid("codebook shape is inconsistent"));
        }
        Ok(())
    }
}

/// Learns a per-subspace K-Means codebook.
pub fn train_codebook(training: &VectorSet, cfg: &PqConfig) -> Result<PqCodebook> {
    let dim = training.dim();
    cfg.validate(dim, training.len())?;
    let sub = dim / cfg.m;
    let mut centroids = Vec::with_capacity(dim * cfg.k_centroids);
    for s in 0..cfg.m {
        let slice: Vec<f64> = training
            .rows()
            .flat_map(|r| r[s * sub..(s + 1) * sub].iter().map(|&x| x as f64))
            .collect();
        let params = KMeansParams {
            k: cfg.k_centroids,
            max_iters: cfg.train_iters,
            tol: 0.0,
            seed: crate::sampling::mix(&[cfg.seed, s as u64]),
        };
        let clustering = kmeans::kmeans(&slice, sub, params)?;
        centroids.extend(clustering.centroids.iter().map(|&x| x as f32));
    }
    Ok(PqCodebook { dim, m: cfg.m, k_centroids: cfg.k_centroids, centroids })
}

/// Nearest centroid index per subspace, ties to the lowest index.
pub fn encode(v: &[f32], cb: &PqCodebook) -> Result<Vec<u8>> {
    check_dim(cb.dim, v.len())?;
    let sub = cb.sub_dim();
    Ok((0..cb.m)
        .map(|s| {
            let slice = &v[s * sub..(s + 1) * sub];
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..cb.k_centroids {
                let d = squared_l2(slice, cb.centroid(s, c));
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best as u8
        })
        .collect())
}

/// Squared distances from each query slice to every centroid of its subspace.
pub fn distance_table(query: &[f32], cb: &PqCodebook) -> Result<Vec<f64>> {
    check_dim(cb.dim, query.len())?;
    let sub = cb.sub_dim();
    let mut table = Vec::with_capacity(cb.m * cb.k_centroids);
    for s in 0..cb.m {
        let slice = &query[s * sub..(s + 1) * sub];
        table.extend((0..cb.k_centroids).map(|c| squared_l2(slice, cb.centroid(s, c))));
    }
    Ok(table)
}

/// Encoded database: `m` bytes per vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqCodes {
    m: usize,
    codes: Vec<u8>,
}

impl PqCodes {
    pub fn encode_all(vectors: &VectorSet, cb: &PqCodebook) -> Result<Self> {
        let mut codes = Vec::with_capacity(vectors.len() * cb.m);
        for row in vectors.rows() {
            codes.extend(encode(row, cb)?);
        }
        Ok(PqCodes { m: cb.m, codes })
    }

    pub fn len(&self) -> usize {
        self.codes.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code(&self, i: usize) -> &[u8] {
        &self.codes[i * self.m..(i + 1) * self.m]
    }

    pub fn size_bytes(&self) -> usize {
        self.codes.len()
    }
}

/// Asymmetric-distance k-NN over PQ codes.
pub fn adc_knn(
    query: &[f32],
    codes: &PqCodes,
    ids: &[u64],
    cb: &PqCodebook,
    k: usize,
) -> Result<Vec<Neighbor>> {
    if codes.m != cb.m {
        return Err(Error::invalid(format!(
            "codes have {} subspaces, codebook has {}",
            codes.m, cb.m
        )));
    }
    check_ids(ids, codes.len())?;
    check_k(k, codes.len())?;
    let table = distance_table(query, cb)?;
    let kc = cb.k_centroids;
    let all = codes
        .codes
        .chunks_exact(cb.m)
        .zip(ids)
        .map(|(code, &id)| {
            let distance = code
                .iter()
                .enumerate()
                .map(|(s, &c)| table[s * kc + c as usize])
                .sum();
            Neighbor { id, distance }
        })
        .collect();
    Ok(top_k(all, k))
}

/// A searchable vector index with caller-supplied ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VectorIndex {
    Exact { ids: Vec<u64>, vectors: VectorSet },
    Pq { ids: Vec<u64>, codebook: PqCodebook, codes: PqCodes },
}

impl VectorIndex {
    pub fn exact(ids: Vec<u64>, vectors: VectorSet) -> Result<Self> {
        check_ids(&ids, vectors.len())?;
        Ok(VectorIndex::Exact { ids, vectors })
    }

    /// Trains a codebook on `vectors` and encodes them.
    pub fn product_quantized(ids: Vec<u64>, vectors: &VectorSet, cfg: &PqConfig) -> Result<Self> {
        check_ids(&ids, vectors.len())?;
        let codebook = train_codebook(vectors, cfg)?;
        let codes = PqCodes::encode_all(vectors, &codebook)?;
        Ok(VectorIndex::Pq { ids, codebook, codes })
    }

    pub fn ids(&self) -> &[u64] {
        match self {
            VectorIndex::Exact { ids, .. } | VectorIndex::Pq { ids, .. } => ids,
        }
    }

    pub fn len(&self) -> usize {
        self.ids().len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids().is_empty()
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorIndex::Exact { vectors, .. } => vectors.dim(),
            VectorIndex::Pq { codebook, .. } => codebook.dim(),
        }
    }

    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<Neighbor>> {
        match self {
            VectorIndex::Exact { ids, vectors } => exact_knn(query, vectors, ids, k),
            VectorIndex::Pq { ids, codebook, codes } => adc_knn(query, codes, ids, codebook, k),
        }
    }

    /// Checks internal shape consistency after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            VectorIndex::Exact { ids, vectors } => check_ids(ids, vectors.len()),
            VectorIndex::Pq { ids, codebook, codes } => {
                codebook.validate()?;
                if codes.m != codebook.m || codes.codes.len() % codes.m != 0 {
                    return Err(Error::invalid("codes do not match the codebook"));
                }
                if codes.codes.iter().any(|&c| c as usize >= codebook.k_centroids) {
                    return Err(Error::invalid("code index outside the codebook"));
                }
                check_ids(ids, codes.len())
            }
        }
    }
}

/// Mean fraction of the exact top-`k` ids recovered by `approx` per query.
pub fn recall_at_k(exact: &[Vec<Neighbor>], approx: &[Vec<Neighbor>], k: usize) -> f64 {
    if exact.is_empty() || k == 0 {
        return 0.0;
    }
    let total: f64 = exact
        .iter()
        .zip(approx)
        .map(|(e, a)| {
            let truth: Vec<u64> = e.iter().take(k).map(|n| n.id).collect();
            let hits = a.iter().take(k).filter(|n| truth.contains(&n.id)).count();
            hits as f64 / k as f64
        })
        .sum();
    total / exact.len() as f64
}

const VEC1_MAGIC: &[u8; 4] = b"VEC1";

/// Writes `VEC1`: magic, little-endian `u32` dim, `u64` count, then the
/// row-major `f32` values.
pub fn write_vec1<W: Write>(mut w: W, vectors: &VectorSet) -> Result<()> {
    w.write_all(VEC1_MAGIC)?;
    w.write_all(&(vectors.dim() as u32).to_le_bytes())?;
    w.write_all(&(vectors.len() as u64).to_le_bytes())?;
    for x in vectors.as_flat() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vec1<R: Read>(mut r: R) -> Result<VectorSet> {
    let bad = |message: String| Error::Parse { line: 0, message };
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| bad("truncated VEC1 header".into()))?;
    if &header[..4] != VEC1_MAGIC {
        return Err(bad("missing VEC1 magic".into()));
    }
    let dim = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(bad("VEC1 dimension is zero".into()));
    }
    let n_values = count
        .checked_mul(dim)
        .ok_or_else(|| bad("VEC1 size overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n_values * 4 {
        return Err(bad(format!(
            "VEC1 payload has {} bytes, expected {}",
            bytes.len(),
            n_values * 4
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    VectorSet::from_flat(dim, data)
}
