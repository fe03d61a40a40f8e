//! Retrieval-based GPS inference and the distance/accuracy evaluation harness.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_km, spherical_mean, GeoPoint, EARTH_RADIUS_KM};
use crate::index::{Neighbor, VectorIndex, VectorSet};
use crate::io::fmt_sig;

/// Accuracy radii in kilometres.
pub const ACCURACY_RADII_KM: [f64; 3] = [1.0, 25.0, 200.0];

/// Neighbour counts reported by default.
pub const DEFAULT_NN_CHOICES: [usize; 3] = [1, 5, 9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoRecord {
    pub id: u64,
    pub location: GeoPoint,
    pub embedding: Vec<f32>,
    pub label: Option<String>,
}

/// Index over geotagged records. `locations[i]` belongs to `index.ids()[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoIndex {
    pub index: VectorIndex,
    pub locations: Vec<GeoPoint>,
}

impl GeoIndex {
    /// Builds an index over `records`. `pq` selects product quantization.
    pub fn build(records: &[GeoRecord], pq: Option<&crate::index::PqConfig>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("cannot index an empty record set"));
        }
        let vectors = records_to_vectors(records)?;
        let ids: Vec<u64> = records.iter().map(|r| r.id).collect();
        let index = match pq {
            Some(cfg) => VectorIndex::product_quantized(ids, &vectors, cfg)?,
            None => VectorIndex::exact(ids, vectors)?,
        };
        let locations = records.iter().map(|r| r.location).collect();
        Ok(GeoIndex { index, locations })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.index.validate()?;
        if self.locations.len() != self.index.len() {
            return Err(Error::invalid("index has a different number of locations and ids"));
        }
        Ok(())
    }

    fn location_of(&self, id: u64) -> GeoPoint {
        let pos = self
            .index
            .ids()
            .iter()
            .position(|&x| x == id)
            .expect("search only returns indexed ids");
        self.locations[pos]
    }
}

fn records_to_vectors(records: &[GeoRecord]) -> Result<VectorSet> {
    let mut set = VectorSet::new(records[0].embedding.len())?;
    for r in records {
        set.push(&r.embedding).map_err(|e| Error::Record {
            id: r.id.to_string(),
            message: e.to_string(),
        })?;
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoEstimate {
    pub predicted: GeoPoint,
    pub neighbors: Vec<Neighbor>,
}

/// Predicts a location as the spherical mean of the `nn` nearest records.
pub fn localize(query: &[f32], index: &GeoIndex, nn: usize) -> Result<GeoEstimate> {
    let neighbors = index.index.search(query, nn)?;
    let points: Vec<GeoPoint> = neighbors.iter().map(|n| index.location_of(n.id)).collect();
    Ok(GeoEstimate { predicted: spherical_mean(&points)?, neighbors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub nn: usize,
    pub mean_distance_error_km: f64,
    pub acc_1km: f64,
    pub acc_25km: f64,
    pub acc_200km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    /// Query ids that were also present in the index.
    pub overlapping_ids: Vec<u64>,
}

impl EvalReport {
    /// Accuracy never decreases with the radius.
    pub fn is_monotone(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.acc_1km <= r.acc_25km && r.acc_25km <= r.acc_200km)
    }

    pub fn csv_header() -> &'static str {
        "descriptor,nn,dist_error_km,acc_1km,acc_25km,acc_200km"
    }

    /// One row per neighbour count, tagged with a descriptor name.
    pub fn csv_rows(&self, descriptor: &str) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{descriptor},{},{},{},{},{}",
                    r.nn,
                    fmt_sig(r.mean_distance_error_km),
                    fmt_sig(r.acc_1km),
                    fmt_sig(r.acc_25km),
                    fmt_sig(r.acc_200km)
                )
            })
            .collect()
    }
}

/// Mean distance error and accuracy within 1/25/200 km for every
/// neighbour count. Radii use strict `<`.
pub fn evaluate(queries: &[GeoRecord], index: &GeoIndex, nn_choices: &[usize]) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::invalid("evaluation needs at least one query"));
    }
    if nn_choices.is_empty() {
        return Err(Error::invalid("no neighbour counts requested"));
    }
    let indexed: HashSet<u64> = index.index.ids().iter().copied().collect();
    let mut overlapping_ids: Vec<u64> =
        queries.iter().map(|q| q.id).filter(|id| indexed.contains(id)).collect();
    overlapping_ids.sort_unstable();

    let mut rows = Vec::with_capacity(nn_choices.len());
    for &nn in nn_choices {
        let mut errors: Vec<f64> = queries
            .par_iter()
            .map(|q| {
                let est = localize(&q.embedding, index, nn)?;
                Ok(haversine_km(est.predicted, q.location))
            })
            .collect::<Result<Vec<f64>>>()?;
        // Sorting first makes the sum independent of query order.
        errors.sort_by(f64::total_cmp);
        let n = errors.len() as f64;
        let within = |r: f64| errors.iter().filter(|&&e| e < r).count() as f64 / n;
        rows.push(EvalRow {
            nn,
            mean_distance_error_km: errors.iter().sum::<f64>() / n,
            acc_1km: within(ACCURACY_RADII_KM[0]),
            acc_25km: within(ACCURACY_RADII_KM[1]),
            acc_200km: within(ACCURACY_RADII_KM[2]),
        });
    }
    Ok(EvalReport { rows, overlapping_ids })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySpec {
    pub name: String,
    pub center: GeoPoint,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub embed_dim: usize,
    pub spread_km: f64,
    pub embed_noise: f64,
    pub seed: u64,
}

/// Four European capitals, used by the demo pipeline and the tests.
pub fn default_cities(count: usize) -> Vec<CitySpec> {
    [("paris", 48.8566, 2.3522), ("berlin", 52.52, 13.405), ("madrid", 40.4168, -3.7038), ("rome", 41.9028, 12.4964)]
        .into_iter()
        .map(|(name, lat, lon)| CitySpec {
            name: name.to_string(),
            center: GeoPoint::new(lat, lon).expect("valid city centre"),
            count,
        })
        .collect()
}

/// Synthetic geotagged records: Gaussian locations around each city centre
/// and embeddings equal to a per-city unit direction plus Gaussian noise.
///
/// City `i` uses the basis vector `e_i` when there are no more cities than
/// dimensions, otherwise a seeded random unit direction. Ids run from 0 in
/// city order.
pub fn synth_dataset(cities: &[CitySpec], cfg: &SynthConfig) -> Result<Vec<GeoRecord>> {
    if cfg.embed_dim == 0 {
        return Err(Error::invalid("embedding dimension must be positive"));
    }
    if cfg.spread_km.is_nan() || cfg.spread_km < 0.0 || cfg.embed_noise.is_nan() || cfg.embed_noise < 0.0 {
        return Err(Error::invalid("spread and noise must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let orthogonal = cities.len() <= cfg.embed_dim;
    let km_per_deg = EARTH_RADIUS_KM.to_radians();

    let mut records = Vec::new();
    let mut next_id = 0u64;
    for (ci, city) in cities.iter().enumerate() {
        let mut direction = vec![0.0f64; cfg.embed_dim];
        if orthogonal {
            direction[ci] = 1.0;
        } else {
            direction.iter_mut().for_each(|x| *x = std_normal.sample(&mut rng));
            let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
            direction.iter_mut().for_each(|x| *x /= norm);
        }
        let lat_std = cfg.spread_km / km_per_deg;
        let lon_std = lat_std / city.center.lat().to_radians().cos().max(1e-6);
        for _ in 0..city.count {
            let lat = (city.center.lat() + lat_std * std_normal.sample(&mut rng)).clamp(-90.0, 90.0);
            let lon = city.center.lon() + lon_std * std_normal.sample(&mut rng);
            let embedding = direction
                .iter()
                .map(|&d| (d + cfg.embed_noise * std_normal.sample(&mut rng)) as f32)
                .collect();
            records.push(GeoRecord {
                id: next_id,
                location: GeoPoint::new(lat, lon)?,
                embedding,
                label: Some(city.name.clone()),
            });
            next_id += 1;
        }
    }
    Ok(records)
}
