//! Geographic sampling, vector retrieval for image geolocation, concept
//! classifiers and an active-learning annotation simulator.

mod error;
mod kmeans;

pub mod active;
pub mod classifier;
pub mod concepts;
pub mod geo;
pub mod index;
pub mod io;
pub mod localize;
pub mod osm;
pub mod sampling;

pub use error::{Error, Result};
pub use geo::{haversine_km, spherical_mean, GeoPoint, GridCellId};
pub use index::{Neighbor, PqCodebook, PqConfig, VectorIndex, VectorSet};
pub use kmeans::{Clustering, KMeansParams};
pub use localize::{GeoIndex, GeoRecord};
pub use sampling::{Partition, SamplingConfig, SplitConfig};
