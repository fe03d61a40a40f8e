//! Geographic primitives shared by the ingest, sampling and localization code.
//!
//! Coordinates are WGS-84 degrees. Distances use the haversine formula on a
//! sphere of mean Earth radius; averaging happens on unit vectors so that
//! clusters straddling the antimeridian average to a sensible point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Resultant norms below this are treated as cancelling out.
const MIN_RESULTANT_NORM: f64 = 1e-9;

/// A point on the globe. Latitude is in `[-90, 90]`, longitude in `(-180, 180]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    /// Builds a point, normalizing the longitude into `(-180, 180]`.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::invalid(format!("non-finite coordinate ({lat}, {lon})")));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::invalid(format!("latitude {lat} outside [-90, 90]")));
        }
        Ok(GeoPoint { lat, lon: normalize_lon(lon) })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    fn to_unit_vector(self) -> [f64; 3] {
        let (lat, lon) = (self.lat.to_radians(), self.lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }
}

fn normalize_lon(lon: f64) -> f64 {
    if lon > -180.0 && lon <= 180.0 {
        return lon;
    }
    let mut shifted = (lon + 180.0) % 360.0;
    if shifted <= 0.0 {
        shifted += 360.0;
    }
    shifted - 180.0
}

/// Great-circle distance in kilometres.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let s_lat = (dlat / 2.0).sin();
    let s_lon = (dlon / 2.0).sin();
    let h = s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon;
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Mean of a set of points, taken as the normalized sum of their 3D unit vectors.
///
/// The result does not depend on the order of `points`: vectors are summed in
/// a canonical order.
pub fn spherical_mean(points: &[GeoPoint]) -> Result<GeoPoint> {
    if points.is_empty() {
        return Err(Error::invalid("spherical mean of an empty point set"));
    }
    if points.iter().all(|p| *p == points[0]) {
        return Ok(points[0]);
    }
    let mut vectors: Vec<[f64; 3]> = points.iter().map(|p| p.to_unit_vector()).collect();
    vectors.sort_by(|u, v| {
        u[0].total_cmp(&v[0])
            .then(u[1].total_cmp(&v[1]))
            .then(u[2].total_cmp(&v[2]))
    });
    let sum = vectors.iter().fold([0.0f64; 3], |acc, v| {
        [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]]
    });
    let norm = (sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]).sqrt();
    if norm <= MIN_RESULTANT_NORM * points.len() as f64 {
        return Err(Error::DegenerateMean { norm });
    }
    let lat = (sum[2] / norm).clamp(-1.0, 1.0).asin().to_degrees();
    let lon = sum[1].atan2(sum[0]).to_degrees();
    GeoPoint::new(lat.clamp(-90.0, 90.0), lon)
}

/// Index of a square grid cell, in units of the cell size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCellId {
    pub row: i64,
    pub col: i64,
}

/// Grid cell containing `p` for cells of `cell_deg` degrees on a side.
pub fn cell_of(p: GeoPoint, cell_deg: f64) -> Result<GridCellId> {
    if !cell_deg.is_finite() || cell_deg <= 0.0 {
        return Err(Error::invalid(format!("cell size must be positive, got {cell_deg}")));
    }
    Ok(GridCellId {
        row: (p.lat / cell_deg).floor() as i64,
        col: (p.lon / cell_deg).floor() as i64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    /// Independent great-circle distance via the spherical law of cosines on
    /// unit vectors (atan2 form, stable for small and antipodal angles).
    fn vector_angle_km(a: GeoPoint, b: GeoPoint) -> f64 {
        let (u, v) = (a.to_unit_vector(), b.to_unit_vector());
        let cross = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
        let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
        sin.atan2(cos) * EARTH_RADIUS_KM
    }

    #[test]
    fn longitude_normalization() {
        assert_eq!(p(0.0, -180.0).lon(), 180.0);
        assert_eq!(p(0.0, 180.0).lon(), 180.0);
        assert_eq!(p(0.0, 190.0).lon(), -170.0);
        assert_eq!(p(0.0, -540.0).lon(), 180.0);
        assert_eq!(p(10.0, 2.5).lon(), 2.5);
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn paris_berlin() {
        let paris = p(48.8566, 2.3522);
        let berlin = p(52.5200, 13.4050);
        let oracle = vector_angle_km(paris, berlin);
        assert!((oracle - 877.5).abs() < 0.5, "oracle {oracle}");
        let d = haversine_km(paris, berlin);
        assert!((d - 877.5).abs() < 0.5, "haversine {d}");
        assert!((d - oracle).abs() < 1e-6);
    }

    #[test]
    fn identity_and_antipode() {
        let a = p(12.3, -45.6);
        assert_eq!(haversine_km(a, a), 0.0);
        let half = std::f64::consts::PI * EARTH_RADIUS_KM;
        assert!((haversine_km(p(0.0, 0.0), p(0.0, 180.0)) - half).abs() < 1e-6);
        assert!((half - 20015.1).abs() < 0.1);
    }

    #[test]
    fn spherical_mean_examples() {
        let a = p(33.0, -117.0);
        let m = spherical_mean(&[a]).unwrap();
        assert!((m.lat() - 33.0).abs() < 1e-9 && (m.lon() + 117.0).abs() < 1e-9);

        let m = spherical_mean(&[p(10.0, 50.0), p(-10.0, 50.0)]).unwrap();
        assert!(m.lat().abs() < 1e-9 && (m.lon() - 50.0).abs() < 1e-9);

        let m = spherical_mean(&[p(0.0, 179.0), p(0.0, -179.0)]).unwrap();
        assert!(m.lat().abs() < 1e-9);
        assert!((m.lon() - 180.0).abs() < 1e-9, "lon {}", m.lon());
    }

    #[test]
    fn spherical_mean_degenerate() {
        assert!(matches!(
            spherical_mean(&[p(0.0, 0.0), p(0.0, 180.0)]),
            Err(Error::DegenerateMean { .. })
        ));
        assert!(spherical_mean(&[]).is_err());
    }

    #[test]
    fn cell_examples() {
        assert_eq!(cell_of(p(0.005, 0.005), 0.01).unwrap(), GridCellId { row: 0, col: 0 });
        assert_eq!(cell_of(p(-0.005, 0.005), 0.01).unwrap(), GridCellId { row: -1, col: 0 });
        assert_eq!(
            cell_of(p(48.8566, 2.3522), 0.01).unwrap(),
            GridCellId { row: 4885, col: 235 }
        );
        assert!(cell_of(p(0.0, 0.0), 0.0).is_err());
        assert!(cell_of(p(0.0, 0.0), -1.0).is_err());
    }

    fn arb_point() -> impl Strategy<Value = GeoPoint> {
        (-90.0f64..=90.0, -180.0f64..=180.0).prop_map(|(lat, lon)| p(lat, lon))
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in arb_point(), b in arb_point(), c in arb_point()) {
            let ab = haversine_km(a, b);
            let bc = haversine_km(b, c);
            let ac = haversine_km(a, c);
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn symmetric(a in arb_point(), b in arb_point()) {
            prop_assert_eq!(haversine_km(a, b), haversine_km(b, a));
        }

        #[test]
        fn matches_vector_oracle(a in arb_point(), b in arb_point()) {
            let d = haversine_km(a, b);
            prop_assert!((d - vector_angle_km(a, b)).abs() < 1e-3);
        }

        #[test]
        fn mean_permutation_invariant(
            pts in prop::collection::vec((-60.0f64..60.0, -30.0f64..30.0), 1..12),
            rot in 0usize..12,
        ) {
            let pts: Vec<GeoPoint> = pts.into_iter().map(|(a, b)| p(a, b)).collect();
            let mut shuffled = pts.clone();
            shuffled.rotate_left(rot % pts.len());
            shuffled.reverse();
            prop_assert_eq!(spherical_mean(&pts).unwrap(), spherical_mean(&shuffled).unwrap());
        }

        #[test]
        fn small_neighbourhood_mean_is_arithmetic(
            base_lat in -60.0f64..60.0, base_lon in -170.0f64..170.0,
            offs in prop::collection::vec((-0.01f64..0.01, -0.01f64..0.01), 1..8),
        ) {
            let pts: Vec<GeoPoint> =
                offs.iter().map(|(a, b)| p(base_lat + a, base_lon + b)).collect();
            let m = spherical_mean(&pts).unwrap();
            let n = pts.len() as f64;
            let lat: f64 = pts.iter().map(|q| q.lat()).sum::<f64>() / n;
            let lon: f64 = pts.iter().map(|q| q.lon()).sum::<f64>() / n;
            prop_assert!((m.lat() - lat).abs() < 1e-4);
            prop_assert!((m.lon() - lon).abs() < 1e-4);
        }

        #[test]
        fn cell_neighbours_share(lat in -89.0f64..89.0, lon in -179.0f64..179.0) {
            let a = p(lat, lon);
            let id = cell_of(a, 0.01).unwrap();
            let corner_lat = id.row as f64 * 0.01;
            let corner_lon = id.col as f64 * 0.01;
            prop_assert!(corner_lat <= lat + 1e-12 && lat < corner_lat + 0.01 + 1e-12);
            prop_assert!(corner_lon <= lon + 1e-12 && lon < corner_lon + 0.01 + 1e-12);
        }
    }
}
