use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius (IUGG) in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Great-circle length of one degree of arc on the mean sphere.
pub const KM_PER_DEGREE: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("invalid raster: {0}")]
    Raster(String),
}

/// A validated WGS84-style coordinate in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;
    fn try_from(raw: RawPoint) -> Result<Self, GeoError> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lat: p.lat, lon: p.lon }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        Ok(Self { lat, lon })
    }

    #[inline]
    pub fn lat(&self) -> f64 {
        self.lat
    }

    #[inline]
    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Point reached by travelling `distance_km` from `self` along the
    /// initial bearing `bearing_deg` (clockwise from north) on the sphere.
    pub fn destination(&self, bearing_deg: f64, distance_km: f64) -> GeoPoint {
        let delta = distance_km / EARTH_RADIUS_KM;
        let theta = bearing_deg.to_radians();
        let phi1 = self.lat.to_radians();
        let lambda1 = self.lon.to_radians();
        let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos();
        let phi2 = sin_phi2.clamp(-1.0, 1.0).asin();
        let lambda2 = lambda1
            + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * sin_phi2);
        let mut lon = lambda2.to_degrees();
        lon = (lon + 540.0).rem_euclid(360.0) - 180.0;
        GeoPoint {
            lat: phi2.to_degrees().clamp(-90.0, 90.0),
            lon,
        }
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    if a == b {
        return 0.0;
    }
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Inclusive latitude/longitude box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.lat_min && p.lat <= self.lat_max && p.lon >= self.lon_min && p.lon <= self.lon_max
    }

    pub fn contains_raw(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        assert_eq!(haversine_km(p(5.35, -4.02), p(5.35, -4.02)), 0.0);
    }

    #[test]
    fn one_degree_on_equator() {
        // closed form: 2*pi*R/360
        let expected = 2.0 * std::f64::consts::PI * 6371.0088 / 360.0;
        assert!((expected - 111.195).abs() < 0.001);
        let d = haversine_km(p(0.0, 0.0), p(0.0, 1.0));
        assert!((d - 111.195).abs() < 0.001, "{d}");
        assert!((d - expected).abs() < 1e-9);
    }

    #[test]
    fn small_offset_inside_one_km() {
        // 0.009 deg of arc = 0.009 * 111.19508... = 1.000756 km
        let closed_form = 0.009 * KM_PER_DEGREE;
        assert!((closed_form - 1.000756).abs() < 1e-6);
        let d = haversine_km(p(0.0, 0.0), p(0.009, 0.0));
        assert!((d - closed_form).abs() < 1e-9);
        // strictly "less than 1 km" is false at 1.0008 km; at 0.0089 deg it holds
        assert!(!(d < 1.0));
        assert!(haversine_km(p(0.0, 0.0), p(0.0089, 0.0)) < 1.0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert_eq!(GeoPoint::new(91.0, 0.0), Err(GeoError::Latitude(91.0)));
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn destination_round_trips_distance() {
        let a = p(5.35, -4.02);
        for bearing in [0.0, 45.0, 133.0, 270.0] {
            let b = a.destination(bearing, 2.5);
            assert!((haversine_km(a, b) - 2.5).abs() < 1e-9);
        }
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-90.0f64..=90.0, -180.0f64..=180.0).prop_map(|(lat, lon)| p(lat, lon))
    }

    proptest! {
        #[test]
        fn symmetric_and_non_negative(a in point(), b in point()) {
            let ab = haversine_km(a, b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, haversine_km(b, a));
        }

        #[test]
        fn zero_only_for_identical_points(
            a in (-89.9f64..89.9, -179.9f64..179.9),
            b in (-89.9f64..89.9, -179.9f64..179.9),
        ) {
            let (a, b) = (p(a.0, a.1), p(b.0, b.1));
            prop_assert_eq!(haversine_km(a, b) == 0.0, a == b);
        }

        #[test]
        fn triangle_inequality(a in point(), b in point(), c in point()) {
            let slack = 1e-9;
            prop_assert!(haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + slack);
        }
    }
}
