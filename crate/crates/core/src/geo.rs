//! Great-circle distance, GeoScore and administrative-boundary metrics.
//!
//! Everything here is a pure function over `Copy` values.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean spherical Earth radius in kilometers.
pub const MEAN_EARTH_RADIUS_KM: f64 = 6371.0;

/// Distance scale of the GeoScore exponential decay, in kilometers.
pub const GEOSCORE_SCALE_KM: f64 = 1492.7;

/// Score awarded for a perfect guess.
pub const GEOSCORE_MAX: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude out of range: {0} (expected -90..=90)")]
    LatitudeOutOfRange(f64),
    #[error("longitude is not finite: {0}")]
    LongitudeNotFinite(f64),
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("earth radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("no distances supplied")]
    EmptyDistances,
}

/// A validated latitude/longitude pair in degrees.
///
/// Latitude lies in `[-90, 90]`. Longitude is normalized into `[-180, 180)`;
/// values already inside that range are stored untouched so textual
/// round trips stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoordinate", into = "RawCoordinate")]
pub struct GeoCoordinate {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawCoordinate {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawCoordinate> for GeoCoordinate {
    type Error = GeoError;

    fn try_from(raw: RawCoordinate) -> Result<Self, Self::Error> {
        GeoCoordinate::new(raw.lat, raw.lon)
    }
}

impl From<GeoCoordinate> for RawCoordinate {
    fn from(c: GeoCoordinate) -> Self {
        RawCoordinate {
            lat: c.lat,
            lon: c.lon,
        }
    }
}

impl GeoCoordinate {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(GeoError::LatitudeOutOfRange(latitude));
        }
        if !longitude.is_finite() {
            return Err(GeoError::LongitudeNotFinite(longitude));
        }
        Ok(GeoCoordinate {
            lat: clean_zero(latitude),
            lon: clean_zero(normalize_longitude(longitude)),
        })
    }

    pub fn latitude(&self) -> f64 {
        self.lat
    }

    pub fn longitude(&self) -> f64 {
        self.lon
    }

    /// Point reached by travelling `distance_km` from `self` along the
    /// initial bearing `bearing_deg` (clockwise from north) on a sphere.
    pub fn destination(
        &self,
        bearing_deg: f64,
        distance_km: f64,
        earth: EarthModel,
    ) -> GeoCoordinate {
        if distance_km == 0.0 {
            return *self;
        }
        let delta = distance_km / earth.radius_km();
        let theta = bearing_deg.to_radians();
        let phi1 = self.lat.to_radians();
        let lambda1 = self.lon.to_radians();

        let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos();
        let phi2 = sin_phi2.clamp(-1.0, 1.0).asin();
        let y = theta.sin() * delta.sin() * phi1.cos();
        let x = delta.cos() - phi1.sin() * sin_phi2;
        let lambda2 = lambda1 + y.atan2(x);

        GeoCoordinate::new(phi2.to_degrees().clamp(-90.0, 90.0), lambda2.to_degrees())
            .expect("destination stays on the sphere")
    }
}

impl fmt::Display for GeoCoordinate {
    /// Renders `"lat, lon"` with the shortest decimal form that parses back
    /// to the same `f64`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.lat, self.lon)
    }
}

fn normalize_longitude(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        lon
    } else {
        (lon + 180.0).rem_euclid(360.0) - 180.0
    }
}

fn clean_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// Spherical Earth used for distance computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    radius_km: f64,
}

impl EarthModel {
    pub fn with_radius(radius_km: f64) -> Result<Self, GeoError> {
        if radius_km > 0.0 && radius_km.is_finite() {
            Ok(EarthModel { radius_km })
        } else {
            Err(GeoError::InvalidRadius(radius_km))
        }
    }

    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }
}

impl Default for EarthModel {
    fn default() -> Self {
        EarthModel {
            radius_km: MEAN_EARTH_RADIUS_KM,
        }
    }
}

/// Haversine great-circle distance in kilometers.
pub fn haversine_distance(a: GeoCoordinate, b: GeoCoordinate, earth: EarthModel) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let half_dphi = (phi2 - phi1) / 2.0;
    let half_dlambda = (b.lon - a.lon).to_radians() / 2.0;

    let v = half_dphi.sin().powi(2) + phi1.cos() * phi2.cos() * half_dlambda.sin().powi(2);
    2.0 * earth.radius_km * v.clamp(0.0, 1.0).sqrt().asin()
}

/// `5000 * exp(-d / 1492.7)`.
pub fn geoscore(distance_km: f64) -> Result<f64, GeoError> {
    check_distance(distance_km)?;
    Ok(GEOSCORE_MAX * (-distance_km / GEOSCORE_SCALE_KM).exp())
}

fn check_distance(distance_km: f64) -> Result<(), GeoError> {
    // NaN fails this comparison too
    if distance_km >= 0.0 {
        Ok(())
    } else {
        Err(GeoError::NegativeDistance(distance_km))
    }
}

/// Administrative scale a distance error falls within.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryLevel {
    Street,
    City,
    Region,
    Country,
    Continent,
    Beyond,
}

impl BoundaryLevel {
    /// The five bounded levels, tightest first.
    pub const BOUNDED: [BoundaryLevel; 5] = [
        BoundaryLevel::Street,
        BoundaryLevel::City,
        BoundaryLevel::Region,
        BoundaryLevel::Country,
        BoundaryLevel::Continent,
    ];

    /// Inclusive upper bound in kilometers; `None` for `Beyond`.
    pub fn threshold_km(self) -> Option<f64> {
        match self {
            BoundaryLevel::Street => Some(1.0),
            BoundaryLevel::City => Some(25.0),
            BoundaryLevel::Region => Some(200.0),
            BoundaryLevel::Country => Some(750.0),
            BoundaryLevel::Continent => Some(2500.0),
            BoundaryLevel::Beyond => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryLevel::Street => "street",
            BoundaryLevel::City => "city",
            BoundaryLevel::Region => "region",
            BoundaryLevel::Country => "country",
            BoundaryLevel::Continent => "continent",
            BoundaryLevel::Beyond => "beyond",
        }
    }

    /// Whether a distance counts as "within" this level.
    pub fn contains(self, distance_km: f64) -> bool {
        match self.threshold_km() {
            Some(t) => distance_km <= t,
            None => true,
        }
    }
}

impl fmt::Display for BoundaryLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tightest level whose threshold is `>= distance_km`.
pub fn classify_boundary(distance_km: f64) -> Result<BoundaryLevel, GeoError> {
    check_distance(distance_km)?;
    Ok(BoundaryLevel::BOUNDED
        .into_iter()
        .find(|level| level.contains(distance_km))
        .unwrap_or(BoundaryLevel::Beyond))
}

/// Percentage of distances within each bounded level (cumulative).
pub fn boundary_accuracies(distances: &[f64]) -> Result<BTreeMap<BoundaryLevel, f64>, GeoError> {
    if distances.is_empty() {
        return Err(GeoError::EmptyDistances);
    }
    let mut counts = [0usize; 5];
    for &d in distances {
        let level = classify_boundary(d)?;
        // a hit at level i counts for every looser level too
        for (i, slot) in counts.iter_mut().enumerate() {
            if BoundaryLevel::BOUNDED[i] >= level {
                *slot += 1;
            }
        }
    }
    let n = distances.len() as f64;
    Ok(BoundaryLevel::BOUNDED
        .into_iter()
        .zip(counts)
        .map(|(level, c)| (level, 100.0 * c as f64 / n))
        .collect())
}

/// Half the circumference: the largest possible great-circle distance.
pub fn max_distance_km(earth: EarthModel) -> f64 {
    PI * earth.radius_km
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(lat: f64, lon: f64) -> GeoCoordinate {
        GeoCoordinate::new(lat, lon).unwrap()
    }

    #[test]
    fn latitude_bounds() {
        assert!(GeoCoordinate::new(90.0, 0.0).is_ok());
        assert!(GeoCoordinate::new(-90.0, 0.0).is_ok());
        assert_eq!(
            GeoCoordinate::new(95.0, 0.0),
            Err(GeoError::LatitudeOutOfRange(95.0))
        );
        assert!(GeoCoordinate::new(f64::NAN, 0.0).is_err());
        assert!(GeoCoordinate::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn longitude_normalization() {
        assert_eq!(c(0.0, 190.0).longitude(), -170.0);
        assert_eq!(c(0.0, 180.0).longitude(), -180.0);
        assert_eq!(c(0.0, -180.0).longitude(), -180.0);
        assert_eq!(c(0.0, -0.1246).longitude(), -0.1246);
        assert_eq!(c(0.0, 540.0).longitude(), -180.0);
        assert_eq!(c(0.0, -190.0).longitude(), 170.0);
    }

    #[test]
    fn identical_points_are_zero() {
        let big_ben = c(51.5007, -0.1246);
        assert_eq!(
            haversine_distance(big_ben, big_ben, EarthModel::default()),
            0.0
        );
    }

    #[test]
    fn half_great_circle() {
        let d = haversine_distance(c(0.0, 0.0), c(0.0, 180.0), EarthModel::default());
        assert!((d - PI * 6371.0).abs() < 1e-9, "{d}");
        assert!((d - 20015.086796020572).abs() < 1e-9);
    }

    #[test]
    fn few_shot_example_points() {
        // 40-digit law-of-cosines evaluation: 16839.089657693044...
        let d = haversine_distance(
            c(51.5007, -0.1246),
            c(-38.6633, 143.1051),
            EarthModel::default(),
        );
        assert!((d - 16839.089657693044).abs() < 1e-7, "{d}");
    }

    #[test]
    fn geoscore_values() {
        assert_eq!(geoscore(0.0).unwrap(), 5000.0);
        assert!((geoscore(1492.7).unwrap() - 1839.3972058572116).abs() < 1e-9);
        assert!((geoscore(25.0).unwrap() - 4916.956482556049).abs() < 1e-9);
        assert_eq!(geoscore(-1.0), Err(GeoError::NegativeDistance(-1.0)));
        assert!(geoscore(f64::NAN).is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_boundary(0.5).unwrap(), BoundaryLevel::Street);
        assert_eq!(classify_boundary(1.0).unwrap(), BoundaryLevel::Street);
        assert_eq!(classify_boundary(25.0).unwrap(), BoundaryLevel::City);
        assert_eq!(classify_boundary(2500.0).unwrap(), BoundaryLevel::Continent);
        assert_eq!(classify_boundary(3000.0).unwrap(), BoundaryLevel::Beyond);
        assert!(classify_boundary(-0.1).is_err());
    }

    #[test]
    fn accuracies_examples() {
        // 30 km lies outside the 25 km city radius
        let acc = boundary_accuracies(&[0.5, 30.0, 3000.0]).unwrap();
        assert!((acc[&BoundaryLevel::Street] - 100.0 / 3.0).abs() < 1e-12);
        assert!((acc[&BoundaryLevel::City] - 100.0 / 3.0).abs() < 1e-12);
        for level in &BoundaryLevel::BOUNDED[2..] {
            assert!((acc[level] - 200.0 / 3.0).abs() < 1e-12);
        }
        let acc = boundary_accuracies(&[0.0, 0.0, 0.0]).unwrap();
        assert!(acc.values().all(|&p| p == 100.0));
        assert_eq!(boundary_accuracies(&[]), Err(GeoError::EmptyDistances));
        assert!(boundary_accuracies(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn thresholds_strictly_increase() {
        let t: Vec<f64> = BoundaryLevel::BOUNDED
            .iter()
            .map(|l| l.threshold_km().unwrap())
            .collect();
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t, vec![1.0, 25.0, 200.0, 750.0, 2500.0]);
    }

    #[test]
    fn destination_round_trip() {
        let start = c(48.8584, 2.2945);
        let earth = EarthModel::default();
        for bearing in [0.0, 45.0, 133.0, 270.0] {
            let end = start.destination(bearing, 10.0, earth);
            assert!((haversine_distance(start, end, earth) - 10.0).abs() < 1e-6);
        }
        assert_eq!(start.destination(12.0, 0.0, earth), start);
    }

    #[test]
    fn display_is_shortest_round_trip() {
        assert_eq!(c(51.5007, -0.1246).to_string(), "51.5007, -0.1246");
        assert_eq!(c(10.0, 20.0).to_string(), "10, 20");
        assert_eq!(c(-0.0, -0.0).to_string(), "0, 0");
    }

    #[test]
    fn radius_must_be_positive() {
        assert!(EarthModel::with_radius(0.0).is_err());
        assert!(EarthModel::with_radius(-3.0).is_err());
        assert_eq!(
            EarthModel::with_radius(6371.0).unwrap(),
            EarthModel::default()
        );
    }
}
