//! Deterministic stand-in models that never touch the network.

use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{fingerprint_parts, ModelReply};
use crate::dataset::ImageRecord;
use crate::geo::{EarthModel, GeoCoordinate};
use crate::prompt::ANSWER_LABEL;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MockKind {
    /// Answers with the exact ground truth.
    Oracle,
    /// Answers with the truth displaced by roughly `sigma_km`.
    Noisy { sigma_km: f64, seed: u64 },
    /// Declines to answer.
    Refuse,
}

pub const REFUSAL_TEXT: &str =
    "I'm unable to determine the location of this image with any confidence.";

pub fn oracle_text(record: &ImageRecord) -> String {
    format!(
        "The visual evidence matches the reference location exactly.\n{ANSWER_LABEL}{}",
        record.truth
    )
}

/// Guess displaced from the truth along a seeded bearing. The distance is
/// `sigma_km * (1 + z/4)` for standard normal `z`, clamped to
/// `[0, 3 * sigma_km]`, so it stays close to the configured magnitude.
pub fn noisy_guess(record: &ImageRecord, seed: u64, sigma_km: f64) -> GeoCoordinate {
    if sigma_km <= 0.0 {
        return record.truth;
    }
    let mut rng = seed::rng(seed, &record.id);
    let z: f64 = StandardNormal.sample(&mut rng);
    let bearing = Uniform::new(0.0, 360.0)
        .expect("valid range")
        .sample(&mut rng);
    let distance = (sigma_km * (1.0 + 0.25 * z)).clamp(0.0, 3.0 * sigma_km);
    record
        .truth
        .destination(bearing, distance, EarthModel::default())
}

pub fn noisy_text(record: &ImageRecord, seed: u64, sigma_km: f64) -> String {
    format!(
        "Judging by the vegetation and road furniture, my best estimate is:\n{ANSWER_LABEL}{}",
        noisy_guess(record, seed, sigma_km)
    )
}

pub fn answer(kind: MockKind, record: &ImageRecord) -> String {
    match kind {
        MockKind::Oracle => oracle_text(record),
        MockKind::Noisy { sigma_km, seed } => noisy_text(record, seed, sigma_km),
        MockKind::Refuse => REFUSAL_TEXT.to_string(),
    }
}

fn reply(endpoint: &str, record: &ImageRecord, raw_text: String) -> ModelReply {
    ModelReply {
        raw_text,
        latency_ms: 0,
        attempt_count: 1,
        endpoint: endpoint.to_string(),
        fingerprint: fingerprint_parts("", &record.image_uri),
    }
}

/// Reply carrying the record's exact ground truth.
pub fn mock_oracle(record: &ImageRecord) -> ModelReply {
    reply("mock:oracle", record, oracle_text(record))
}

/// Reply displaced from the truth; deterministic in `(record.id, seed)`.
pub fn mock_noisy(record: &ImageRecord, seed: u64, sigma_km: f64) -> ModelReply {
    reply("mock:noisy", record, noisy_text(record, seed, sigma_km))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine_distance;
    use crate::parser::parse_coordinates;

    fn record(id: &str, lat: f64, lon: f64) -> ImageRecord {
        ImageRecord::new(
            id,
            format!("{id}.jpg"),
            GeoCoordinate::new(lat, lon).unwrap(),
            "GB",
        )
    }

    #[test]
    fn oracle_contains_truth() {
        assert!(mock_oracle(&record("a", 0.0, 0.0))
            .raw_text
            .contains("0, 0"));
        assert!(mock_oracle(&record("a", 10.0, 20.0))
            .raw_text
            .contains("Latitude and Longitude: 10, 20"));
        let r = record("b", 51.5007, -0.1246);
        assert_eq!(
            parse_coordinates(&mock_oracle(&r).raw_text).coordinate(),
            Some(r.truth)
        );
        assert_eq!(mock_oracle(&r).raw_text, mock_oracle(&r).raw_text);
    }

    #[test]
    fn zero_sigma_is_exact() {
        let r = record("c", -33.8688, 151.2093);
        let parsed = parse_coordinates(&mock_noisy(&r, 5, 0.0).raw_text)
            .coordinate()
            .unwrap();
        assert_eq!(parsed, r.truth);
        assert_eq!(
            haversine_distance(parsed, r.truth, EarthModel::default()),
            0.0
        );
    }

    #[test]
    fn noisy_error_band() {
        for i in 0..1000 {
            let r = record(
                &format!("r{i}"),
                (i as f64 * 0.17) % 170.0 - 85.0,
                (i as f64 * 7.3) % 360.0 - 180.0,
            );
            let guess = parse_coordinates(&mock_noisy(&r, 42, 10.0).raw_text)
                .coordinate()
                .unwrap();
            let d = haversine_distance(guess, r.truth, EarthModel::default());
            assert!((0.0..=30.0).contains(&d), "record {i}: {d} km");
        }
    }

    #[test]
    fn noisy_is_deterministic() {
        let r = record("d", 12.0, 34.0);
        assert_eq!(mock_noisy(&r, 1, 10.0), mock_noisy(&r, 1, 10.0));
        assert_ne!(
            mock_noisy(&r, 1, 10.0).raw_text,
            mock_noisy(&r, 2, 10.0).raw_text
        );
    }
}
