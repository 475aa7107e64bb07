use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dataset::ImageRecord;
use crate::gateway::{GatewayError, ModelReply};
use crate::geo::{
    classify_boundary, geoscore, haversine_distance, BoundaryLevel, EarthModel, GeoCoordinate,
};
use crate::parser::{parse_coordinates, ParseResult};
use crate::prompt::StrategyKind;

/// Why an outcome carries no score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The reply contained no coordinate pair.
    NoCandidate,
    /// The reply only contained pairs outside the valid ranges.
    OutOfRange,
    /// The endpoint could not be queried successfully.
    Gateway,
}

/// One (endpoint, strategy, record) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub record_id: String,
    pub endpoint: String,
    pub strategy: StrategyKind,
    pub fingerprint: String,
    pub truth: GeoCoordinate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse: Option<ParseResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<GeoCoordinate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geoscore: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryLevel>,
    pub latency_ms: u64,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PredictionOutcome {
    /// Scores a model reply against the record's truth.
    pub fn scored(
        record: &ImageRecord,
        strategy: StrategyKind,
        reply: &ModelReply,
        earth: EarthModel,
    ) -> Self {
        let parse = parse_coordinates(&reply.raw_text);
        let mut outcome = PredictionOutcome {
            record_id: record.id.clone(),
            endpoint: reply.endpoint.clone(),
            strategy,
            fingerprint: reply.fingerprint.clone(),
            truth: record.truth,
            raw_text: Some(reply.raw_text.clone()),
            parse: Some(parse),
            prediction: None,
            distance_km: None,
            geoscore: None,
            boundary: None,
            latency_ms: reply.latency_ms,
            attempts: reply.attempt_count,
            failure: None,
            error: None,
        };
        match parse.coordinate() {
            Some(guess) => {
                let d = haversine_distance(record.truth, guess, earth);
                outcome.prediction = Some(guess);
                outcome.distance_km = Some(d);
                outcome.geoscore = Some(geoscore(d).expect("haversine distances are non-negative"));
                outcome.boundary =
                    Some(classify_boundary(d).expect("haversine distances are non-negative"));
            }
            None => {
                outcome.failure = Some(match parse.failure_reason() {
                    Some("out_of_range") => FailureKind::OutOfRange,
                    _ => FailureKind::NoCandidate,
                });
            }
        }
        outcome
    }

    /// Outcome for a query the gateway gave up on.
    pub fn errored(
        record: &ImageRecord,
        endpoint: &str,
        strategy: StrategyKind,
        fingerprint: &str,
        err: &GatewayError,
    ) -> Self {
        let raw_text = match err {
            GatewayError::MalformedEndpointResponse { body } => Some(body.clone()),
            _ => None,
        };
        PredictionOutcome {
            record_id: record.id.clone(),
            endpoint: endpoint.to_string(),
            strategy,
            fingerprint: fingerprint.to_string(),
            truth: record.truth,
            raw_text,
            parse: None,
            prediction: None,
            distance_km: None,
            geoscore: None,
            boundary: None,
            latency_ms: 0,
            attempts: match err {
                GatewayError::ExhaustedRetries { attempts, .. } => *attempts,
                _ => 1,
            },
            failure: Some(FailureKind::Gateway),
            error: Some(format!("{}: {err}", err.kind())),
        }
    }

    pub fn is_scored(&self) -> bool {
        self.distance_km.is_some()
    }

    /// The endpoint itself failed, as opposed to answering unparsably.
    pub fn is_error(&self) -> bool {
        self.failure == Some(FailureKind::Gateway)
    }

    pub(crate) fn sort_key(&self) -> (&str, StrategyKind, &str) {
        (&self.endpoint, self.strategy, &self.record_id)
    }
}

/// Sorts into the canonical (endpoint, strategy, record id) order.
pub fn sort_canonical(outcomes: &mut [PredictionOutcome]) {
    outcomes.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Append-only JSONL sink; each line is flushed as it is written so an
/// interrupted campaign leaves every finished outcome on disk.
pub struct OutcomeSink {
    out: Mutex<Box<dyn Write + Send>>,
}

impl OutcomeSink {
    pub fn new<W: Write + Send + 'static>(out: W) -> Self {
        OutcomeSink {
            out: Mutex::new(Box::new(out)),
        }
    }

    pub fn append_to(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(OutcomeSink::new(file))
    }

    pub fn write(&self, outcome: &PredictionOutcome) -> io::Result<()> {
        let line = serde_json::to_string(outcome).expect("outcomes serialize");
        let mut out = self.out.lock().unwrap();
        writeln!(out, "{line}")?;
        out.flush()
    }
}

/// Reads an outcomes log. A torn final line (from an interrupted write) is
/// ignored; any other malformed line is an error.
pub fn load_outcomes(path: &Path) -> io::Result<Vec<PredictionOutcome>> {
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut outcomes = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(o) => outcomes.push(o),
            Err(_) if Some(i) == last => break,
            Err(e) => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}: line {}: {e}", path.display(), i + 1),
                ))
            }
        }
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock_oracle;

    fn record() -> ImageRecord {
        ImageRecord::new(
            "r",
            "r.jpg",
            GeoCoordinate::new(51.5007, -0.1246).unwrap(),
            "GB",
        )
    }

    fn reply(text: &str) -> ModelReply {
        ModelReply {
            raw_text: text.into(),
            latency_ms: 3,
            attempt_count: 1,
            endpoint: "e".into(),
            fingerprint: "f".into(),
        }
    }

    #[test]
    fn scored_fields_present_iff_parsed() {
        let ok = PredictionOutcome::scored(
            &record(),
            StrategyKind::ZeroShot,
            &mock_oracle(&record()),
            EarthModel::default(),
        );
        assert_eq!(ok.distance_km, Some(0.0));
        assert_eq!(ok.geoscore, Some(5000.0));
        assert_eq!(ok.boundary, Some(BoundaryLevel::Street));
        assert!(ok.failure.is_none());

        let none = PredictionOutcome::scored(
            &record(),
            StrategyKind::ZeroShot,
            &reply("somewhere in Europe"),
            EarthModel::default(),
        );
        assert_eq!(none.failure, Some(FailureKind::NoCandidate));
        assert!(none.distance_km.is_none() && none.geoscore.is_none() && none.boundary.is_none());

        let bad = PredictionOutcome::scored(
            &record(),
            StrategyKind::ZeroShot,
            &reply("Latitude and Longitude: 95.0, 10.0"),
            EarthModel::default(),
        );
        assert_eq!(bad.failure, Some(FailureKind::OutOfRange));
        assert!(!bad.is_error());
    }

    #[test]
    fn log_round_trip_tolerates_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.jsonl");
        let sink = OutcomeSink::append_to(&path).unwrap();
        let a = PredictionOutcome::scored(
            &record(),
            StrategyKind::FewShot,
            &reply("Latitude and Longitude: 48.8584, 2.2945"),
            EarthModel::default(),
        );
        sink.write(&a).unwrap();
        drop(sink);
        std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap()
            .write_all(b"{\"record_id\":\"x\",\"endp")
            .unwrap();
        assert_eq!(load_outcomes(&path).unwrap(), vec![a]);

        std::fs::write(&path, "garbage\n{}\n").unwrap();
        assert!(load_outcomes(&path).is_err());
    }
}
