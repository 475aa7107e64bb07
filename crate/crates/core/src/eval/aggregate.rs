use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use super::{EvalError, PredictionOutcome};
use crate::geo::BoundaryLevel;
use crate::prompt::StrategyKind;

/// Distance charged to an unparsed reply under [`FailurePolicy::ScoreZero`].
pub const DEFAULT_PENALTY_KM: f64 = 2500.0;

/// How replies without a usable coordinate enter the aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Failures score 0, lie outside every boundary and count as
    /// `penalty_km` in the mean distance.
    ScoreZero { penalty_km: f64 },
    /// Failures are dropped from every mean and only show up in the
    /// failure rate.
    ExcludeAndReport,
}

impl Default for FailurePolicy {
    fn default() -> Self {
        FailurePolicy::ScoreZero {
            penalty_km: DEFAULT_PENALTY_KM,
        }
    }
}

impl FromStr for FailurePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "score-zero" | "zero" => Ok(FailurePolicy::default()),
            "exclude" | "exclude-and-report" => Ok(FailurePolicy::ExcludeAndReport),
            _ => Err(format!(
                "unknown failure policy {s:?} (expected score-zero or exclude)"
            )),
        }
    }
}

impl fmt::Display for FailurePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailurePolicy::ScoreZero { .. } => f.write_str("score-zero"),
            FailurePolicy::ExcludeAndReport => f.write_str("exclude"),
        }
    }
}

fn nan_from_null<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Aggregates for one (endpoint, strategy) pair. Percentages are in
/// `[0, 100]`. Metrics are NaN when nothing was scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub endpoint: String,
    /// `None` once strategies have been collapsed.
    pub strategy: Option<StrategyKind>,
    #[serde(deserialize_with = "nan_from_null")]
    pub street: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub city: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub region: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub country: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub continent: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub mean_distance_km: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub mean_geoscore: f64,
    pub failure_rate: f64,
    pub failures: usize,
    pub count: usize,
}

impl ReportRow {
    pub fn accuracy(&self, level: BoundaryLevel) -> f64 {
        match level {
            BoundaryLevel::Street => self.street,
            BoundaryLevel::City => self.city,
            BoundaryLevel::Region => self.region,
            BoundaryLevel::Country => self.country,
            BoundaryLevel::Continent => self.continent,
            BoundaryLevel::Beyond => 100.0,
        }
    }

    pub fn accuracies(&self) -> [f64; 5] {
        [
            self.street,
            self.city,
            self.region,
            self.country,
            self.continent,
        ]
    }

    fn set_accuracies(&mut self, a: [f64; 5]) {
        [
            self.street,
            self.city,
            self.region,
            self.country,
            self.continent,
        ] = a;
    }

    /// Number of outcomes the means were taken over.
    fn weight(&self, policy: FailurePolicy) -> usize {
        match policy {
            FailurePolicy::ScoreZero { .. } => self.count,
            FailurePolicy::ExcludeAndReport => self.count - self.failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub failure_policy: FailurePolicy,
    pub rows: Vec<ReportRow>,
}

impl EvaluationReport {
    pub fn total_count(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum()
    }

    /// Combines reports over disjoint outcome sets with count-weighted
    /// means, giving the same numbers as aggregating the union.
    pub fn merge(&self, other: &EvaluationReport) -> Result<EvaluationReport, EvalError> {
        if self.failure_policy != other.failure_policy {
            return Err(EvalError::PolicyMismatch);
        }
        let policy = self.failure_policy;
        let mut rows: BTreeMap<(String, Option<StrategyKind>), ReportRow> = BTreeMap::new();
        for row in self.rows.iter().chain(&other.rows) {
            let key = (row.endpoint.clone(), row.strategy);
            let merged = match rows.remove(&key) {
                Some(prev) => merge_rows(&prev, row, policy),
                None => row.clone(),
            };
            rows.insert(key, merged);
        }
        Ok(EvaluationReport {
            failure_policy: policy,
            rows: rows.into_values().collect(),
        })
    }

    /// One row per endpoint, pooling all of its strategies.
    pub fn collapse_strategies(&self) -> EvaluationReport {
        let policy = self.failure_policy;
        let mut rows: BTreeMap<String, ReportRow> = BTreeMap::new();
        for row in &self.rows {
            let mut row = row.clone();
            row.strategy = None;
            let merged = match rows.remove(&row.endpoint) {
                Some(prev) => merge_rows(&prev, &row, policy),
                None => row,
            };
            rows.insert(merged.endpoint.clone(), merged);
        }
        EvaluationReport {
            failure_policy: policy,
            rows: rows.into_values().collect(),
        }
    }
}

fn weighted(a: f64, wa: usize, b: f64, wb: usize) -> f64 {
    match (wa, wb) {
        (0, 0) => f64::NAN,
        (0, _) => b,
        (_, 0) => a,
        _ => (a * wa as f64 + b * wb as f64) / (wa + wb) as f64,
    }
}

fn merge_rows(a: &ReportRow, b: &ReportRow, policy: FailurePolicy) -> ReportRow {
    let (wa, wb) = (a.weight(policy), b.weight(policy));
    let mut out = a.clone();
    let (xa, xb) = (a.accuracies(), b.accuracies());
    out.set_accuracies(std::array::from_fn(|i| weighted(xa[i], wa, xb[i], wb)));
    out.mean_distance_km = weighted(a.mean_distance_km, wa, b.mean_distance_km, wb);
    out.mean_geoscore = weighted(a.mean_geoscore, wa, b.mean_geoscore, wb);
    out.count = a.count + b.count;
    out.failures = a.failures + b.failures;
    out.failure_rate = 100.0 * out.failures as f64 / out.count as f64;
    out
}

/// Pairwise (cascade) summation; error grows with log n rather than n.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        pairwise_sum(xs) / xs.len() as f64
    }
}

#[derive(Default)]
struct Group {
    distances: Vec<f64>,
    scores: Vec<f64>,
    within: [usize; 5],
    failures: usize,
    count: usize,
}

/// Per-(endpoint, strategy) aggregates. Outcomes are visited in canonical
/// order, so the result does not depend on how they were produced.
pub fn aggregate(
    outcomes: &[PredictionOutcome],
    policy: FailurePolicy,
) -> Result<EvaluationReport, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::EmptyOutcomes);
    }
    let mut order: Vec<&PredictionOutcome> = outcomes.iter().collect();
    order.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let mut groups: BTreeMap<(&str, StrategyKind), Group> = BTreeMap::new();
    for o in order {
        let g = groups.entry((o.endpoint.as_str(), o.strategy)).or_default();
        g.count += 1;
        match (o.distance_km, o.geoscore) {
            (Some(d), Some(s)) => {
                g.distances.push(d);
                g.scores.push(s);
                for (slot, level) in g.within.iter_mut().zip(BoundaryLevel::BOUNDED) {
                    if level.contains(d) {
                        *slot += 1;
                    }
                }
            }
            _ => {
                g.failures += 1;
                if let FailurePolicy::ScoreZero { penalty_km } = policy {
                    g.distances.push(penalty_km);
                    g.scores.push(0.0);
                }
            }
        }
    }

    let rows = groups
        .into_iter()
        .map(|((endpoint, strategy), g)| {
            let denom = g.scores.len();
            let pct = |c: usize| {
                if denom == 0 {
                    f64::NAN
                } else {
                    100.0 * c as f64 / denom as f64
                }
            };
            ReportRow {
                endpoint: endpoint.to_string(),
                strategy: Some(strategy),
                street: pct(g.within[0]),
                city: pct(g.within[1]),
                region: pct(g.within[2]),
                country: pct(g.within[3]),
                continent: pct(g.within[4]),
                mean_distance_km: mean(&g.distances),
                mean_geoscore: mean(&g.scores),
                failure_rate: 100.0 * g.failures as f64 / g.count as f64,
                failures: g.failures,
                count: g.count,
            }
        })
        .collect();
    Ok(EvaluationReport {
        failure_policy: policy,
        rows,
    })
}
