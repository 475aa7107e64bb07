//! Campaigns over (endpoints × strategies × records), and their aggregates.

mod aggregate;
mod outcome;
mod report;

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

pub use aggregate::{
    aggregate, pairwise_sum, EvaluationReport, FailurePolicy, ReportRow, DEFAULT_PENALTY_KM,
};
pub use outcome::{load_outcomes, sort_canonical, FailureKind, OutcomeSink, PredictionOutcome};
pub(crate) use report::one_decimal;
pub use report::{
    emit_plot_data, latex_row, render_report, ReportFormat, CSV_HEADER, PLOT_METRICS,
};

use crate::dataset::ImageRecord;
use crate::gateway::{fingerprint, Gateway, GatewayError};
use crate::geo::EarthModel;
use crate::par::bounded_map;
use crate::prompt::{render, PromptError, PromptStrategy, RenderedPrompt, StrategyKind};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid campaign: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("writing outcomes: {0}")]
    Io(#[from] std::io::Error),
    #[error("no outcomes to aggregate")]
    EmptyOutcomes,
    #[error("cannot merge reports built with different failure policies")]
    PolicyMismatch,
}

#[derive(Default)]
pub struct CampaignOptions<'a> {
    /// Outcomes from an earlier run; matching (endpoint, record,
    /// fingerprint) entries are reused instead of re-querying. Errored
    /// outcomes are always retried.
    pub prior: &'a [PredictionOutcome],
    /// Receives each fresh outcome as soon as it is scored.
    pub sink: Option<&'a OutcomeSink>,
    pub earth: EarthModel,
}

struct Job<'a> {
    record: &'a ImageRecord,
    kind: StrategyKind,
    prompt: RenderedPrompt,
    fingerprint: String,
}

/// Queries every endpoint with every strategy on every record. Endpoints
/// run concurrently, each with at most `max_in_flight` requests. Only
/// configuration problems abort; per-item failures become outcomes.
/// Output is in canonical (endpoint, strategy, record id) order.
pub fn run_campaign(
    gateway: &Gateway,
    test_set: &[ImageRecord],
    endpoints: &[String],
    strategies: &[PromptStrategy],
    options: &CampaignOptions<'_>,
) -> Result<Vec<PredictionOutcome>, EvalError> {
    if test_set.is_empty() {
        return Err(EvalError::Config("test set is empty".into()));
    }
    if endpoints.is_empty() {
        return Err(EvalError::Config("no endpoints selected".into()));
    }
    if strategies.is_empty() {
        return Err(EvalError::Config("no strategies selected".into()));
    }
    let mut kinds = BTreeSet::new();
    for s in strategies {
        if !StrategyKind::EVALUATION.contains(&s.kind) {
            return Err(EvalError::Config(format!(
                "{} is not an evaluation strategy",
                s.kind.as_str()
            )));
        }
        if !kinds.insert(s.kind) {
            return Err(EvalError::Config(format!(
                "strategy {} listed twice",
                s.kind.as_str()
            )));
        }
    }
    let mut seen = BTreeSet::new();
    let mut limits = Vec::with_capacity(endpoints.len());
    for name in endpoints {
        if !seen.insert(name) {
            return Err(EvalError::Config(format!("endpoint {name:?} listed twice")));
        }
        let config = gateway
            .endpoints()
            .find(|c| &c.name == name)
            .ok_or_else(|| GatewayError::UnknownEndpoint(name.clone()))?;
        limits.push(config.max_in_flight);
    }

    let mut jobs = Vec::with_capacity(strategies.len() * test_set.len());
    for strategy in strategies {
        for record in test_set {
            let prompt = render(strategy, &record.image_uri)?;
            jobs.push(Job {
                record,
                kind: strategy.kind,
                fingerprint: fingerprint(&prompt),
                prompt,
            });
        }
    }

    let prior: HashMap<(&str, &str, &str), &PredictionOutcome> = options
        .prior
        .iter()
        .filter(|o| !o.is_error())
        .map(|o| {
            (
                (
                    o.endpoint.as_str(),
                    o.record_id.as_str(),
                    o.fingerprint.as_str(),
                ),
                o,
            )
        })
        .collect();

    let per_endpoint: Vec<Result<Vec<PredictionOutcome>, std::io::Error>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = endpoints
                .iter()
                .zip(&limits)
                .map(|(name, &limit)| {
                    let jobs = &jobs;
                    let prior = &prior;
                    scope.spawn(move || {
                        bounded_map(jobs, limit, |job| {
                            let key = (
                                name.as_str(),
                                job.record.id.as_str(),
                                job.fingerprint.as_str(),
                            );
                            if let Some(&done) = prior.get(&key) {
                                if done.strategy == job.kind {
                                    return Ok(done.clone());
                                }
                            }
                            let outcome = match gateway.query(name, &job.prompt, job.record) {
                                Ok(reply) => PredictionOutcome::scored(
                                    job.record,
                                    job.kind,
                                    &reply,
                                    options.earth,
                                ),
                                Err(e) => PredictionOutcome::errored(
                                    job.record,
                                    name,
                                    job.kind,
                                    &job.fingerprint,
                                    &e,
                                ),
                            };
                            if let Some(sink) = options.sink {
                                sink.write(&outcome)?;
                            }
                            Ok(outcome)
                        })
                        .into_iter()
                        .collect()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("campaign worker panicked"))
                .collect()
        });

    let mut outcomes = Vec::with_capacity(jobs.len() * endpoints.len());
    for batch in per_endpoint {
        outcomes.extend(batch?);
    }
    sort_canonical(&mut outcomes);
    Ok(outcomes)
}
