//! Head-to-head rounds scored by GeoScore, in the style of GeoGuessr duels.

use std::fmt::Write as _;
use std::io::BufRead;

use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{one_decimal, ReportFormat};
use crate::geo::{geoscore, haversine_distance, EarthModel, GeoCoordinate};
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum DuelError {
    #[error("a match needs at least one round")]
    NoRounds,
    #[error("replay has {guesses} guesses for {rounds} rounds")]
    ReplayLength { rounds: usize, guesses: usize },
    #[error("invalid opponent model: {0}")]
    Opponent(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundResult {
    Agent,
    Opponent,
    Draw,
}

/// One scored round. A missing guess scores 0 and has no distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelRound {
    pub index: usize,
    pub truth: GeoCoordinate,
    pub agent_guess: Option<GeoCoordinate>,
    pub opponent_guess: Option<GeoCoordinate>,
    pub agent_distance_km: Option<f64>,
    pub opponent_distance_km: Option<f64>,
    pub agent_score: f64,
    pub opponent_score: f64,
    pub result: RoundResult,
}

fn side(truth: GeoCoordinate, guess: Option<GeoCoordinate>) -> (Option<f64>, f64) {
    match guess {
        Some(g) => {
            let d = haversine_distance(truth, g, EarthModel::default());
            (
                Some(d),
                geoscore(d).expect("haversine distances are non-negative"),
            )
        }
        None => (None, 0.0),
    }
}

impl DuelRound {
    pub fn score(
        index: usize,
        truth: GeoCoordinate,
        agent: Option<GeoCoordinate>,
        opponent: Option<GeoCoordinate>,
    ) -> Self {
        let (agent_distance_km, agent_score) = side(truth, agent);
        let (opponent_distance_km, opponent_score) = side(truth, opponent);
        let result = if agent_score > opponent_score {
            RoundResult::Agent
        } else if opponent_score > agent_score {
            RoundResult::Opponent
        } else {
            RoundResult::Draw
        };
        DuelRound {
            index,
            truth,
            agent_guess: agent,
            opponent_guess: opponent,
            agent_distance_km,
            opponent_distance_km,
            agent_score,
            opponent_score,
            result,
        }
    }

    /// The same round with the two sides exchanged.
    pub fn swapped(&self) -> Self {
        DuelRound::score(
            self.index,
            self.truth,
            self.opponent_guess,
            self.agent_guess,
        )
    }
}

/// Where the opponent's guesses come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpponentModel {
    /// Always exactly `distance_km` off, along a seeded random bearing.
    FixedError { distance_km: f64, seed: u64 },
    /// Error distance `median_km * exp(sigma * z)`, `z` standard normal.
    LogNormalError {
        median_km: f64,
        sigma: f64,
        seed: u64,
    },
    /// Recorded guesses, one per round.
    Replay { guesses: Vec<Option<GeoCoordinate>> },
}

impl OpponentModel {
    fn validate(&self, rounds: usize) -> Result<(), DuelError> {
        match *self {
            OpponentModel::FixedError { distance_km, .. }
                if !(distance_km >= 0.0 && distance_km.is_finite()) =>
            {
                Err(DuelError::Opponent(format!(
                    "distance_km must be non-negative, got {distance_km}"
                )))
            }
            OpponentModel::LogNormalError {
                median_km, sigma, ..
            } if !(median_km > 0.0
                && median_km.is_finite()
                && sigma >= 0.0
                && sigma.is_finite()) =>
            {
                Err(DuelError::Opponent(format!(
                    "need median_km > 0 and sigma >= 0, got {median_km} and {sigma}"
                )))
            }
            OpponentModel::Replay { ref guesses } if guesses.len() != rounds => {
                Err(DuelError::ReplayLength {
                    rounds,
                    guesses: guesses.len(),
                })
            }
            _ => Ok(()),
        }
    }

    fn guess(&self, index: usize, truth: GeoCoordinate) -> Option<GeoCoordinate> {
        let displaced = |seed: u64, distance: f64| {
            let mut rng = seed::rng(seed, &format!("round-{index}"));
            let bearing = Uniform::new(0.0, 360.0)
                .expect("valid range")
                .sample(&mut rng);
            (distance, bearing, rng)
        };
        match *self {
            OpponentModel::FixedError { distance_km, seed } => {
                let (d, bearing, _) = displaced(seed, distance_km);
                Some(truth.destination(bearing, d, EarthModel::default()))
            }
            OpponentModel::LogNormalError {
                median_km,
                sigma,
                seed,
            } => {
                let (_, bearing, mut rng) = displaced(seed, 0.0);
                let z: f64 = StandardNormal.sample(&mut rng);
                let d = (median_km * (sigma * z).exp())
                    .min(crate::geo::max_distance_km(EarthModel::default()));
                Some(truth.destination(bearing, d, EarthModel::default()))
            }
            OpponentModel::Replay { ref guesses } => guesses[index],
        }
    }
}

/// Plays each (truth, agent guess) round against the opponent model.
pub fn play_match(
    rounds: &[(GeoCoordinate, Option<GeoCoordinate>)],
    opponent: &OpponentModel,
) -> Result<Vec<DuelRound>, DuelError> {
    if rounds.is_empty() {
        return Err(DuelError::NoRounds);
    }
    opponent.validate(rounds.len())?;
    Ok(rounds
        .iter()
        .enumerate()
        .map(|(i, &(truth, agent))| DuelRound::score(i, truth, agent, opponent.guess(i, truth)))
        .collect())
}

/// One line of a match file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRound {
    pub truth: GeoCoordinate,
    #[serde(default)]
    pub agent_guess: Option<GeoCoordinate>,
    #[serde(default)]
    pub opponent_guess: Option<GeoCoordinate>,
}

/// Reads match rounds from JSONL; blank lines are skipped.
pub fn read_match<R: BufRead>(reader: R) -> Result<Vec<MatchRound>, DuelError> {
    let mut rounds = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DuelError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        rounds.push(
            serde_json::from_str(&line).map_err(|e| DuelError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(rounds)
}

/// Replay opponent built from the `opponent_guess` fields of a match file.
pub fn replay_opponent(rounds: &[MatchRound]) -> OpponentModel {
    OpponentModel::Replay {
        guesses: rounds.iter().map(|r| r.opponent_guess).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideStats {
    pub average_score: f64,
    pub wins: usize,
    /// Percentage of decided (non-drawn) rounds; `None` if every round was
    /// drawn.
    pub win_rate: Option<f64>,
    pub closest_km: Option<f64>,
    pub farthest_km: Option<f64>,
    pub misses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelSummary {
    pub rounds: usize,
    pub draws: usize,
    pub agent: SideStats,
    pub opponent: SideStats,
}

impl DuelSummary {
    pub fn swapped(&self) -> Self {
        DuelSummary {
            rounds: self.rounds,
            draws: self.draws,
            agent: self.opponent.clone(),
            opponent: self.agent.clone(),
        }
    }
}

fn side_stats(
    rounds: &[DuelRound],
    wins: usize,
    decided: usize,
    pick: impl Fn(&DuelRound) -> (f64, Option<f64>),
) -> SideStats {
    let scores: Vec<f64> = rounds.iter().map(|r| pick(r).0).collect();
    let distances: Vec<f64> = rounds.iter().filter_map(|r| pick(r).1).collect();
    SideStats {
        average_score: crate::eval::pairwise_sum(&scores) / scores.len() as f64,
        wins,
        win_rate: (decided > 0).then(|| 100.0 * wins as f64 / decided as f64),
        closest_km: distances.iter().copied().reduce(f64::min),
        farthest_km: distances.iter().copied().reduce(f64::max),
        misses: rounds.len() - distances.len(),
    }
}

/// Averages, win rates over decided rounds, and distance extremes per side.
pub fn summarize(rounds: &[DuelRound]) -> Result<DuelSummary, DuelError> {
    if rounds.is_empty() {
        return Err(DuelError::NoRounds);
    }
    let count = |r: RoundResult| rounds.iter().filter(|x| x.result == r).count();
    let (agent_wins, opponent_wins, draws) = (
        count(RoundResult::Agent),
        count(RoundResult::Opponent),
        count(RoundResult::Draw),
    );
    let decided = agent_wins + opponent_wins;
    Ok(DuelSummary {
        rounds: rounds.len(),
        draws,
        agent: side_stats(rounds, agent_wins, decided, |r| {
            (r.agent_score, r.agent_distance_km)
        }),
        opponent: side_stats(rounds, opponent_wins, decided, |r| {
            (r.opponent_score, r.opponent_distance_km)
        }),
    })
}

/// Column headings for the two sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuelLabels {
    pub agent: String,
    pub opponent: String,
}

impl Default for DuelLabels {
    fn default() -> Self {
        DuelLabels {
            agent: "Agent".into(),
            opponent: "Opponent".into(),
        }
    }
}

fn opt(x: Option<f64>, f: fn(f64) -> String) -> String {
    x.map_or_else(|| "n/a".to_string(), f)
}

fn two_decimals(x: f64) -> String {
    format!("{x:.2}")
}

fn summary_rows(s: &DuelSummary) -> [(&'static str, &'static str, String, String); 4] {
    [
        (
            "Average Score",
            "average_score",
            one_decimal(s.agent.average_score),
            one_decimal(s.opponent.average_score),
        ),
        (
            "Win Rate (%)",
            "win_rate",
            opt(s.agent.win_rate, two_decimals),
            opt(s.opponent.win_rate, two_decimals),
        ),
        (
            "Closest Distance (km)",
            "closest_km",
            opt(s.agent.closest_km, one_decimal),
            opt(s.opponent.closest_km, one_decimal),
        ),
        (
            "Farthest Distance (km)",
            "farthest_km",
            opt(s.agent.farthest_km, one_decimal),
            opt(s.opponent.farthest_km, one_decimal),
        ),
    ]
}

pub fn summary_report(summary: &DuelSummary, labels: &DuelLabels, format: ReportFormat) -> String {
    let rows = summary_rows(summary);
    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            writeln!(
                out,
                "| Competitor Type | {} | {} |",
                labels.agent, labels.opponent
            )
            .unwrap();
            writeln!(out, "| --- | ---: | ---: |").unwrap();
            for (label, _, a, b) in &rows {
                writeln!(out, "| {label} | {a} | {b} |").unwrap();
            }
            if summary.draws > 0 {
                writeln!(out).unwrap();
                writeln!(
                    out,
                    "Draws: {} of {} rounds, excluded from the win rates.",
                    summary.draws, summary.rounds
                )
                .unwrap();
            }
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["metric", labels.agent.as_str(), labels.opponent.as_str()])
                .unwrap();
            for (_, key, a, b) in &rows {
                w.write_record([*key, a.as_str(), b.as_str()]).unwrap();
            }
            w.write_record([
                "draws",
                &summary.draws.to_string(),
                &summary.draws.to_string(),
            ])
            .unwrap();
            out = String::from_utf8(w.into_inner().unwrap()).unwrap();
        }
        ReportFormat::Json => {
            out = serde_json::to_string_pretty(summary).expect("summaries serialize") + "\n";
        }
        ReportFormat::Latex => {
            writeln!(out, "\\begin{{tabular}}{{lcc}}").unwrap();
            writeln!(out, "\\toprule").unwrap();
            writeln!(
                out,
                "Competitor Type & {} & {} \\\\",
                labels.agent, labels.opponent
            )
            .unwrap();
            writeln!(out, "\\midrule").unwrap();
            for (label, _, a, b) in &rows {
                writeln!(out, "{label} & {a} & {b} \\\\").unwrap();
            }
            writeln!(out, "\\bottomrule").unwrap();
            writeln!(out, "\\end{{tabular}}").unwrap();
        }
    }
    out
}
