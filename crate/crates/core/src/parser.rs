//! Extraction of one coordinate pair from free-text model answers.
//!
//! Three recognition tiers are tried; the highest tier holding at least one
//! valid candidate wins, and within a tier the last occurrence wins:
//!
//! 1. labeled pairs (`Latitude and Longitude: 51.5007, -0.1246`,
//!    `latitude/longitude: ...`, separate `Latitude:` / `Longitude:` lines, or
//!    JSON-style `"latitude": .., "longitude": ..`)
//! 2. bare decimal pairs `s1, s2` with both parts carrying a fraction
//! 3. degree/minute/second pairs with hemisphere letters
//!
//! Parsing never fails: a missing or unusable answer is encoded in
//! [`ParseOutcome`].

use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoCoordinate;

const NUM: &str = r"[+\-−]?\d{1,3}(?:\.\d+)?";

static LABELED_PAIR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?i)(?:latitude\s*(?:and|&|/|,)\s*longitude|\blat\s*(?:/|,|and)\s*(?:lon|lng|long)\b)\s*(?:\([^)\n]{{0,40}}\))?[\s*_]*[:：=][\s*_]*({NUM})[ \t]*°?[ \t]*([NS]\b)?\s*,\s*({NUM})[ \t]*°?[ \t]*([EW]\b)?"
    ))
    .unwrap()
});

static LABELED_LINES: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r#"(?i)\blatitude["']?[\s*_]*[:：=][\s*_]*({NUM})[ \t]*°?[ \t]*([NS]\b)?[^\n]{{0,8}}\n?[\s*_\-"']*longitude["']?[\s*_]*[:：=][\s*_]*({NUM})[ \t]*°?[ \t]*([EW]\b)?"#
    ))
    .unwrap()
});

static BARE_PAIR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"({NUM})\s*,\s*({NUM})")).unwrap());

const DEG: &str = r"(\d{1,3}(?:\.\d+)?)\s*(?:°|º|˚|deg\b|d\b)?\s*(?:(\d{1,2}(?:\.\d+)?)\s*(?:′|'|’)\s*)?(?:(\d{1,2}(?:\.\d+)?)\s*(?:″|''|”|\x22)\s*)?";

static DMS_PAIR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"{DEG}([NSns])\b[\s,;/]*{DEG}([EWew])\b")).unwrap());

/// Which recognizer produced a candidate. Lower discriminant wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchTier {
    Labeled,
    DecimalPair,
    Dms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ParseOutcome {
    Located {
        coordinate: GeoCoordinate,
        tier: MatchTier,
    },
    NoCandidate,
    /// Only pair-shaped text with an invalid component was found; carries
    /// the last such pair.
    OutOfRange {
        latitude: f64,
        longitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    pub outcome: ParseOutcome,
    /// Byte offsets `[start, end)` of the chosen (or last rejected) pair.
    pub matched_span: Option<(usize, usize)>,
    /// Valid candidates in the winning tier.
    pub candidates_found: usize,
}

impl ParseResult {
    pub fn coordinate(&self) -> Option<GeoCoordinate> {
        match self.outcome {
            ParseOutcome::Located { coordinate, .. } => Some(coordinate),
            _ => None,
        }
    }

    /// More than one valid candidate competed; the last one was chosen.
    pub fn is_ambiguous(&self) -> bool {
        self.candidates_found > 1
    }

    pub fn failure_reason(&self) -> Option<&'static str> {
        match self.outcome {
            ParseOutcome::Located { .. } => None,
            ParseOutcome::NoCandidate => Some("no_candidate"),
            ParseOutcome::OutOfRange { .. } => Some("out_of_range"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    N,
    S,
    E,
    W,
}

impl Hemisphere {
    fn from_letter(s: &str) -> Option<Hemisphere> {
        match s {
            "N" | "n" => Some(Hemisphere::N),
            "S" | "s" => Some(Hemisphere::S),
            "E" | "e" => Some(Hemisphere::E),
            "W" | "w" => Some(Hemisphere::W),
            _ => None,
        }
    }

    fn negative(self) -> bool {
        matches!(self, Hemisphere::S | Hemisphere::W)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DmsError {
    #[error("minutes out of range: {0}")]
    Minutes(f64),
    #[error("seconds out of range: {0}")]
    Seconds(f64),
    #[error("degrees must be non-negative: {0}")]
    Degrees(f64),
}

/// `deg + min/60 + sec/3600`, negated for the southern and western
/// hemispheres.
pub fn dms_to_decimal(
    deg: u32,
    min: u32,
    sec: f64,
    hemisphere: Hemisphere,
) -> Result<f64, DmsError> {
    dms_components(f64::from(deg), f64::from(min), sec, hemisphere)
}

fn dms_components(deg: f64, min: f64, sec: f64, hemisphere: Hemisphere) -> Result<f64, DmsError> {
    // also rejects NaN
    if deg.is_nan() || deg < 0.0 {
        return Err(DmsError::Degrees(deg));
    }
    if !(0.0..60.0).contains(&min) {
        return Err(DmsError::Minutes(min));
    }
    if !(0.0..60.0).contains(&sec) {
        return Err(DmsError::Seconds(sec));
    }
    let magnitude = deg + min / 60.0 + sec / 3600.0;
    Ok(if hemisphere.negative() {
        -magnitude
    } else {
        magnitude
    })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    tier: MatchTier,
    span: (usize, usize),
    lat: f64,
    lon: f64,
    valid: bool,
}

/// Extracts the answer coordinate from `text`. Total over all inputs.
pub fn parse_coordinates(text: &str) -> ParseResult {
    let mut candidates = Vec::new();
    labeled_candidates(text, &mut candidates);
    bare_candidates(text, &mut candidates);
    dms_candidates(text, &mut candidates);

    for tier in [MatchTier::Labeled, MatchTier::DecimalPair, MatchTier::Dms] {
        let mut valid: Vec<&Candidate> = candidates
            .iter()
            .filter(|c| c.tier == tier && c.valid)
            .collect();
        if valid.is_empty() {
            continue;
        }
        valid.sort_by_key(|c| c.span);
        let last = valid[valid.len() - 1];
        return ParseResult {
            outcome: ParseOutcome::Located {
                coordinate: GeoCoordinate::new(last.lat, last.lon).expect("validated candidate"),
                tier,
            },
            matched_span: Some(last.span),
            candidates_found: valid.len(),
        };
    }

    match candidates.iter().max_by_key(|c| c.span) {
        Some(rejected) => ParseResult {
            outcome: ParseOutcome::OutOfRange {
                latitude: rejected.lat,
                longitude: rejected.lon,
            },
            matched_span: Some(rejected.span),
            candidates_found: 0,
        },
        None => ParseResult {
            outcome: ParseOutcome::NoCandidate,
            matched_span: None,
            candidates_found: 0,
        },
    }
}

fn number(s: &str) -> f64 {
    s.replace('−', "-").parse().unwrap_or(f64::NAN)
}

fn in_range(lat: f64, lon: f64) -> bool {
    (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
}

fn signed(value: f64, hemisphere: Option<regex::Match<'_>>) -> f64 {
    match hemisphere.and_then(|m| Hemisphere::from_letter(m.as_str())) {
        Some(h) if h.negative() => -value.abs(),
        Some(_) => value.abs(),
        None => value,
    }
}

fn span_of(caps: &Captures<'_>) -> (usize, usize) {
    let m = caps.get(0).unwrap();
    (m.start(), m.end())
}

fn labeled_candidates(text: &str, out: &mut Vec<Candidate>) {
    for re in [&*LABELED_PAIR, &*LABELED_LINES] {
        for caps in re.captures_iter(text) {
            let lat = signed(number(&caps[1]), caps.get(2));
            let lon = signed(number(&caps[3]), caps.get(4));
            out.push(Candidate {
                tier: MatchTier::Labeled,
                span: span_of(&caps),
                lat,
                lon,
                valid: in_range(lat, lon),
            });
        }
    }
}

fn bare_candidates(text: &str, out: &mut Vec<Candidate>) {
    let bytes = text.as_bytes();
    for caps in BARE_PAIR.captures_iter(text) {
        let (start, end) = span_of(&caps);
        let is_digit = |i: usize| bytes.get(i).is_some_and(u8::is_ascii_digit);
        let glued_before = start > 0
            && (is_digit(start - 1)
                || (bytes[start - 1] == b'.' && start > 1 && is_digit(start - 2)));
        let glued_after = is_digit(end) || (bytes.get(end) == Some(&b'.') && is_digit(end + 1));
        if glued_before || glued_after {
            continue;
        }
        if !caps[1].contains('.') || !caps[2].contains('.') {
            continue;
        }
        let lat = number(&caps[1]);
        let lon = number(&caps[2]);
        out.push(Candidate {
            tier: MatchTier::DecimalPair,
            span: (start, end),
            lat,
            lon,
            valid: in_range(lat, lon),
        });
    }
}

fn dms_value(caps: &Captures<'_>, first: usize) -> Option<f64> {
    let deg = number(&caps[first]);
    let min = caps.get(first + 1).map_or(0.0, |m| number(m.as_str()));
    let sec = caps.get(first + 2).map_or(0.0, |m| number(m.as_str()));
    let hemisphere = Hemisphere::from_letter(&caps[first + 3])?;
    // fractional degrees only make sense without minutes/seconds
    if deg.fract() != 0.0 && (caps.get(first + 1).is_some() || caps.get(first + 2).is_some()) {
        return None;
    }
    dms_components(deg, min, sec, hemisphere).ok()
}

fn dms_candidates(text: &str, out: &mut Vec<Candidate>) {
    for caps in DMS_PAIR.captures_iter(text) {
        let span = span_of(&caps);
        let lat = dms_value(&caps, 1);
        let lon = dms_value(&caps, 5);
        let (lat, lon, valid) = match (lat, lon) {
            (Some(lat), Some(lon)) => (lat, lon, in_range(lat, lon)),
            (lat, lon) => (lat.unwrap_or(f64::NAN), lon.unwrap_or(f64::NAN), false),
        };
        out.push(Candidate {
            tier: MatchTier::Dms,
            span,
            lat,
            lon,
            valid,
        });
    }
}
