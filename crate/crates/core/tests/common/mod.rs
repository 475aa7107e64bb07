//! Parser corpus shared by the corpus test and the acceptance run.

use std::fs;
use std::path::Path;

use geobench::parser::{parse_coordinates, MatchTier, ParseOutcome};

#[derive(Debug, PartialEq)]
enum Expected {
    Located { lat: f64, lon: f64, tier: MatchTier },
    NoCandidate,
    OutOfRange { lat: f64, lon: f64 },
}

fn pair(s: &str) -> (f64, f64) {
    let (a, b) = s.split_once(',').expect("expected `lat, lon`");
    (a.trim().parse().unwrap(), b.trim().parse().unwrap())
}

fn read_expected(text: &str) -> Expected {
    let line = text.trim();
    if line == "no_candidate" {
        return Expected::NoCandidate;
    }
    if let Some(rest) = line.strip_prefix("out_of_range ") {
        let (lat, lon) = pair(rest);
        return Expected::OutOfRange { lat, lon };
    }
    let rest = line.strip_prefix("located ").expect("unknown expectation");
    let (coords, tier) = rest.rsplit_once(' ').unwrap();
    let tier = match tier {
        "labeled" => MatchTier::Labeled,
        "decimal_pair" => MatchTier::DecimalPair,
        "dms" => MatchTier::Dms,
        other => panic!("unknown tier {other}"),
    };
    let (lat, lon) = pair(coords);
    Expected::Located { lat, lon, tier }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

/// Runs every corpus case; returns the case count or the mismatches.
pub fn check_corpus() -> Result<usize, Vec<String>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut cases = 0;
    let mut failures = Vec::new();
    let mut names: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    names.sort();
    for input in names {
        let text = fs::read_to_string(&input).unwrap();
        let expected =
            read_expected(&fs::read_to_string(input.with_extension("expected")).unwrap());
        let result = parse_coordinates(&text);
        let ok = match (&expected, result.outcome) {
            (Expected::NoCandidate, ParseOutcome::NoCandidate) => true,
            (
                Expected::OutOfRange { lat, lon },
                ParseOutcome::OutOfRange {
                    latitude,
                    longitude,
                },
            ) => close(*lat, latitude) && close(*lon, longitude),
            (
                Expected::Located { lat, lon, tier },
                ParseOutcome::Located {
                    coordinate,
                    tier: got,
                },
            ) => {
                close(*lat, coordinate.latitude())
                    && close(*lon, coordinate.longitude())
                    && *tier == got
            }
            _ => false,
        };
        if let Some((start, end)) = result.matched_span {
            if start > end || end > text.len() {
                failures.push(format!("{}: span outside input", input.display()));
            }
        }
        if !ok {
            failures.push(format!(
                "{}: expected {expected:?}, got {:?}",
                input.display(),
                result.outcome
            ));
        }
        cases += 1;
    }
    if failures.is_empty() {
        Ok(cases)
    } else {
        Err(failures)
    }
}
