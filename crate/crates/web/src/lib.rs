//! Browser bindings for the static demo page. Every export takes plain
//! numbers or strings and returns a JSON document.

use geobench::duel::{play_match, summarize, OpponentModel};
use geobench::geo::{classify_boundary, geoscore, haversine_distance, EarthModel, GeoCoordinate};
use geobench::parser::parse_coordinates;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn error(message: impl ToString) -> String {
    json!({ "error": message.to_string() }).to_string()
}

fn coordinate(lat: f64, lon: f64) -> Result<GeoCoordinate, String> {
    GeoCoordinate::new(lat, lon).map_err(|e| e.to_string())
}

/// Distance, GeoScore and boundary level of one guess.
#[wasm_bindgen]
pub fn score_guess(truth_lat: f64, truth_lon: f64, guess_lat: f64, guess_lon: f64) -> String {
    let (truth, guess) = match (
        coordinate(truth_lat, truth_lon),
        coordinate(guess_lat, guess_lon),
    ) {
        (Ok(t), Ok(g)) => (t, g),
        (Err(e), _) | (_, Err(e)) => return error(e),
    };
    let d = haversine_distance(truth, guess, EarthModel::default());
    json!({
        "distance_km": d,
        "geoscore": geoscore(d).expect("non-negative distance"),
        "boundary": classify_boundary(d).expect("non-negative distance").name(),
    })
    .to_string()
}

/// `points` evenly spaced samples of the GeoScore curve on `[0, max_km]`.
#[wasm_bindgen]
pub fn geoscore_curve(max_km: f64, points: u32) -> String {
    if !(max_km > 0.0 && max_km.is_finite()) || points < 2 {
        return error("need max_km > 0 and at least 2 points");
    }
    let step = max_km / f64::from(points - 1);
    let curve: Vec<Value> = (0..points)
        .map(|i| {
            let d = step * f64::from(i);
            json!([d, geoscore(d).expect("non-negative distance")])
        })
        .collect();
    Value::Array(curve).to_string()
}

/// Extracts the answer coordinate from free model text.
#[wasm_bindgen]
pub fn parse_answer(text: &str) -> String {
    serde_json::to_string(&parse_coordinates(text)).expect("parse results serialize")
}

/// Deterministic spread of truths over the sphere (Fibonacci lattice),
/// rotated by the seed.
fn lattice(n: usize, seed: u64) -> Vec<GeoCoordinate> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let offset = ((seed as f64) * golden).fract() * 360.0;
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let lat = z.asin().to_degrees();
            let lon = (i as f64 * 360.0 / golden + offset).rem_euclid(360.0) - 180.0;
            GeoCoordinate::new(lat, lon).expect("lattice points are valid")
        })
        .collect()
}

/// Plays `rounds` rounds between two log-normal guessers with the given
/// median errors and returns the summary plus every round.
#[wasm_bindgen]
pub fn simulate_duel(
    rounds: u32,
    agent_median_km: f64,
    opponent_median_km: f64,
    sigma: f64,
    seed: u64,
) -> String {
    if rounds == 0 || rounds > 10_000 {
        return error("rounds must lie in 1..=10000");
    }
    let truths = lattice(rounds as usize, seed);
    let agent_model = OpponentModel::LogNormalError {
        median_km: agent_median_km,
        sigma,
        seed: seed ^ 0x5eed,
    };
    let opponent = OpponentModel::LogNormalError {
        median_km: opponent_median_km,
        sigma,
        seed,
    };
    // the agent's guesses come from playing its model against nobody
    let blank: Vec<_> = truths.iter().map(|&t| (t, None)).collect();
    let agent_guesses = match play_match(&blank, &agent_model) {
        Ok(r) => r,
        Err(e) => return error(e),
    };
    let pairs: Vec<_> = agent_guesses
        .iter()
        .map(|r| (r.truth, r.opponent_guess))
        .collect();
    let played = match play_match(&pairs, &opponent) {
        Ok(r) => r,
        Err(e) => return error(e),
    };
    let summary = summarize(&played).expect("at least one round");
    json!({ "summary": summary, "rounds": played }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn scores_a_guess() {
        let v = parse(&score_guess(51.5007, -0.1246, 51.5007, -0.1246));
        assert_eq!(v["geoscore"], 5000.0);
        assert_eq!(v["boundary"], "street");
        assert!(parse(&score_guess(91.0, 0.0, 0.0, 0.0))["error"].is_string());
    }

    #[test]
    fn curve_endpoints() {
        let v = parse(&geoscore_curve(1492.7, 3));
        let pts = v.as_array().unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0][1], 5000.0);
        assert!((pts[2][1].as_f64().unwrap() - 1839.3972058572116).abs() < 1e-9);
        assert!(parse(&geoscore_curve(0.0, 3))["error"].is_string());
    }

    #[test]
    fn parses_text() {
        let v = parse(&parse_answer(
            "I think\nLatitude and Longitude: -38.6633, 143.1051",
        ));
        assert_eq!(v["outcome"]["status"], "located");
        assert_eq!(v["outcome"]["coordinate"]["lat"], -38.6633);
        assert_eq!(
            parse(&parse_answer("no idea"))["outcome"]["status"],
            "no_candidate"
        );
    }

    #[test]
    fn duel_is_deterministic() {
        let a = simulate_duel(41, 50.0, 400.0, 1.0, 7);
        assert_eq!(a, simulate_duel(41, 50.0, 400.0, 1.0, 7));
        let v = parse(&a);
        assert_eq!(v["summary"]["rounds"], 41);
        assert_eq!(v["rounds"].as_array().unwrap().len(), 41);
        assert!(parse(&simulate_duel(0, 1.0, 1.0, 1.0, 0))["error"].is_string());
        assert!(parse(&simulate_duel(3, -1.0, 1.0, 1.0, 0))["error"].is_string());
    }

    #[test]
    fn lattice_is_valid() {
        for c in lattice(1000, 99) {
            assert!((-90.0..=90.0).contains(&c.latitude()));
        }
    }
}
