use std::fs;
use std::path::Path;

use geobench::duel::{summarize, summary_report, DuelLabels, DuelRound, DuelSummary, SideStats};
use geobench::eval::{
    aggregate, emit_plot_data, latex_row, render_report, EvaluationReport, FailureKind,
    FailurePolicy, PredictionOutcome, ReportFormat, ReportRow, PLOT_METRICS,
};
use geobench::geo::{classify_boundary, geoscore, GeoCoordinate};
use geobench::prompt::StrategyKind;

fn golden(name: &str) -> String {
    fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/golden")
            .join(name),
    )
    .unwrap()
}

fn row(endpoint: &str, metrics: [f64; 7], failures: usize, count: usize) -> ReportRow {
    let [street, city, region, country, continent, mean_distance_km, mean_geoscore] = metrics;
    ReportRow {
        endpoint: endpoint.into(),
        strategy: None,
        street,
        city,
        region,
        country,
        continent,
        mean_distance_km,
        mean_geoscore,
        failure_rate: 100.0 * failures as f64 / count as f64,
        failures,
        count,
    }
}

fn leaderboard() -> EvaluationReport {
    EvaluationReport {
        failure_policy: FailurePolicy::default(),
        rows: vec![
            row(
                "Agent",
                [27.0, 55.0, 75.5, 91.2, 99.0, 105.0, 4600.0],
                0,
                20000,
            ),
            row(
                "GeoSpy",
                [10.5, 40.2, 60.0, 85.1, 97.3, 320.4, 4570.8],
                3,
                200,
            ),
        ],
    }
}

fn outcome(strategy: StrategyKind, id: usize, distance: Option<f64>) -> PredictionOutcome {
    PredictionOutcome {
        record_id: format!("r{id}"),
        endpoint: "Agent".into(),
        strategy,
        fingerprint: format!("fp{id}"),
        truth: GeoCoordinate::new(10.0, 20.0).unwrap(),
        raw_text: None,
        parse: None,
        prediction: None,
        distance_km: distance,
        geoscore: distance.map(|d| geoscore(d).unwrap()),
        boundary: distance.map(|d| classify_boundary(d).unwrap()),
        latency_ms: 0,
        attempts: 1,
        failure: distance.is_none().then_some(FailureKind::NoCandidate),
        error: None,
    }
}

fn outcomes() -> Vec<PredictionOutcome> {
    vec![
        outcome(StrategyKind::FewShot, 5, Some(199.0)),
        outcome(StrategyKind::ZeroShot, 1, Some(0.5)),
        outcome(StrategyKind::ZeroShot, 2, Some(25.0)),
        outcome(StrategyKind::FewShot, 4, Some(1.0)),
        outcome(StrategyKind::ZeroShot, 3, Some(700.0)),
        outcome(StrategyKind::ZeroShot, 0, None),
    ]
}

#[test]
fn leaderboard_markdown_matches_golden() {
    assert_eq!(
        render_report(&leaderboard(), ReportFormat::Markdown),
        golden("leaderboard.md")
    );
}

#[test]
fn leaderboard_csv_matches_golden() {
    assert_eq!(
        render_report(&leaderboard(), ReportFormat::Csv),
        golden("leaderboard.csv")
    );
}

#[test]
fn leaderboard_latex_matches_golden() {
    let report = leaderboard();
    assert_eq!(
        render_report(&report, ReportFormat::Latex),
        golden("leaderboard.tex")
    );
    assert_eq!(
        latex_row(&report.rows[0]),
        "Agent & 27.0 & 55.0 & 75.5 & 91.2 & 99.0 & 105.0 & 4600.0 \\\\"
    );
}

#[test]
fn json_report_round_trips() {
    let report = aggregate(&outcomes(), FailurePolicy::ExcludeAndReport).unwrap();
    let text = render_report(&report, ReportFormat::Json);
    let back: EvaluationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
}

#[test]
fn aggregated_outcomes_match_golden() {
    let report = aggregate(&outcomes(), FailurePolicy::default()).unwrap();
    assert_eq!(
        render_report(&report, ReportFormat::Markdown),
        golden("scored_outcomes.md")
    );
    let collapsed = report.collapse_strategies();
    assert_eq!(
        render_report(&collapsed, ReportFormat::Markdown),
        golden("scored_outcomes_collapsed.md")
    );
    let excluded = aggregate(&outcomes(), FailurePolicy::ExcludeAndReport).unwrap();
    assert_eq!(
        render_report(&excluded, ReportFormat::Markdown),
        golden("scored_outcomes_exclude.md")
    );
}

#[test]
fn plot_data_has_one_line_per_metric() {
    let text = emit_plot_data(&leaderboard());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "endpoint,strategy,metric,value");
    assert_eq!(lines.len(), 1 + 2 * PLOT_METRICS);
    assert!(lines.contains(&"GeoSpy,,avg_geoscore,4570.8"));
    assert!(lines.contains(&"Agent,,n,20000"));
}

fn duel_fixture() -> DuelSummary {
    let side = |average_score, wins, win_rate, closest, farthest| SideStats {
        average_score,
        wins,
        win_rate: Some(win_rate),
        closest_km: Some(closest),
        farthest_km: Some(farthest),
        misses: 0,
    };
    DuelSummary {
        rounds: 41,
        draws: 0,
        agent: side(4550.5, 35, 100.0 * 35.0 / 41.0, 0.3, 5200.2),
        opponent: side(4120.3, 6, 100.0 * 6.0 / 41.0, 1.1, 5400.5),
    }
}

fn human_labels() -> DuelLabels {
    DuelLabels {
        agent: "Agent".into(),
        opponent: "Human".into(),
    }
}

#[test]
fn duel_markdown_matches_golden() {
    assert_eq!(
        summary_report(&duel_fixture(), &human_labels(), ReportFormat::Markdown),
        golden("duel.md")
    );
}

#[test]
fn duel_csv_matches_golden() {
    assert_eq!(
        summary_report(&duel_fixture(), &human_labels(), ReportFormat::Csv),
        golden("duel.csv")
    );
}

#[test]
fn duel_draws_get_a_footnote() {
    let t = GeoCoordinate::new(10.0, 20.0).unwrap();
    let anti = GeoCoordinate::new(-10.0, -160.0).unwrap();
    let rounds = [
        DuelRound::score(0, t, Some(t), Some(t)),
        DuelRound::score(1, t, Some(t), Some(anti)),
        DuelRound::score(2, t, Some(anti), Some(t)),
    ];
    let summary = summarize(&rounds).unwrap();
    assert_eq!(
        summary_report(&summary, &DuelLabels::default(), ReportFormat::Markdown),
        golden("duel_draws.md")
    );
}
