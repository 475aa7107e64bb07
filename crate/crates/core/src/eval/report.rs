use std::fmt::Write as _;
use std::str::FromStr;

use super::{EvaluationReport, FailurePolicy, ReportRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
    Latex,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "tex" | "latex" => Ok(ReportFormat::Latex),
            _ => Err(format!(
                "unknown format {s:?} (expected md, csv, json or latex)"
            )),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Latex => "tex",
        }
    }
}

pub const CSV_HEADER: [&str; 11] = [
    "endpoint",
    "strategy",
    "street",
    "city",
    "region",
    "country",
    "continent",
    "avg_km",
    "avg_geoscore",
    "fail_rate",
    "n",
];

const TABLE_HEADER: [&str; 7] = [
    "Street (1 km)",
    "City (25 km)",
    "Region (200 km)",
    "Country (750 km)",
    "Continent (2,500 km)",
    "Avg Distance (km)",
    "Avg Geoscore (0-5000)",
];

pub(crate) fn one_decimal(x: f64) -> String {
    if x.is_nan() {
        "n/a".to_string()
    } else {
        format!("{x:.1}")
    }
}

fn method(row: &ReportRow) -> String {
    match row.strategy {
        Some(kind) => format!("{} / {}", row.endpoint, kind.label()),
        None => row.endpoint.clone(),
    }
}

/// The seven table cells: five boundary accuracies, mean distance, mean
/// GeoScore.
fn metric_cells(row: &ReportRow) -> Vec<String> {
    row.accuracies()
        .into_iter()
        .chain([row.mean_distance_km, row.mean_geoscore])
        .map(one_decimal)
        .collect()
}

fn footnote(policy: FailurePolicy) -> String {
    match policy {
        FailurePolicy::ScoreZero { penalty_km } => format!(
            "Unparsed replies score 0, fall outside every boundary and count as {} km in the average distance.",
            one_decimal(penalty_km)
        ),
        FailurePolicy::ExcludeAndReport => {
            "Unparsed replies are excluded from every average and reported in the failure column.".to_string()
        }
    }
}

pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => markdown(report),
        ReportFormat::Csv => csv_table(report),
        ReportFormat::Json => {
            serde_json::to_string_pretty(report).expect("reports serialize") + "\n"
        }
        ReportFormat::Latex => latex(report),
    }
}

fn markdown(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let header: Vec<&str> = std::iter::once("Method")
        .chain(TABLE_HEADER)
        .chain(["Failures (%)", "n"])
        .collect();
    writeln!(out, "| {} |", header.join(" | ")).unwrap();
    let align: Vec<&str> = std::iter::once("---")
        .chain(std::iter::repeat_n("---:", header.len() - 1))
        .collect();
    writeln!(out, "| {} |", align.join(" | ")).unwrap();
    for row in &report.rows {
        let mut cells = vec![method(row).replace('|', "\\|")];
        cells.extend(metric_cells(row));
        cells.push(one_decimal(row.failure_rate));
        cells.push(row.count.to_string());
        writeln!(out, "| {} |", cells.join(" | ")).unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "{}", footnote(report.failure_policy)).unwrap();
    out
}

fn csv_table(report: &EvaluationReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).unwrap();
    for row in &report.rows {
        let mut rec = vec![
            row.endpoint.clone(),
            row.strategy
                .map_or(String::new(), |k| k.as_str().to_string()),
        ];
        rec.extend(metric_cells(row));
        rec.push(one_decimal(row.failure_rate));
        rec.push(row.count.to_string());
        w.write_record(&rec).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Table body row in the `a & b & ... \\` shape.
pub fn latex_row(row: &ReportRow) -> String {
    format!("{} & {} \\\\", method(row), metric_cells(row).join(" & "))
}

fn latex(report: &EvaluationReport) -> String {
    let mut out = String::new();
    writeln!(out, "\\begin{{tabular}}{{lccccccc}}").unwrap();
    writeln!(out, "\\toprule").unwrap();
    writeln!(out, "Method & {} \\\\", TABLE_HEADER.join(" & ")).unwrap();
    writeln!(out, "\\midrule").unwrap();
    for row in &report.rows {
        writeln!(out, "{}", latex_row(row)).unwrap();
    }
    writeln!(out, "\\bottomrule").unwrap();
    writeln!(out, "\\end{{tabular}}").unwrap();
    out
}

/// Long-format series, one line per (row, metric), for plotting tools.
/// Values are written at full precision.
pub fn emit_plot_data(report: &EvaluationReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["endpoint", "strategy", "metric", "value"])
        .unwrap();
    for row in &report.rows {
        let strategy = row.strategy.map_or("", |k| k.as_str());
        let metrics = [
            ("street", row.street),
            ("city", row.city),
            ("region", row.region),
            ("country", row.country),
            ("continent", row.continent),
            ("avg_km", row.mean_distance_km),
            ("avg_geoscore", row.mean_geoscore),
            ("fail_rate", row.failure_rate),
            ("n", row.count as f64),
        ];
        for (name, value) in metrics {
            w.write_record([row.endpoint.as_str(), strategy, name, &value.to_string()])
                .unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub const PLOT_METRICS: usize = 9;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::StrategyKind;

    fn row(endpoint: &str, strategy: Option<StrategyKind>, v: [f64; 7]) -> ReportRow {
        ReportRow {
            endpoint: endpoint.into(),
            strategy,
            street: v[0],
            city: v[1],
            region: v[2],
            country: v[3],
            continent: v[4],
            mean_distance_km: v[5],
            mean_geoscore: v[6],
            failure_rate: 0.0,
            failures: 0,
            count: 20000,
        }
    }

    #[test]
    fn latex_row_shape() {
        let r = row("Agent", None, [27.0, 55.0, 75.5, 91.2, 99.0, 105.0, 4600.0]);
        assert_eq!(
            latex_row(&r),
            "Agent & 27.0 & 55.0 & 75.5 & 91.2 & 99.0 & 105.0 & 4600.0 \\\\"
        );
    }

    #[test]
    fn strategies_label_rows() {
        let report = EvaluationReport {
            failure_policy: FailurePolicy::ExcludeAndReport,
            rows: vec![row(
                "GPT-4o",
                Some(StrategyKind::ChainOfThought),
                [19.5, 46.9, 66.8, 81.7, 94.1, 150.7, 4503.1],
            )],
        };
        let md = render_report(&report, ReportFormat::Markdown);
        assert!(
            md.contains("| GPT-4o / Chain-of-thought | 19.5 | 46.9 |"),
            "{md}"
        );
        let csv = render_report(&report, ReportFormat::Csv);
        assert!(csv.starts_with("endpoint,strategy,street,city,region,country,continent,avg_km,avg_geoscore,fail_rate,n\n"));
        assert!(csv.contains("GPT-4o,chain_of_thought,19.5,"));
    }

    #[test]
    fn csv_quotes_awkward_names() {
        let report = EvaluationReport {
            failure_policy: FailurePolicy::default(),
            rows: vec![row("a,b", None, [1.0; 7])],
        };
        assert!(render_report(&report, ReportFormat::Csv).contains("\"a,b\","));
    }

    #[test]
    fn plot_data_cardinality() {
        let report = EvaluationReport {
            failure_policy: FailurePolicy::default(),
            rows: vec![row("a", None, [1.0; 7]), row("b", None, [2.0; 7])],
        };
        let text = emit_plot_data(&report);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "endpoint,strategy,metric,value");
        assert_eq!(lines.len(), 1 + 2 * PLOT_METRICS);
    }

    #[test]
    fn formats_parse() {
        assert_eq!(
            "md".parse::<ReportFormat>().unwrap(),
            ReportFormat::Markdown
        );
        assert_eq!("JSON".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
