use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use geobench::dataset::{
    ingest_manifest, read_country_areas, run_indoor_filter, sample_by_area, write_manifest,
    FilterDecision, ImageRecord, IndoorFilterConfig, LookupEmbeddings, SplitManifest,
};
use geobench::duel::{
    play_match, read_match, replay_opponent, summarize, summary_report, DuelLabels, OpponentModel,
};
use geobench::eval::{
    aggregate, emit_plot_data, load_outcomes, render_report, run_campaign, CampaignOptions,
    EvaluationReport, FailurePolicy, OutcomeSink, ReportFormat,
};
use geobench::gateway::{load_endpoints, EndpointConfig, Gateway, RunLog};
use geobench::prompt::{
    finetune_line, make_finetune_record, render, PromptStrategy, StrategyKind, ANSWER_LABEL,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{
    DuelArgs, EvaluateArgs, FilterArgs, FinetuneArgs, GlobalArgs, ReportArgs, SampleArgs,
    SplitArgs, Status,
};

type CliResult = Result<Status, String>;

fn require_file(path: &Path, what: &str) -> Result<(), String> {
    if path.is_file() {
        Ok(())
    } else {
        Err(format!("{what} not found: {}", path.display()))
    }
}

fn read_text(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn manifest(path: &Path) -> Result<Vec<ImageRecord>, String> {
    require_file(path, "manifest")?;
    ingest_manifest(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn out_path(g: &GlobalArgs, name: &str) -> Result<PathBuf, String> {
    fs::create_dir_all(&g.out_dir).map_err(|e| format!("{}: {e}", g.out_dir.display()))?;
    Ok(g.out_dir.join(name))
}

fn write_out(g: &GlobalArgs, name: &str, contents: &str) -> Result<PathBuf, String> {
    let path = out_path(g, name)?;
    fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(path)
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("outputs serialize") + "\n"
}

fn manifest_text<'a>(
    rows: impl IntoIterator<Item = (&'a ImageRecord, Option<FilterDecision>)>,
) -> String {
    let mut buf = Vec::new();
    write_manifest(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("manifests are UTF-8")
}

fn read_split(path: &Path) -> Result<SplitManifest, String> {
    require_file(path, "split file")?;
    serde_json::from_str(&read_text(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn restrict(records: Vec<ImageRecord>, ids: &[String]) -> Vec<ImageRecord> {
    let keep: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    records
        .into_iter()
        .filter(|r| keep.contains(r.id.as_str()))
        .collect()
}

pub fn filter(g: &GlobalArgs, a: &FilterArgs) -> CliResult {
    let records = manifest(&a.manifest)?;
    require_file(&a.embeddings, "embeddings file")?;
    let file =
        fs::File::open(&a.embeddings).map_err(|e| format!("{}: {e}", a.embeddings.display()))?;
    let provider = LookupEmbeddings::from_jsonl(BufReader::new(file), a.embedding_source)
        .map_err(|e| format!("{}: {e}", a.embeddings.display()))?;
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(format!("threshold must lie in [0, 1], got {}", a.threshold));
    }
    let config = IndoorFilterConfig {
        threshold: a.threshold,
        aggregation: a.aggregation,
    };
    let run = run_indoor_filter(&records, &provider, &config, 4);

    // keep the input order in the filtered manifest
    let decisions: HashMap<&str, FilterDecision> =
        run.kept.iter().map(|(r, d)| (r.id.as_str(), *d)).collect();
    let kept: Vec<_> = records
        .iter()
        .filter_map(|r| decisions.get(r.id.as_str()).map(|&d| (r, Some(d))))
        .collect();
    write_out(g, "filtered.jsonl", &manifest_text(kept))?;
    let report = json!({
        "seed": g.seed,
        "threshold": config.threshold,
        "aggregation": config.aggregation,
        "embedding_source": run.source,
        "input": records.len(),
        "kept": run.kept.len(),
        "excluded_ids": run.excluded,
        "errors": run.errors.iter().map(|(id, e)| json!({"id": id, "error": e})).collect::<Vec<_>>(),
    });
    write_out(g, "filter_report.json", &pretty(&report))?;
    eprintln!(
        "kept {} of {} records, excluded {}, {} errors",
        run.kept.len(),
        records.len(),
        run.excluded.len(),
        run.errors.len()
    );
    Ok(if run.errors.is_empty() {
        Status::Complete
    } else {
        Status::Partial
    })
}

pub fn sample(g: &GlobalArgs, a: &SampleArgs) -> CliResult {
    let records = manifest(&a.manifest)?;
    require_file(&a.areas, "area table")?;
    let areas = read_country_areas(read_text(&a.areas)?.as_bytes())
        .map_err(|e| format!("{}: {e}", a.areas.display()))?;
    let outcome = sample_by_area(&records, &areas, a.total, g.seed).map_err(|e| e.to_string())?;
    for w in &outcome.apportionment.warnings {
        eprintln!("warning: {w}");
    }
    write_out(
        g,
        "sampled.jsonl",
        &manifest_text(outcome.records.iter().map(|r| (r, None))),
    )?;
    let report = json!({
        "seed": g.seed,
        "requested": a.total,
        "selected": outcome.records.len(),
        "quotas": outcome.apportionment.quotas,
        "shortfall": outcome.apportionment.shortfall,
        "warnings": outcome.apportionment.warnings,
    });
    write_out(g, "sample_report.json", &pretty(&report))?;
    eprintln!("selected {} records", outcome.records.len());
    Ok(Status::Complete)
}

pub fn split(g: &GlobalArgs, a: &SplitArgs) -> CliResult {
    let records = manifest(&a.manifest)?;
    let split =
        geobench::dataset::split(&records, a.train_fraction, g.seed).map_err(|e| e.to_string())?;
    write_out(g, "split.json", &pretty(&split))?;
    eprintln!(
        "train {} / test {}",
        split.train_ids.len(),
        split.test_ids.len()
    );
    Ok(Status::Complete)
}

#[derive(Deserialize)]
struct DescriptionRow {
    id: String,
    description: String,
}

/// Drops trailing answer lines so the target ends with exactly one.
fn strip_answer(text: &str) -> String {
    let mut lines: Vec<&str> = text.trim_end().lines().collect();
    while lines
        .last()
        .is_some_and(|l| l.trim_start().starts_with(ANSWER_LABEL.trim_end()) || l.trim().is_empty())
    {
        lines.pop();
    }
    lines.join("\n")
}

fn endpoint_configs(
    g: &GlobalArgs,
    explicit: Option<&Path>,
) -> Result<Vec<EndpointConfig>, String> {
    let path = explicit
        .or(g.config.as_deref())
        .ok_or("an endpoint configuration is required (--endpoints or --config)")?;
    require_file(path, "endpoint configuration")?;
    let mut configs = load_endpoints(path).map_err(|e| e.to_string())?;
    for c in &mut configs {
        c.seed.get_or_insert(g.seed);
    }
    Ok(configs)
}

pub fn generate_finetune(g: &GlobalArgs, a: &FinetuneArgs) -> CliResult {
    let mut records = manifest(&a.manifest)?;
    if let Some(path) = &a.split {
        records = restrict(records, &read_split(path)?.train_ids);
    }

    let mut descriptions: BTreeMap<String, Result<String, String>> = BTreeMap::new();
    if let Some(path) = &a.descriptions {
        require_file(path, "descriptions file")?;
        let file = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| format!("{}: {e}", path.display()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: DescriptionRow = serde_json::from_str(&line)
                .map_err(|e| format!("{}: line {}: {e}", path.display(), i + 1))?;
            descriptions.insert(row.id, Ok(row.description));
        }
    } else {
        let name = a
            .endpoint
            .as_deref()
            .expect("clap requires --endpoint without --descriptions");
        let log = RunLog::append_to(&out_path(g, "finetune_run_log.jsonl")?)
            .map_err(|e| e.to_string())?;
        let gateway = Gateway::new(endpoint_configs(g, None)?, log).map_err(|e| e.to_string())?;
        if !gateway.endpoints().any(|c| c.name == name) {
            return Err(format!(
                "endpoint {name:?} is not declared in the configuration"
            ));
        }
        for r in &records {
            let text = match &r.address {
                None => Err("record has no address".to_string()),
                Some(address) => render(
                    &PromptStrategy::cot_data_generation(address, r.truth),
                    &r.image_uri,
                )
                .map_err(|e| e.to_string())
                .and_then(|p| gateway.query(name, &p, r).map_err(|e| e.to_string()))
                .map(|reply| strip_answer(&reply.raw_text)),
            };
            descriptions.insert(r.id.clone(), text);
        }
        gateway.finish().map_err(|e| e.to_string())?;
    }

    let mut lines = String::new();
    let mut errors = Vec::new();
    for r in &records {
        let made = match descriptions.get(&r.id) {
            None => Err("no description".to_string()),
            Some(Err(e)) => Err(e.clone()),
            Some(Ok(text)) => {
                make_finetune_record(r, &strip_answer(text)).map_err(|e| e.to_string())
            }
        };
        match made {
            Ok(ft) => {
                lines.push_str(&finetune_line(&ft));
                lines.push('\n');
            }
            Err(e) => errors.push(json!({"id": r.id, "error": e})),
        }
    }
    write_out(g, "finetune.jsonl", &lines)?;
    let written = records.len() - errors.len();
    let report =
        json!({"seed": g.seed, "records": records.len(), "written": written, "errors": errors});
    write_out(g, "finetune_report.json", &pretty(&report))?;
    eprintln!(
        "wrote {written} fine-tuning examples, {} errors",
        errors.len()
    );
    Ok(if errors.is_empty() {
        Status::Complete
    } else {
        Status::Partial
    })
}

fn parse_strategies(names: &[String]) -> Result<Vec<PromptStrategy>, String> {
    names
        .iter()
        .map(|n| {
            let kind: StrategyKind = n.parse().map_err(|e| format!("{e}"))?;
            if !StrategyKind::EVALUATION.contains(&kind) {
                return Err(format!("{n} is not an evaluation strategy"));
            }
            Ok(PromptStrategy::new(kind))
        })
        .collect()
}

fn apply_penalty(policy: FailurePolicy, penalty_km: f64) -> Result<FailurePolicy, String> {
    if !(penalty_km >= 0.0 && penalty_km.is_finite()) {
        return Err(format!("penalty must be non-negative, got {penalty_km}"));
    }
    Ok(match policy {
        FailurePolicy::ScoreZero { .. } => FailurePolicy::ScoreZero { penalty_km },
        p => p,
    })
}

fn write_reports(g: &GlobalArgs, report: &EvaluationReport) -> Result<(), String> {
    for format in [
        ReportFormat::Markdown,
        ReportFormat::Csv,
        ReportFormat::Json,
    ] {
        write_out(
            g,
            &format!("report.{}", format.extension()),
            &render_report(report, format),
        )?;
    }
    write_out(g, "plot_data.csv", &emit_plot_data(report))?;
    print!("{}", render_report(report, g.format));
    Ok(())
}

pub fn evaluate(g: &GlobalArgs, a: &EvaluateArgs) -> CliResult {
    let mut records = manifest(&a.test_manifest)?;
    if let Some(path) = &a.split {
        records = restrict(records, &read_split(path)?.test_ids);
    }
    let configs = endpoint_configs(g, a.endpoints.as_deref())?;
    let strategies = parse_strategies(&a.strategies)?;
    let policy = apply_penalty(a.failure_policy, a.penalty_km)?;
    let names: Vec<String> = if a.only.is_empty() {
        configs.iter().map(|c| c.name.clone()).collect()
    } else {
        a.only.clone()
    };

    let outcomes_path = out_path(g, "outcomes.jsonl")?;
    let log_path = out_path(g, "run_log.jsonl")?;
    let prior = if g.resume && outcomes_path.exists() {
        load_outcomes(&outcomes_path).map_err(|e| e.to_string())?
    } else {
        for p in [&outcomes_path, &log_path] {
            if p.exists() {
                fs::remove_file(p).map_err(|e| format!("{}: {e}", p.display()))?;
            }
        }
        Vec::new()
    };

    let gateway = Gateway::new(
        configs,
        RunLog::append_to(&log_path).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let sink = OutcomeSink::append_to(&outcomes_path).map_err(|e| e.to_string())?;
    let options = CampaignOptions {
        prior: &prior,
        sink: Some(&sink),
        ..Default::default()
    };
    let outcomes = run_campaign(&gateway, &records, &names, &strategies, &options)
        .map_err(|e| e.to_string())?;
    drop(sink);
    gateway.finish().map_err(|e| e.to_string())?;

    // rewrite the log in canonical order so reruns produce identical bytes
    let mut canonical = String::new();
    for o in &outcomes {
        canonical.push_str(&serde_json::to_string(o).expect("outcomes serialize"));
        canonical.push('\n');
    }
    let tmp = out_path(g, "outcomes.jsonl.tmp")?;
    fs::write(&tmp, canonical).map_err(|e| e.to_string())?;
    fs::rename(&tmp, &outcomes_path).map_err(|e| e.to_string())?;

    let report = aggregate(&outcomes, policy).map_err(|e| e.to_string())?;
    let campaign = json!({
        "seed": g.seed,
        "test_records": records.len(),
        "endpoints": names,
        "strategies": strategies.iter().map(|s| s.kind.as_str()).collect::<Vec<_>>(),
        "failure_policy": policy,
    });
    write_out(g, "campaign.json", &pretty(&campaign))?;
    write_reports(g, &report)?;

    let errored = outcomes.iter().filter(|o| o.is_error()).count();
    let done: BTreeSet<_> = prior
        .iter()
        .filter(|o| !o.is_error())
        .map(|o| (&o.endpoint, &o.record_id, &o.fingerprint))
        .collect();
    let reused = outcomes
        .iter()
        .filter(|o| done.contains(&(&o.endpoint, &o.record_id, &o.fingerprint)))
        .count();
    eprintln!(
        "{} outcomes ({reused} reused), {errored} endpoint errors",
        outcomes.len()
    );
    Ok(if errored == 0 {
        Status::Complete
    } else {
        Status::Partial
    })
}

pub fn report(g: &GlobalArgs, a: &ReportArgs) -> CliResult {
    require_file(&a.outcomes, "outcomes log")?;
    let outcomes = load_outcomes(&a.outcomes).map_err(|e| e.to_string())?;
    let policy = apply_penalty(a.failure_policy, a.penalty_km)?;
    let mut report = aggregate(&outcomes, policy).map_err(|e| e.to_string())?;
    if a.collapse_strategies {
        report = report.collapse_strategies();
    }
    write_reports(g, &report)?;
    if a.latex {
        write_out(
            g,
            "report.tex",
            &render_report(&report, ReportFormat::Latex),
        )?;
    }
    Ok(Status::Complete)
}

fn parse_opponent(spec: &str, seed: u64) -> Result<Option<OpponentModel>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| format!("bad number {s:?} in --opponent {spec}"))
    };
    match parts.as_slice() {
        ["replay"] => Ok(None),
        ["fixed", km] => Ok(Some(OpponentModel::FixedError {
            distance_km: num(km)?,
            seed,
        })),
        ["lognormal", median, sigma] => Ok(Some(OpponentModel::LogNormalError {
            median_km: num(median)?,
            sigma: num(sigma)?,
            seed,
        })),
        _ => Err(format!(
            "unknown opponent {spec:?} (expected replay, fixed:<km> or lognormal:<km>:<sigma>)"
        )),
    }
}

pub fn duel(g: &GlobalArgs, a: &DuelArgs) -> CliResult {
    require_file(&a.match_file, "match file")?;
    let file =
        fs::File::open(&a.match_file).map_err(|e| format!("{}: {e}", a.match_file.display()))?;
    let rounds =
        read_match(BufReader::new(file)).map_err(|e| format!("{}: {e}", a.match_file.display()))?;
    let opponent = parse_opponent(&a.opponent, g.seed)?.unwrap_or_else(|| replay_opponent(&rounds));
    let pairs: Vec<_> = rounds.iter().map(|r| (r.truth, r.agent_guess)).collect();
    let played = play_match(&pairs, &opponent).map_err(|e| e.to_string())?;
    let summary = summarize(&played).map_err(|e| e.to_string())?;
    let labels = DuelLabels {
        agent: a.agent_label.clone(),
        opponent: a.opponent_label.clone(),
    };

    let mut lines = String::new();
    for r in &played {
        lines.push_str(&serde_json::to_string(r).expect("rounds serialize"));
        lines.push('\n');
    }
    write_out(g, "duel_rounds.jsonl", &lines)?;
    let doc = json!({"seed": g.seed, "opponent": opponent_name(&opponent), "summary": summary});
    write_out(g, "duel_summary.json", &pretty(&doc))?;
    write_out(
        g,
        "duel_summary.md",
        &summary_report(&summary, &labels, ReportFormat::Markdown),
    )?;
    print!("{}", summary_report(&summary, &labels, g.format));
    Ok(Status::Complete)
}

fn opponent_name(o: &OpponentModel) -> String {
    match o {
        OpponentModel::FixedError { distance_km, .. } => format!("fixed:{distance_km}"),
        OpponentModel::LogNormalError {
            median_km, sigma, ..
        } => format!("lognormal:{median_km}:{sigma}"),
        OpponentModel::Replay { .. } => "replay".into(),
    }
}
