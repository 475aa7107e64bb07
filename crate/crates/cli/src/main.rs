use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geobench::dataset::{EmbeddingSource, SimilarityAggregation};
use geobench::eval::{FailurePolicy, ReportFormat};

mod commands;

/// Image geolocation benchmark harness.
#[derive(Debug, Parser)]
#[command(name = "geobench", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice; recorded in the outputs.
    #[arg(long, global = true, default_value_t = geobench::seed::DEFAULT_SEED)]
    pub seed: u64,
    /// Directory all output files are written to.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Endpoint configuration file (TOML or JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Reuse results already present in --out-dir.
    #[arg(long, global = true)]
    pub resume: bool,
    /// Format of the report printed to standard output.
    #[arg(long, global = true, default_value = "md", value_parser = parse_format)]
    pub format: ReportFormat,
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    match s.parse()? {
        ReportFormat::Latex => {
            Err("latex is only available through the report subcommand's --latex flag".into())
        }
        f => Ok(f),
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drop indoor capture sets whose views look alike.
    Filter(FilterArgs),
    /// Draw a subset with per-country quotas proportional to land area.
    Sample(SampleArgs),
    /// Seeded train/test split of a manifest.
    Split(SplitArgs),
    /// Build a fine-tuning set from generated scene descriptions.
    GenerateFinetune(FinetuneArgs),
    /// Run a campaign over endpoints and prompting strategies.
    Evaluate(EvaluateArgs),
    /// Simulate head-to-head rounds and summarize them.
    Duel(DuelArgs),
    /// Re-aggregate a stored outcomes log.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// JSONL of {"uri", "embedding"} rows covering every view.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = geobench::dataset::INDOOR_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value = "mean", value_parser = parse_aggregation)]
    pub aggregation: SimilarityAggregation,
    /// Whether the embeddings were computed from images or captions.
    #[arg(long, default_value = "image", value_parser = parse_source)]
    pub embedding_source: EmbeddingSource,
}

fn parse_aggregation(s: &str) -> Result<SimilarityAggregation, String> {
    match s {
        "mean" => Ok(SimilarityAggregation::Mean),
        "min" => Ok(SimilarityAggregation::Min),
        "max" => Ok(SimilarityAggregation::Max),
        _ => Err(format!("expected mean, min or max, got {s:?}")),
    }
}

fn parse_source(s: &str) -> Result<EmbeddingSource, String> {
    match s {
        "image" => Ok(EmbeddingSource::Image),
        "caption" => Ok(EmbeddingSource::Caption),
        _ => Err(format!("expected image or caption, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// CSV with header country_code,area_km2.
    #[arg(long)]
    pub areas: PathBuf,
    #[arg(long)]
    pub total: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0.6)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Restrict to the training ids of this split file.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// JSONL of {"id", "description"} rows written ahead of time.
    #[arg(long, conflicts_with = "endpoint")]
    pub descriptions: Option<PathBuf>,
    /// Endpoint (from --config) that writes the descriptions.
    #[arg(long, required_unless_present = "descriptions")]
    pub endpoint: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub test_manifest: PathBuf,
    /// Endpoint configuration; defaults to --config.
    #[arg(long)]
    pub endpoints: Option<PathBuf>,
    /// Only query these endpoint names (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Comma-separated strategies: zero-shot, few-shot, cot.
    #[arg(long, value_delimiter = ',', default_value = "zero-shot,few-shot,cot")]
    pub strategies: Vec<String>,
    #[arg(long, default_value = "score-zero")]
    pub failure_policy: FailurePolicy,
    /// Distance charged to unparsed replies under score-zero.
    #[arg(long, default_value_t = geobench::eval::DEFAULT_PENALTY_KM)]
    pub penalty_km: f64,
    /// Restrict to the test ids of this split file.
    #[arg(long)]
    pub split: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DuelArgs {
    /// JSONL rounds: {"truth", "agent_guess"?, "opponent_guess"?}.
    #[arg(long = "match")]
    pub match_file: PathBuf,
    /// replay, fixed:<km> or lognormal:<median km>:<sigma>.
    #[arg(long, default_value = "replay")]
    pub opponent: String,
    #[arg(long, default_value = "Agent")]
    pub agent_label: String,
    #[arg(long, default_value = "Opponent")]
    pub opponent_label: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub outcomes: PathBuf,
    #[arg(long, default_value = "score-zero")]
    pub failure_policy: FailurePolicy,
    #[arg(long, default_value_t = geobench::eval::DEFAULT_PENALTY_KM)]
    pub penalty_km: f64,
    /// Pool all strategies into one row per endpoint.
    #[arg(long)]
    pub collapse_strategies: bool,
    /// Also write a LaTeX table body.
    #[arg(long)]
    pub latex: bool,
}

/// Successful runs either completed everything or left some items failed.
pub enum Status {
    Complete,
    Partial,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let g = &cli.global;
    let result = match &cli.command {
        Command::Filter(a) => commands::filter(g, a),
        Command::Sample(a) => commands::sample(g, a),
        Command::Split(a) => commands::split(g, a),
        Command::GenerateFinetune(a) => commands::generate_finetune(g, a),
        Command::Evaluate(a) => commands::evaluate(g, a),
        Command::Duel(a) => commands::duel(g, a),
        Command::Report(a) => commands::report(g, a),
    };
    match result {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
