mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use limerick::corpus::Direction;
use limerick::generation::Mode;

use crate::config::{ClassifierKind, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "limerick",
    version,
    about = "Train, generate, score and rank limericks"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a corpus and write the vocabulary and encoded sequences.
    Prep(PrepArgs),
    /// Fit n-gram models over a hyperparameter grid and keep the best.
    Train(TrainArgs),
    /// Generate poems and write one record per attempt.
    Generate(GenerateArgs),
    /// Compute every metric for generated poems or a plain-text corpus.
    Score(ScoreArgs),
    /// Apply the thresholds and rank the survivors.
    Filter(FilterArgs),
    /// Order scorecards by the ranking key without filtering.
    Rank(RankArgs),
    /// Summarize scorecards, accepted poems and generation attempts.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct PrepArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    direction: Direction,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Replaces the configured order grid; repeatable.
    #[arg(long)]
    order: Vec<usize>,
    /// Replaces the configured discount grid; repeatable.
    #[arg(long)]
    discount: Vec<f64>,
    /// Encoded training file, instead of `<data>/<direction>.train.enc`.
    #[arg(long)]
    train_file: Option<PathBuf>,
    #[arg(long)]
    val_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    mode: Option<Mode>,
    /// Number of parsed poems wanted.
    #[arg(long)]
    n: Option<usize>,
    /// Fixed first line for reverse mode.
    #[arg(long)]
    seed_line: Option<String>,
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    temperature: Option<f64>,
    /// 0 samples from the full distribution.
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Maximum attempts.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    forward_endpoint: Option<String>,
    #[arg(long)]
    reverse_endpoint: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Attempt records from `generate`, or a plain-text corpus.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long, value_parser = parse_classifier)]
    classifier: Option<ClassifierKind>,
    #[arg(long)]
    stub_fixture: Option<PathBuf>,
    /// Count punctuation tokens in the TTR.
    #[arg(long)]
    ttr_include_punct: bool,
    /// Identical rhyme words do not count as rhyming.
    #[arg(long)]
    strict_self_rhyme: bool,
    /// Compare spellings of words missing from the dictionary.
    #[arg(long)]
    grapheme_fallback: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FilterArgs {
    /// Scorecards from `score`.
    #[arg(long)]
    input: PathBuf,
    /// A number in [0, 1] or `auto`.
    #[arg(long)]
    ttr_threshold: Option<String>,
    /// Derive the threshold from a given mean and standard deviation,
    /// written `MEAN,STD`.
    #[arg(long)]
    ttr_stats: Option<String>,
    /// Reference corpus for `auto`.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    min_confidence: Option<f64>,
    /// Accept poems without a confident classification.
    #[arg(long)]
    no_require_classified: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Scorecards from `score`.
    #[arg(long)]
    input: PathBuf,
    /// Accepted scorecards from `filter`.
    #[arg(long)]
    accepted: Option<PathBuf>,
    /// Attempt records from `generate`, for the generation funnel.
    #[arg(long)]
    attempts: Option<PathBuf>,
    /// Plain-text corpus whose lexical diversity is reported alongside.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_classifier(s: &str) -> Result<ClassifierKind, String> {
    match s {
        "none" => Ok(ClassifierKind::None),
        "stub" => Ok(ClassifierKind::Stub),
        "http" => Ok(ClassifierKind::Http),
        _ => Err(format!(
            "unknown classifier {s:?} (expected none, stub or http)"
        )),
    }
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_EXTERNAL: u8 = 3;

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError {
            code: EXIT_DATA,
            error: e.into(),
        }
    }
}

pub fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError {
        code: EXIT_USAGE,
        error: anyhow::anyhow!("{msg}"),
    }
}

pub fn external(e: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: EXIT_EXTERNAL,
        error: e.into(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| CliError {
            code: EXIT_USAGE,
            error: e,
        })?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .map_err(|e| usage(format!("cannot start {} workers: {e}", cfg.workers)))?;
    }
    match cli.command {
        Command::Prep(a) => commands::prep(cfg, a),
        Command::Train(a) => commands::train(cfg, a),
        Command::Generate(a) => commands::generate(cfg, a),
        Command::Score(a) => commands::score(cfg, a),
        Command::Filter(a) => commands::filter(cfg, a),
        Command::Rank(a) => commands::rank(cfg, a),
        Command::Report(a) => commands::report(cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
