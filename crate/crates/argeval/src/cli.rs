//! Command-line surface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 gateway error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::corpus::{self, Dataset};
use crate::gateway::GatewayError;
use crate::orchestrator::{self, RunError};
use crate::report::{ErrorGrouping, ReportFormat, ReportOutput, ReportSpec};

#[derive(Parser, Debug)]
#[command(
    name = "argeval",
    version,
    about = "Argument-classification evaluation harness for chat-completion models"
)]
struct Cli {
    /// Experiment config file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Response cache file; overrides the config's gateway.cache.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,

    /// Sampling seed; overrides the config's sampling.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Replay-only mode: serve everything from the cache, treat misses as
    /// errors.
    #[arg(long, global = true)]
    offline: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a corpus file, validate it, and write canonical records plus
    /// label statistics.
    Ingest {
        /// Source schema: ukp (topic TSV) or argsme (debate JSON).
        #[arg(long)]
        dataset: String,
        /// Topic key (ukp) or portal name (argsme).
        #[arg(long)]
        topic: String,
        /// Corpus file to load.
        #[arg(long)]
        input: PathBuf,
        /// Directory for records.jsonl and stats.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Draw a reproducible subsample from canonical records.
    Sample {
        /// Canonical records file (JSONL).
        #[arg(long)]
        input: PathBuf,
        /// Sample size.
        #[arg(long)]
        n: usize,
        /// Uniform instead of label-stratified sampling.
        #[arg(long)]
        uniform: bool,
        /// Output JSONL file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured experiment and persist a run directory.
    Run {
        /// Run directory; overrides the config's output_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Leave-one-out prompt ablation over the four base prompts.
    Ablate {
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Paired few-shot versus zero-shot comparison.
    Fewshot {
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render report files from a persisted run directory.
    Report {
        /// Run directory produced by `run` (and optionally `ablate`).
        #[arg(long)]
        run_dir: PathBuf,
        /// Comma-separated subset of: metrics_table, heatmap_matrix,
        /// prompt_accuracy, error_types, ablation_table.
        #[arg(long, value_delimiter = ',', required = true)]
        outputs: Vec<String>,
        /// csv or markdown.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Metrics mode feeding the heatmap (e.g. Certainty, P1); default
        /// averages the base prompts.
        #[arg(long)]
        mode: Option<String>,
        /// Error-type grouping: prompt, topic, or model.
        #[arg(long, default_value = "prompt")]
        group_by: String,
    },
}

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_GATEWAY: i32 = 3;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Gateway(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Gateway(_) => EXIT_GATEWAY,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Gateway(m) => m,
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Gateway(_) => CliError::Gateway(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<corpus::CorpusError> for CliError {
    fn from(e: corpus::CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::report::ReportError> for CliError {
    fn from(e: crate::report::ReportError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        CliError::Gateway(e.to_string())
    }
}

/// Parses and dispatches; the testable entry point behind `main`.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        CliError::Usage("--config <file> is required for this command".to_string())
    })?;
    let mut config = RunConfig::load(path).map_err(|e| CliError::Data(e.to_string()))?;
    if let Some(seed) = cli.seed {
        config.sampling.seed = seed;
    }
    if let Some(cache) = &cli.cache {
        config.gateway.cache = Some(cache.clone());
    }
    if cli.offline {
        config.gateway.offline = true;
    }
    Ok(config)
}

fn resolve_out_dir(config: &RunConfig, flag: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    flag.clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| {
            CliError::Usage(
                "no output directory: pass --out-dir or set output_dir in the config".to_string(),
            )
        })
}

fn ingest(dataset: &str, topic: &str, input: &Path, out_dir: &Path) -> Result<(), CliError> {
    let kind = match dataset.to_lowercase().as_str() {
        "ukp" => Dataset::Ukp,
        "argsme" | "args.me" => Dataset::ArgsMe,
        other => {
            return Err(CliError::Usage(format!(
                "unknown dataset {other:?} (use ukp|argsme)"
            )))
        }
    };
    let records = match kind {
        Dataset::Ukp => corpus::load_ukp(input, topic)?,
        Dataset::ArgsMe => corpus::load_argsme(input, topic)?,
    };
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    let records_path = out_dir.join("records.jsonl");
    corpus::write_jsonl(&records, &records_path)?;
    let stats = corpus::corpus_stats(&records);
    let stats_path = out_dir.join("stats.csv");
    std::fs::write(&stats_path, stats.to_csv())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", stats_path.display())))?;
    let combined = stats.combined();
    println!(
        "ingested {} records from {} ({}: For={} Against={} NoArgument={})",
        records.len(),
        input.display(),
        topic,
        combined.for_count,
        combined.against_count,
        combined.no_argument_count,
    );
    println!(
        "wrote {} and {}",
        records_path.display(),
        stats_path.display()
    );
    Ok(())
}

fn sample(input: &Path, n: usize, uniform: bool, seed: u64, out: &Path) -> Result<(), CliError> {
    let records = corpus::read_jsonl(input)?;
    let sampled = if uniform {
        corpus::uniform_sample(&records, n, seed)?
    } else {
        corpus::stratified_sample(&records, n, seed)?
    };
    corpus::write_jsonl(&sampled, out)?;
    println!(
        "sampled {} of {} records (seed {seed}, {}) into {}",
        sampled.len(),
        records.len(),
        if uniform { "uniform" } else { "stratified" },
        out.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest {
            dataset,
            topic,
            input,
            out_dir,
        } => ingest(dataset, topic, input, out_dir),
        Command::Sample {
            input,
            n,
            uniform,
            out,
        } => sample(input, *n, *uniform, cli.seed.unwrap_or(0), out),
        Command::Run { out_dir } => {
            let config = load_config(&cli)?;
            let out_dir = resolve_out_dir(&config, out_dir)?;
            let result = orchestrator::run_experiment(&config, &out_dir)?;
            println!(
                "run complete: {} metric rows, {} failures, written to {}",
                result.metrics.len(),
                result.failures.len(),
                result.out_dir.display()
            );
            for failure in &result.failures {
                eprintln!("warning: {failure}");
            }
            Ok(())
        }
        Command::Ablate { out_dir } => {
            let config = load_config(&cli)?;
            let out_dir = resolve_out_dir(&config, out_dir)?;
            let result = orchestrator::run_ablation(&config, &out_dir)?;
            println!(
                "ablation complete: {} rows, written to {}",
                result.rows.len(),
                out_dir.join("ablation.csv").display()
            );
            for failure in &result.failures {
                eprintln!("warning: {failure}");
            }
            Ok(())
        }
        Command::Fewshot { out_dir } => {
            let config = load_config(&cli)?;
            let out_dir = resolve_out_dir(&config, out_dir)?;
            let result = orchestrator::compare_fewshot(&config, &out_dir)?;
            println!(
                "few-shot comparison complete: {} rows, written to {}",
                result.rows.len(),
                out_dir.join("fewshot.csv").display()
            );
            for failure in &result.failures {
                eprintln!("warning: {failure}");
            }
            Ok(())
        }
        Command::Report {
            run_dir,
            outputs,
            format,
            mode,
            group_by,
        } => {
            let outputs: Vec<ReportOutput> = outputs
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_, _>>()
                .map_err(CliError::Usage)?;
            let format: ReportFormat = format.parse().map_err(CliError::Usage)?;
            let group_by: ErrorGrouping = group_by.parse().map_err(CliError::Usage)?;
            let spec = ReportSpec {
                run_dir: run_dir.clone(),
                outputs,
                format,
                heatmap_mode: mode.clone(),
                group_by,
            };
            let written = crate::report::write_reports(&spec)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}
