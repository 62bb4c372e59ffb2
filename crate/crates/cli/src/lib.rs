//! `gbt-trust` command-line front end.
//!
//! Each command reads its inputs, writes artifacts into `--out`, and records
//! a run manifest next to them. Diagnostics go to stderr; stdout carries one
//! line of summary metrics.
//!
//! Exit codes: 0 success, 1 replay mismatch, 2 I/O or invalid generator spec,
//! 3 schema (malformed data or model), 4 configuration.

pub mod commands;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, Result};
use crate::manifest::Invocation;

/// Caps every worker count, including the shared rayon pool.
pub const THREADS_ENV: &str = "GBT_TRUST_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gbt-trust", version, about = "Gradient-boosted trees with an explanation and audit trail")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic CDS panel from a generator spec.
    Generate(GenerateArgs),
    /// Per-feature summary of a data file.
    Summarize(SummarizeArgs),
    /// Fit a boosted ensemble.
    Train(TrainArgs),
    /// Cross-validated grid search.
    Tune(TuneArgs),
    /// Explain a fitted model.
    Explain(ExplainArgs),
    /// Map run evidence onto the trustworthiness properties.
    Audit(AuditArgs),
    /// Rerun a command from its manifest and compare artifact digests.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "spread5")]
    pub target: String,
    /// Model the natural log of the target (all targets must be positive).
    #[arg(long)]
    pub log_target: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// JSON generator spec with `model` and `panel` sections.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON training config; unlisted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fraction of rows held out for validation; 0 trains on every row.
    #[arg(long, default_value_t = 0.3)]
    pub holdout: f64,
    /// Overrides the config seed. Also seeds the holdout split.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON object mapping parameter names to value lists.
    #[arg(long)]
    pub grid: PathBuf,
    /// Base training config for parameters the grid leaves out.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Vi,
    Pdp,
    Ice,
    Lime,
    Shap,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Vi => "vi",
            Method::Pdp => "pdp",
            Method::Ice => "ice",
            Method::Lime => "lime",
            Method::Shap => "shap",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Feature name for pdp and ice.
    #[arg(long)]
    pub feature: Option<String>,
    /// Zero-based data row to explain for lime and shap.
    #[arg(long)]
    pub row: Option<usize>,
    /// Enumerate every coalition (default when there are at most 12 features).
    #[arg(long, conflicts_with = "sampled")]
    pub exact: bool,
    /// Monte-Carlo permutation estimate.
    #[arg(long)]
    pub sampled: bool,
    #[arg(long, default_value_t = 1000)]
    pub permutations: usize,
    /// Background rows drawn from the data for shap.
    #[arg(long, default_value_t = 100)]
    pub background: usize,
    #[arg(long, default_value_t = gbt_trust_core::explain::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    /// Subtract each ICE curve's value at the lowest grid point.
    #[arg(long)]
    pub centered: bool,
    /// Smallest adjacent ratio reported by the pdp threshold scan.
    #[arg(long, default_value_t = 2.0)]
    pub min_jump_ratio: f64,
    /// Shuffles per feature for permutation importance.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 5000)]
    pub samples: usize,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub kernel_width: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    /// Directory holding earlier manifests and artifacts.
    #[arg(long)]
    pub dir: PathBuf,
    /// Defaults to `--dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Feature noise, as a fraction of each feature's std, for the robustness check.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fresh directory for the rerun's artifacts.
    #[arg(long)]
    pub out: PathBuf,
}

/// Process-wide settings shared by all commands.
#[derive(Debug, Clone)]
pub struct Context {
    pub invocation: Invocation,
    pub thread_cap: Option<usize>,
}

impl Context {
    /// Requested workers, defaulting to the machine's parallelism, then capped.
    pub fn workers(&self, requested: Option<usize>) -> usize {
        let want = requested.unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        });
        match self.thread_cap {
            Some(cap) => want.min(cap),
            None => want,
        }
    }
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

pub fn dispatch(cli: Cli, ctx: &Context) -> Result<String> {
    match cli.command {
        Command::Generate(a) => commands::generate::run(&a, ctx),
        Command::Summarize(a) => commands::summarize::run(&a, ctx),
        Command::Train(a) => commands::train::run(&a, ctx),
        Command::Tune(a) => commands::tune::run(&a, ctx),
        Command::Explain(a) => commands::explain::run(&a, ctx),
        Command::Audit(a) => commands::audit::run(&a, ctx),
        Command::Replay(a) => commands::replay::run(&a),
    }
}

/// Parses `argv`, runs the command, and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = thread_cap().and_then(|cap| {
        if let Some(n) = cap {
            // Fails harmlessly if the pool already exists.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        let cwd = std::env::current_dir().map_err(|e| CliError::io("current directory", e))?;
        let ctx = Context {
            invocation: Invocation {
                cwd,
                argv: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
            },
            thread_cap: cap,
        };
        dispatch(cli, &ctx)
    });
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("gbt-trust: {e}");
            e.exit_code()
        }
    }
}
