//! The `aegd` command-line front end.
//!
//! Each subcommand reads an optional `key = value` file (`--config`) and then
//! applies its flags on top. Exit codes: 0 success, 1 usage or configuration
//! error, 2 numerical divergence, 3 a verification check failed.

mod commands;
mod config;
mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_kmeans, cmd_run, cmd_sweep, write_trace_csv, TRACE_HEADER};
pub use config::{parse_list, Settings};
pub use verify::{cmd_verify, CheckResult, Suite, VerifySummary};

use crate::error::{Error, Result};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DIVERGED: u8 = 2;
pub const EXIT_CHECK_FAILED: u8 = 3;

/// Environment variable naming the worker thread count.
pub const WORKERS_ENV: &str = "AEGD_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "aegd",
    version,
    about = "Energy-adaptive gradient descent experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one optimizer and write its trace as CSV.
    Run(RunArgs),
    /// Classify terminal energy over a step-size grid and/or bisect for the threshold.
    Sweep(SweepArgs),
    /// Repeated k-means optimisation from random initialisations.
    Kmeans(KmeansArgs),
    /// Run a verification suite: identity, thresholds, rates, stochastic or all.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// `key = value` file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Problem preset: quad100, rosen2d, pl1d, x2, two-well.
    #[arg(long)]
    pub problem: Option<String>,
    /// aegd, saegd, aegdw, gd, gdm or adam.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub eta: Option<String>,
    /// Energy shift c.
    #[arg(long)]
    pub shift: Option<String>,
    /// global or elementwise.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub momentum: Option<String>,
    #[arg(long)]
    pub weight_decay: Option<String>,
    #[arg(long)]
    pub beta1: Option<String>,
    #[arg(long)]
    pub beta2: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Comma-separated starting point; defaults to the preset's.
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<String>,
    #[arg(long)]
    pub iters: Option<String>,
    #[arg(long)]
    pub grad_tol: Option<String>,
    #[arg(long)]
    pub target_f: Option<String>,
    /// Step decay schedule, `k0:factor[,k0:factor...]`.
    #[arg(long)]
    pub decay: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// iid, minibatch or shuffled-epoch.
    #[arg(long)]
    pub sampling: Option<String>,
    #[arg(long)]
    pub batch: Option<String>,
    /// CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<String>,
    #[arg(long)]
    pub shift: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    /// Comma-separated step sizes to classify.
    #[arg(long)]
    pub grid: Option<String>,
    /// Bisection bracket `low,high`.
    #[arg(long)]
    pub bisect: Option<String>,
    /// Iterations per classification run.
    #[arg(long)]
    pub budget: Option<String>,
    #[arg(long)]
    pub rel_eps: Option<String>,
    #[arg(long)]
    pub rel_width: Option<String>,
    /// Iterations kept in each per-step-size energy trace (0 disables them).
    #[arg(long)]
    pub trace_iters: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct KmeansArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated file of numeric features.
    #[arg(long)]
    pub data: Option<String>,
    /// Number of leading feature columns.
    #[arg(long)]
    pub dims: Option<String>,
    /// Number of centroids.
    #[arg(long)]
    pub k: Option<String>,
    /// em, gd or aegd.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub suite: String,
    /// JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and maps the outcome
/// to an exit code. Diagnostics go to stderr.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match configure_workers().and_then(|()| execute(&cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "{WORKERS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    // a pool that is already built keeps its size
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Runs a parsed command; `Ok` carries the exit code.
pub fn execute(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run(a) => cmd_run(&run_settings(a)?),
        Command::Sweep(a) => cmd_sweep(&sweep_settings(a)?),
        Command::Kmeans(a) => cmd_kmeans(&kmeans_settings(a)?),
        Command::Verify(a) => {
            let suite: Suite = a.suite.parse()?;
            cmd_verify(suite, a.out.as_deref())
        }
    }
}

pub const RUN_KEYS: &[&str] = &[
    "problem",
    "optimizer",
    "eta",
    "shift",
    "mode",
    "momentum",
    "weight_decay",
    "beta1",
    "beta2",
    "epsilon",
    "theta0",
    "iters",
    "grad_tol",
    "target_f",
    "decay",
    "seed",
    "sampling",
    "batch",
    "out",
];

pub const SWEEP_KEYS: &[&str] = &[
    "problem",
    "theta0",
    "shift",
    "mode",
    "grid",
    "bisect",
    "budget",
    "rel_eps",
    "rel_width",
    "trace_iters",
    "out",
];

pub const KMEANS_KEYS: &[&str] = &[
    "data", "dims", "k", "method", "eta", "trials", "seed", "out",
];

fn layered(
    keys: &'static [&'static str],
    file: Option<&Path>,
    flags: &[(&str, &Option<String>)],
) -> Result<Settings> {
    let mut s = Settings::new(keys);
    if let Some(path) = file {
        s.load_file(path)?;
    }
    for (k, v) in flags {
        s.set_opt(k, v)?;
    }
    Ok(s)
}

fn run_settings(a: &RunArgs) -> Result<Settings> {
    layered(
        RUN_KEYS,
        a.config.as_deref(),
        &[
            ("problem", &a.problem),
            ("optimizer", &a.optimizer),
            ("eta", &a.eta),
            ("shift", &a.shift),
            ("mode", &a.mode),
            ("momentum", &a.momentum),
            ("weight_decay", &a.weight_decay),
            ("beta1", &a.beta1),
            ("beta2", &a.beta2),
            ("epsilon", &a.epsilon),
            ("theta0", &a.theta0),
            ("iters", &a.iters),
            ("grad_tol", &a.grad_tol),
            ("target_f", &a.target_f),
            ("decay", &a.decay),
            ("seed", &a.seed),
            ("sampling", &a.sampling),
            ("batch", &a.batch),
            ("out", &a.out),
        ],
    )
}

fn sweep_settings(a: &SweepArgs) -> Result<Settings> {
    layered(
        SWEEP_KEYS,
        a.config.as_deref(),
        &[
            ("problem", &a.problem),
            ("theta0", &a.theta0),
            ("shift", &a.shift),
            ("mode", &a.mode),
            ("grid", &a.grid),
            ("bisect", &a.bisect),
            ("budget", &a.budget),
            ("rel_eps", &a.rel_eps),
            ("rel_width", &a.rel_width),
            ("trace_iters", &a.trace_iters),
            ("out", &a.out),
        ],
    )
}

fn kmeans_settings(a: &KmeansArgs) -> Result<Settings> {
    layered(
        KMEANS_KEYS,
        a.config.as_deref(),
        &[
            ("data", &a.data),
            ("dims", &a.dims),
            ("k", &a.k),
            ("method", &a.method),
            ("eta", &a.eta),
            ("trials", &a.trials),
            ("seed", &a.seed),
            ("out", &a.out),
        ],
    )
}

/// Writes to `path`, or stdout when `None`.
pub(crate) fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, bytes)?;
        }
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}
