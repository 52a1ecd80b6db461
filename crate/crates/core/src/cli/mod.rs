//! The `mps` command-line frontend.
//!
//! Exit codes: 0 success, 1 some problem unsolved, 2 configuration error,
//! 3 backend failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{AppConfig, ConfigError};
use crate::engine::{PoolMode, SearchConfig};
use crate::perspectives::Perspective;
use crate::proof::{compute_budget, BudgetSpec};

mod data;
mod search;
mod simulate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Unsolved = 1,
    ConfigError = 2,
    BackendFailure = 3,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("backend: {0}")]
    Backend(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Backend(_) => ExitStatus::BackendFailure,
            _ => ExitStatus::ConfigError,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub(crate) fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| io_err(path)(e.into()))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Parser)]
#[command(name = "mps", version, about = "Multi-perspective stepwise proof search")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log filter, e.g. `info` or `mps_core=debug`. Overrides the config file.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prove theorems with pass@k (optionally accumulative) search.
    Search(search::SearchArgs),
    /// Compare search variants on simulated worlds.
    Simulate(simulate::SimulateArgs),
    /// Curate a ProofRecord corpus into (state, step) training pairs.
    Curate(data::CurateArgs),
    /// Proof length and diversity statistics.
    Analyze(data::AnalyzeArgs),
    /// Print the explored-candidate budget of a budget spec.
    Budget(BudgetArgs),
    /// Write a generated or trap world to a file.
    GenWorld(simulate::GenWorldArgs),
    /// Serve a world's generator, environment and critic as JSON lines on stdio.
    SimServe(simulate::SimServeArgs),
}

/// Search settings shared by `search` and `simulate`.
#[derive(Debug, Clone, Default, Args)]
pub struct SearchFlags {
    /// Budget as n_pass x n_perspectives x n_max_iter x n_samples, e.g. 64x4x800x8.
    #[arg(long)]
    pub budget: Option<BudgetSpec>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// local, local_with_global_fallback or global.
    #[arg(long)]
    pub pool_mode: Option<PoolMode>,
    /// Concurrent tactic executions per iteration.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Whole-search timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Per-tactic timeout in seconds.
    #[arg(long)]
    pub step_timeout: Option<f64>,
    /// Keep children whose goal text was already seen.
    #[arg(long)]
    pub no_dedup: bool,
    /// Replace one perspective's pick with a random draw.
    #[arg(long)]
    pub ablate: Option<Perspective>,
}

impl SearchFlags {
    pub fn apply(&self, cfg: &mut SearchConfig) {
        if let Some(b) = self.budget {
            cfg.budget = b;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = self.pool_mode {
            cfg.pool_mode = p;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(t) = self.timeout {
            cfg.whole_search_timeout_s = t;
        }
        if let Some(t) = self.step_timeout {
            cfg.per_step_timeout_s = t;
        }
        if self.no_dedup {
            cfg.dedup_states = false;
            cfg.dedup_tactics_per_node = false;
        }
        if self.ablate.is_some() {
            cfg.ablate = self.ablate;
        }
    }
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Budget spec such as 64x4x800x8.
    pub spec: BudgetSpec,
    /// Print a JSON object instead of the bare number.
    #[arg(long)]
    pub json: bool,
}

fn cmd_budget(args: &BudgetArgs, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let total = compute_budget(&args.spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let text = if args.json {
        serde_json::json!({ "budget": args.spec, "total": total }).to_string()
    } else {
        total.to_string()
    };
    writeln!(out, "{text}").map_err(io_err(Path::new("<stdout>")))?;
    Ok(ExitStatus::Success)
}

fn init_logging(filter: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .or_else(|_| tracing_subscriber::EnvFilter::try_new(filter))
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .try_init();
}

/// Parses `argv` and runs the command, writing reports to `out`.
pub fn run<I, T>(argv: I, out: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::ConfigError
            } else {
                ExitStatus::Success
            };
        }
    };
    match execute(&cli, out) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("mps: {e}");
            e.status()
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    if let Command::Budget(args) = &cli.command {
        return cmd_budget(args, out);
    }
    let cfg = AppConfig::load(cli.config.as_deref())?;
    init_logging(cli.log_level.as_deref().unwrap_or(&cfg.log_level));
    match &cli.command {
        Command::Search(a) => search::cmd_search(a, cfg, out),
        Command::Simulate(a) => simulate::cmd_simulate(a, cfg, out),
        Command::Curate(a) => data::cmd_curate(a, cfg, out),
        Command::Analyze(a) => data::cmd_analyze(a, cfg, out),
        Command::GenWorld(a) => simulate::cmd_gen_world(a, out),
        Command::SimServe(a) => simulate::cmd_sim_serve(a),
        Command::Budget(_) => unreachable!("handled above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (ExitStatus, String) {
        let mut out = Vec::new();
        let status = run(std::iter::once("mps").chain(args.iter().copied()), &mut out);
        (status, String::from_utf8(out).unwrap())
    }

    #[test]
    fn budget_command() {
        assert_eq!(run_capture(&["budget", "64x4x800x8"]), (ExitStatus::Success, "1638400\n".into()));
        assert_eq!(run_capture(&["budget", "64×4×800×8"]).1, "1638400\n");
        assert_eq!(run_capture(&["budget", "64x4x0x8"]).0, ExitStatus::ConfigError);
        let (_, json) = run_capture(&["budget", "--json", "1x4x800x8"]);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["total"], 25600);
        assert_eq!(v["budget"]["n_max_iter"], 800);
    }

    #[test]
    fn unknown_flags_are_usage_errors() {
        assert_eq!(run_capture(&["budget", "--frobnicate", "1x1x1x1"]).0, ExitStatus::ConfigError);
        assert_eq!(run_capture(&["no-such-command"]).0, ExitStatus::ConfigError);
        assert_eq!(run_capture(&["--help"]).0, ExitStatus::Success);
    }

    #[test]
    fn search_flags_override() {
        let mut cfg = SearchConfig::default();
        SearchFlags {
            budget: Some("2x1x10x4".parse().unwrap()),
            no_dedup: true,
            ..SearchFlags::default()
        }
        .apply(&mut cfg);
        assert_eq!(cfg.budget, BudgetSpec::new(2, 1, 10, 4));
        assert!(!cfg.dedup_states);
        assert_eq!(cfg.per_step_timeout_s, 60.0);
    }
}
