use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use serde::Serialize;
use tracing::warn;

use super::search::load_worlds;
use super::{create, io_err, open, write_jsonl, CliError, ExitStatus};
use crate::analytics::{
    common_subset, corpus_report, histogram_svg, length_table_csv, load_proofs, Comparison, CorpusReport,
    LoadedProofs, Normalization, StepCounting,
};
use crate::backends::{EnvironmentClient, ProofEnvironment, SubprocessTransport};
use crate::config::AppConfig;
use crate::curation::{curate, read_records, replay_record, write_pairs};
use crate::simenv::SimEnvironment;

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// ProofRecord JSONL corpus.
    #[arg(long)]
    pub input: PathBuf,
    /// (state, step) pair JSONL output.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the surviving ProofRecords here.
    #[arg(long)]
    pub records_out: Option<PathBuf>,
    /// Write the curation report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Proofs with at most this many steps are dropped.
    #[arg(long)]
    pub max_excluded_steps: Option<usize>,
    /// Keep steps that leave the goal unchanged.
    #[arg(long)]
    pub no_drop_noops: bool,
    /// Keep state and step text exactly as given.
    #[arg(long)]
    pub no_canonicalize: bool,
    /// Only these head tokens count as noops (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub noop_tactics: Vec<String>,
    /// Re-derive every step's states in an environment before curating.
    #[arg(long)]
    pub replay: bool,
    /// Replay against a simulated world instead of the configured environment.
    #[arg(long, requires = "replay")]
    pub world: Option<PathBuf>,
    /// Environment command line for --replay.
    #[arg(long)]
    pub env_cmd: Option<String>,
}

fn replay_env(args: &CurateArgs, cfg: &AppConfig) -> Result<Box<dyn ProofEnvironment>, CliError> {
    if let Some(p) = &args.world {
        let world = load_worlds(std::slice::from_ref(p))?.remove(0);
        return Ok(Box::new(SimEnvironment::new(world)));
    }
    let cmd = args
        .env_cmd
        .clone()
        .or_else(|| cfg.backends.env_cmd.clone())
        .ok_or_else(|| CliError::Usage("--replay needs --world, --env-cmd or backends.env_cmd".into()))?;
    let grace = Duration::from_secs_f64(cfg.backends.step_grace_s);
    let transport = SubprocessTransport::from_command_line(&cmd, grace)
        .map_err(|e| CliError::Backend(format!("cannot start environment: {e}")))?;
    Ok(Box::new(EnvironmentClient::new(
        transport,
        Duration::from_secs_f64(cfg.backends.request_timeout_s),
        grace,
    )))
}

pub fn cmd_curate(args: &CurateArgs, mut cfg: AppConfig, _out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let c = &mut cfg.curation;
    if let Some(n) = args.max_excluded_steps {
        c.max_excluded_steps = n;
    }
    if args.no_drop_noops {
        c.drop_noops = false;
    }
    if args.no_canonicalize {
        c.whitespace_canonicalization = false;
    }
    if !args.noop_tactics.is_empty() {
        c.noop_tactics = args.noop_tactics.clone();
    }

    let (mut records, errors) = read_records(open(&args.input)?).map_err(|e| CliError::Usage(e.to_string()))?;
    for e in &errors {
        warn!("skipping malformed record: {e}");
    }
    if records.is_empty() && !errors.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: all {} lines are malformed",
            args.input.display(),
            errors.len()
        )));
    }
    let mut replay_failures = 0;
    if args.replay {
        let env = replay_env(args, &cfg)?;
        let timeout = Duration::from_secs_f64(cfg.search.per_step_timeout_s);
        records = records
            .iter()
            .filter_map(|r| match replay_record(r, env.as_ref(), timeout) {
                Ok(r) => Some(r),
                Err(e) => {
                    warn!("dropping {}: {e}", r.theorem_id);
                    replay_failures += 1;
                    None
                }
            })
            .collect();
    }

    let (kept, mut report) = curate(&records, &cfg.curation);
    report.malformed_lines = errors.len();
    write_pairs(&kept, create(&args.out)?).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(p) = &args.records_out {
        write_jsonl(p, &kept)?;
    }
    if let Some(p) = &args.report {
        write_report(p, &report)?;
    }
    eprintln!("{}", report.summary());
    if args.replay {
        eprintln!("records dropped by failed replay: {replay_failures}");
    }
    Ok(ExitStatus::Success)
}

fn write_report<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path)(e.into()))?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Proof JSONL files: ProofRecords, search reports or {theorem_id, script} lines.
    pub inputs: Vec<PathBuf>,
    /// Compare two corpora on the theorems both prove.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub compare: Option<Vec<PathBuf>>,
    /// head_token or full_text.
    #[arg(long, default_value = "head_token")]
    pub normalization: Normalization,
    /// How scripts are split into steps: lines or expand_chains.
    #[arg(long, default_value = "lines")]
    pub step_counting: StepCounting,
    /// Write the length table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write one length histogram SVG per corpus into this directory.
    #[arg(long)]
    pub svg_dir: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    corpora: Vec<CorpusReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

fn corpus_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load(path: &Path, mode: StepCounting) -> Result<LoadedProofs, CliError> {
    let loaded = load_proofs(open(path)?, mode).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if loaded.proofs.is_empty() && loaded.empty_proofs == 0 && loaded.malformed_lines > 0 {
        return Err(CliError::Usage(format!(
            "{}: all {} lines are malformed",
            path.display(),
            loaded.malformed_lines
        )));
    }
    Ok(loaded)
}

fn stats_table(reports: &[CorpusReport], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<20}  {:>6}  {:>4}  {:>4}  {:>8}  {:>7}  {:>8}  {:>9}",
        "corpus", "proofs", "min", "max", "mean", "median", "std", "diversity"
    )?;
    for r in reports {
        match &r.summary {
            Some(s) => writeln!(
                out,
                "{:<20}  {:>6}  {:>4}  {:>4}  {:>8.3}  {:>7.1}  {:>8.3}  {:>9.4}",
                r.corpus, r.proofs, s.length.min, s.length.max, s.length.mean, s.length.median, s.length.std, s.mean_diversity
            )?,
            None => writeln!(out, "{:<20}  {:>6}  (no nonempty proofs)", r.corpus, r.proofs)?,
        }
    }
    Ok(())
}

fn comparison_lines(c: &Comparison, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "common theorems: {}", c.common_ids.len())?;
    if let Some(d) = &c.deltas {
        writeln!(
            out,
            "delta (A - B): min {} max {} mean {:.3} median {} std {:.3} diversity {:.4}",
            d.min, d.max, d.mean, d.median, d.std, d.mean_diversity
        )?;
    }
    Ok(())
}

pub fn cmd_analyze(args: &AnalyzeArgs, _cfg: AppConfig, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let mut paths = args.inputs.clone();
    if let Some(pair) = &args.compare {
        for p in pair {
            if !paths.contains(p) {
                paths.push(p.clone());
            }
        }
    }
    if paths.is_empty() {
        return Err(CliError::Usage("no input corpora".into()));
    }
    let mut loaded = Vec::with_capacity(paths.len());
    let mut corpora = Vec::with_capacity(paths.len());
    for p in &paths {
        let l = load(p, args.step_counting)?;
        corpora.push(corpus_report(&corpus_name(p), &l, args.normalization).map_err(|e| CliError::Usage(e.to_string()))?);
        loaded.push(l);
    }
    let comparison = match &args.compare {
        Some(pair) => {
            let side = |p: &PathBuf| &loaded[paths.iter().position(|q| q == p).expect("loaded")].proofs;
            Some(
                common_subset(side(&pair[0]), side(&pair[1]), args.normalization)
                    .map_err(|e| CliError::Usage(e.to_string()))?,
            )
        }
        None => None,
    };

    let stdout = Path::new("<stdout>");
    stats_table(&corpora, out).map_err(io_err(stdout))?;
    if let Some(c) = &comparison {
        comparison_lines(c, out).map_err(io_err(stdout))?;
    }
    if let Some(p) = &args.csv {
        let rows: Vec<(String, _)> = corpora
            .iter()
            .filter_map(|r| r.summary.as_ref().map(|s| (r.corpus.clone(), s.length.clone())))
            .collect();
        let mut w = create(p)?;
        w.write_all(length_table_csv(&rows).as_bytes()).map_err(io_err(p))?;
        w.flush().map_err(io_err(p))?;
    }
    if let Some(dir) = &args.svg_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        for r in &corpora {
            if let Some(s) = &r.summary {
                let path = dir.join(format!("{}.svg", r.corpus));
                std::fs::write(&path, histogram_svg(&r.corpus, &s.length)).map_err(io_err(&path))?;
            }
        }
    }
    if let Some(p) = &args.out {
        write_report(p, &AnalyzeReport { corpora, comparison })?;
    }
    Ok(ExitStatus::Success)
}
