use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::Args;
use tracing::info;

use super::{create, io_err, open, write_jsonl, CliError, ExitStatus, SearchFlags};
use crate::backends::{
    Critic, CriticClient, EnvironmentClient, FixtureRecorder, FixtureReplay, GeneratorClient,
    HttpTransport, ProofEnvironment, SubprocessTransport, TacticGenerator, Transport,
};
use crate::config::{AppConfig, ConfigError};
use crate::engine::{
    run_accumulative, run_pass_at_k, Backends, JsonlTrace, NullTrace, PassReport, RoundReport, Theorem,
    TraceSink,
};
use crate::simenv::{load_world, make_critic, CriticKind, ProofWorld, SimEnvironment, SimGenerator};

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// JSONL file of {"theorem_id", "statement"} objects.
    #[arg(long, conflicts_with = "statement")]
    pub theorems: Option<PathBuf>,
    /// A single inline theorem statement.
    #[arg(long)]
    pub statement: Option<String>,
    /// Id for --statement.
    #[arg(long, default_value = "theorem", requires = "statement")]
    pub id: String,
    /// Search simulated worlds instead of live services (repeatable).
    #[arg(long = "world", conflicts_with_all = ["theorems", "statement"])]
    pub worlds: Vec<PathBuf>,
    /// Critic for simulated worlds: oracle, trap or noisy:<amplitude>.
    #[arg(long, default_value = "oracle")]
    pub critic: CriticKind,
    #[command(flatten)]
    pub flags: SearchFlags,
    /// Accumulative rounds; 1 is plain pass@k.
    #[arg(long, default_value_t = 1)]
    pub rounds: usize,
    /// Write per-iteration trace records as JSONL.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// PassReport JSONL output. Defaults to <output_dir>/reports.jsonl.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write RoundReport JSONL here when --rounds > 1.
    #[arg(long)]
    pub rounds_out: Option<PathBuf>,
    #[arg(long)]
    pub generator_url: Option<String>,
    #[arg(long)]
    pub critic_url: Option<String>,
    /// Environment command line speaking JSON lines on stdio.
    #[arg(long)]
    pub env_cmd: Option<String>,
    /// HTTP environment service.
    #[arg(long)]
    pub env_url: Option<String>,
    /// Capture generator and critic exchanges to this JSONL file.
    #[arg(long)]
    pub record_fixtures: Option<PathBuf>,
    /// Answer generator and critic requests from a captured fixture file.
    #[arg(long, conflicts_with = "record_fixtures")]
    pub replay_fixtures: Option<PathBuf>,
}

/// Owned services behind one set of `Backends`.
struct Source {
    generator: Box<dyn TacticGenerator>,
    critic: Box<dyn Critic>,
    environment: Box<dyn ProofEnvironment>,
}

pub(crate) fn read_theorems(path: &Path) -> Result<Vec<Theorem>, CliError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Theorem = serde_json::from_str(&line)
            .map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(t);
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("{}: no theorems", path.display())));
    }
    Ok(out)
}

pub(crate) fn load_worlds(paths: &[PathBuf]) -> Result<Vec<Arc<ProofWorld>>, CliError> {
    paths
        .iter()
        .map(|p| {
            load_world(p)
                .map(Arc::new)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn read_fixtures(path: &Path) -> Result<FixtureReplay, CliError> {
    FixtureReplay::from_jsonl(open(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn live_environment(cfg: &AppConfig) -> Result<Box<dyn ProofEnvironment>, CliError> {
    let b = &cfg.backends;
    let control = Duration::from_secs_f64(b.request_timeout_s);
    let grace = Duration::from_secs_f64(b.step_grace_s);
    let transport: Box<dyn Transport> = match (&b.env_cmd, &b.env_url) {
        (Some(cmd), _) => Box::new(
            SubprocessTransport::from_command_line(cmd, grace)
                .map_err(|e| CliError::Backend(format!("cannot start environment: {e}")))?,
        ),
        (None, Some(url)) => Box::new(HttpTransport::new(url.as_str()).map_err(|e| CliError::Backend(e.to_string()))?),
        (None, None) => unreachable!("validated"),
    };
    Ok(Box::new(EnvironmentClient::new(transport, control, grace)))
}

fn http(url: &str) -> Result<HttpTransport, CliError> {
    HttpTransport::new(url).map_err(|e| CliError::Backend(e.to_string()))
}

fn validate_replay_env(cfg: &AppConfig) -> Result<(), ConfigError> {
    cfg.search
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    match (&cfg.backends.env_cmd, &cfg.backends.env_url) {
        (None, None) => Err(ConfigError::Invalid("fixture replay still needs an environment".into())),
        (Some(_), Some(_)) => Err(ConfigError::Invalid("env_cmd and env_url are exclusive".into())),
        _ => Ok(()),
    }
}

fn summary_table(reports: &[PassReport], out: &mut dyn Write) -> std::io::Result<()> {
    let width = reports.iter().map(|r| r.theorem_id.len()).max().unwrap_or(7).max(7);
    writeln!(out, "{:<width$}  {:<13}  {:>6}  {:>10}  {:>6}", "theorem", "result", "passes", "candidates", "steps")?;
    for r in reports {
        let result = match r.outcomes.last() {
            Some(o) => o.kind.to_string(),
            None => "error".into(),
        };
        let steps = r.proof().map_or("-".to_string(), |p| p.len().to_string());
        writeln!(
            out,
            "{:<width$}  {:<13}  {:>6}  {:>10}  {:>6}",
            r.theorem_id,
            result,
            r.outcomes.len(),
            r.total_candidates,
            steps
        )?;
    }
    let solved = reports.iter().filter(|r| r.solved_any).count();
    writeln!(out, "solved {solved}/{}", reports.len())
}

pub(crate) fn run_status(reports: &[PassReport]) -> ExitStatus {
    if reports.iter().any(|r| r.outcomes.is_empty() && !r.errors.is_empty()) {
        ExitStatus::BackendFailure
    } else if reports.iter().all(|r| r.solved_any) {
        ExitStatus::Success
    } else {
        ExitStatus::Unsolved
    }
}

/// The latest report for every problem, in problem order.
fn final_reports(rounds: &[RoundReport], ids: &[String]) -> Vec<PassReport> {
    ids.iter()
        .filter_map(|id| {
            rounds
                .iter()
                .rev()
                .flat_map(|r| r.reports.iter())
                .find(|r| &r.theorem_id == id)
                .cloned()
        })
        .collect()
}

pub fn cmd_search(args: &SearchArgs, mut cfg: AppConfig, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    args.flags.apply(&mut cfg.search);
    let b = &mut cfg.backends;
    for (slot, flag) in [
        (&mut b.generator_url, &args.generator_url),
        (&mut b.critic_url, &args.critic_url),
        (&mut b.env_cmd, &args.env_cmd),
        (&mut b.env_url, &args.env_url),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    if args.env_url.is_some() && args.env_cmd.is_none() {
        b.env_cmd = None;
    }
    if args.env_cmd.is_some() && args.env_url.is_none() {
        b.env_url = None;
    }
    if args.rounds == 0 {
        return Err(CliError::Usage("--rounds must be at least 1".into()));
    }
    let replay = args.replay_fixtures.as_deref().map(read_fixtures).transpose()?;

    let (theorems, sources): (Vec<(Theorem, usize)>, Vec<Source>) = if !args.worlds.is_empty() {
        cfg.search
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let worlds = load_worlds(&args.worlds)?;
        let theorems = worlds
            .iter()
            .enumerate()
            .map(|(i, w)| (Theorem::new(w.name(), w.statement()), i))
            .collect();
        let sources = worlds
            .iter()
            .map(|w| Source {
                generator: match &replay {
                    Some(r) => Box::new(r.clone()),
                    None => Box::new(SimGenerator::new(w.clone())),
                },
                critic: match &replay {
                    Some(r) => Box::new(r.clone()),
                    None => make_critic(args.critic, w.clone()),
                },
                environment: Box::new(SimEnvironment::new(w.clone())),
            })
            .collect();
        (theorems, sources)
    } else {
        match &replay {
            Some(_) => validate_replay_env(&cfg)?,
            None => cfg.validate_live()?,
        }
        let theorems = match (&args.theorems, &args.statement) {
            (Some(p), _) => read_theorems(p)?,
            (None, Some(s)) => vec![Theorem::new(args.id.clone(), s.clone())],
            (None, None) => return Err(CliError::Usage("give --theorems, --statement or --world".into())),
        };
        let timeout = Duration::from_secs_f64(cfg.backends.request_timeout_s);
        let (generator, critic): (Box<dyn TacticGenerator>, Box<dyn Critic>) = match replay {
            Some(r) => (Box::new(r.clone()), Box::new(r)),
            None => (
                Box::new(GeneratorClient::new(http(cfg.backends.generator_url.as_deref().unwrap_or_default())?, timeout)),
                Box::new(CriticClient::new(http(cfg.backends.critic_url.as_deref().unwrap_or_default())?, timeout)),
            ),
        };
        let source = Source {
            generator,
            critic,
            environment: live_environment(&cfg)?,
        };
        (theorems.into_iter().map(|t| (t, 0)).collect(), vec![source])
    };

    let recorders: Vec<FixtureRecorder<&dyn TacticGenerator, &dyn Critic>> = if args.record_fixtures.is_some() {
        sources
            .iter()
            .map(|s| FixtureRecorder::new(s.generator.as_ref(), s.critic.as_ref()))
            .collect()
    } else {
        Vec::new()
    };
    let backends_for = |i: usize| -> Backends<'_> {
        let s = &sources[i];
        match recorders.get(i) {
            Some(r) => Backends {
                generator: r,
                critic: r,
                environment: s.environment.as_ref(),
            },
            None => Backends {
                generator: s.generator.as_ref(),
                critic: s.critic.as_ref(),
                environment: s.environment.as_ref(),
            },
        }
    };
    let problems: Vec<(Theorem, Backends<'_>)> =
        theorems.iter().map(|(t, i)| (t.clone(), backends_for(*i))).collect();

    let mut file_trace = args.trace.as_deref().map(create).transpose()?.map(JsonlTrace::new);
    let mut null = NullTrace;
    let trace: &mut dyn TraceSink = match file_trace.as_mut() {
        Some(t) => t,
        None => &mut null,
    };

    info!(problems = problems.len(), budget = %cfg.search.budget, "starting search");
    let reports = if args.rounds == 1 {
        problems
            .iter()
            .map(|(t, b)| run_pass_at_k(t, *b, &cfg.search, trace))
            .collect()
    } else {
        let rounds = run_accumulative(&problems, &cfg.search, args.rounds, trace);
        for r in &rounds {
            info!(
                round = r.round,
                attempted = r.attempted.len(),
                newly_solved = r.newly_solved,
                cumulative = r.cumulative_solved,
                "round finished"
            );
        }
        if let Some(p) = &args.rounds_out {
            write_jsonl(p, &rounds)?;
        }
        let ids: Vec<String> = problems.iter().map(|(t, _)| t.theorem_id.clone()).collect();
        final_reports(&rounds, &ids)
    };

    if let (Some(t), Some(p)) = (file_trace, &args.trace) {
        t.finish().map_err(io_err(p))?;
    }
    if let Some(p) = &args.record_fixtures {
        let mut w = create(p)?;
        for r in &recorders {
            r.write_jsonl(&mut w).map_err(io_err(p))?;
        }
        w.flush().map_err(io_err(p))?;
    }
    let out_path = args.out.clone().unwrap_or_else(|| cfg.output_dir.join("reports.jsonl"));
    write_jsonl(&out_path, &reports)?;
    summary_table(&reports, out).map_err(io_err(Path::new("<stdout>")))?;
    Ok(run_status(&reports))
}
