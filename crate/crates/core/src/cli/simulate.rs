use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};

use super::search::load_worlds;
use super::{create, io_err, CliError, ExitStatus, SearchFlags};
use crate::config::AppConfig;
use crate::proof::compute_budget;
use crate::simenv::{
    ablation_variants, compare_variants, generate_world, make_critic, serve_jsonl, trap_suite, trap_world,
    CriticKind, ProofWorld, SimEnvironment, SimGenerator, TrapKind, VariantResult, WorldGenSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    /// Multi-perspective search against critic-only search at equal budget.
    Compare,
    /// Full search plus one random-replacement run per perspective.
    Ablation,
}

/// Random world generation parameters.
#[derive(Debug, Clone, Args)]
pub struct WorldGenFlags {
    #[arg(long, default_value_t = 50)]
    pub n_states: usize,
    #[arg(long, default_value_t = 3)]
    pub branching: usize,
    #[arg(long, default_value_t = 4)]
    pub solve_depth: usize,
    #[arg(long, default_value_t = 0.3)]
    pub trap_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noop_fraction: f64,
    /// Seed of the first generated world; later worlds count up from it.
    #[arg(long, default_value_t = 0)]
    pub gen_seed: u64,
}

impl WorldGenFlags {
    fn spec(&self, offset: u64) -> WorldGenSpec {
        WorldGenSpec {
            n_states: self.n_states,
            branching: self.branching,
            solve_depth: self.solve_depth,
            trap_fraction: self.trap_fraction,
            noop_fraction: self.noop_fraction,
            seed: self.gen_seed.wrapping_add(offset),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// World files (repeatable).
    #[arg(long = "world")]
    pub worlds: Vec<PathBuf>,
    /// Use N built-in trap worlds.
    #[arg(long, value_name = "N")]
    pub trap_suite: Option<usize>,
    /// Seed of the trap suite.
    #[arg(long, default_value_t = 1)]
    pub suite_seed: u64,
    /// Generate N random worlds.
    #[arg(long, value_name = "N")]
    pub count: Option<usize>,
    #[command(flatten)]
    pub gen: WorldGenFlags,
    #[arg(long, value_enum, default_value_t = SimMode::Compare)]
    pub mode: SimMode,
    /// oracle, trap or noisy:<amplitude>. Defaults to trap with --trap-suite, else oracle.
    #[arg(long)]
    pub critic: Option<CriticKind>,
    #[command(flatten)]
    pub flags: SearchFlags,
    /// Write the variant results as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn gen_error(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn suite(args: &SimulateArgs) -> Result<Vec<Arc<ProofWorld>>, CliError> {
    let mut worlds = load_worlds(&args.worlds)?;
    if let Some(n) = args.trap_suite {
        worlds.extend(trap_suite(n, args.suite_seed).into_iter().map(Arc::new));
    }
    if let Some(n) = args.count {
        for i in 0..n {
            worlds.push(Arc::new(generate_world(&args.gen.spec(i as u64)).map_err(gen_error)?));
        }
    }
    if worlds.is_empty() {
        return Err(CliError::Usage("no worlds: give --world, --trap-suite or --count".into()));
    }
    Ok(worlds)
}

fn variant_table(results: &[VariantResult], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<22}  {:>14}  {:>12}  {:>8}  {:>12}",
        "variant", "budget", "total", "solved", "candidates"
    )?;
    for r in results {
        let total = compute_budget(&r.budget).map_or("-".to_string(), |t| t.to_string());
        writeln!(
            out,
            "{:<22}  {:>14}  {:>12}  {:>8}  {:>12}",
            r.variant,
            r.budget.to_string(),
            total,
            format!("{}/{}", r.solved, r.attempted),
            r.candidates
        )?;
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs, mut cfg: AppConfig, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    args.flags.apply(&mut cfg.search);
    cfg.search.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let worlds = suite(args)?;
    let critic = args.critic.unwrap_or(if args.trap_suite.is_some() {
        CriticKind::Trap
    } else {
        CriticKind::Oracle
    });
    let results = match args.mode {
        SimMode::Compare => compare_variants(&worlds, critic, &cfg.search),
        SimMode::Ablation => ablation_variants(&worlds, critic, &cfg.search),
    };
    if let Some(p) = &args.out {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &results).map_err(|e| io_err(p)(e.into()))?;
        w.write_all(b"\n").map_err(io_err(p))?;
        w.flush().map_err(io_err(p))?;
    }
    variant_table(&results, out).map_err(io_err(Path::new("<stdout>")))?;
    Ok(ExitStatus::Success)
}

#[derive(Debug, Args)]
pub struct GenWorldArgs {
    /// Destination world file.
    #[arg(long)]
    pub out: PathBuf,
    /// Build a trap world of this kind instead: tactic_score, case_count or state_length.
    #[arg(long, value_parser = parse_trap_kind)]
    pub trap: Option<TrapKind>,
    /// Seed of the trap world.
    #[arg(long, default_value_t = 0)]
    pub trap_seed: u64,
    #[command(flatten)]
    pub gen: WorldGenFlags,
}

fn parse_trap_kind(s: &str) -> Result<TrapKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown trap kind {s:?}; use tactic_score, case_count or state_length"))
}

pub fn cmd_gen_world(args: &GenWorldArgs, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let world = match args.trap {
        Some(kind) => trap_world(kind, args.trap_seed),
        None => generate_world(&args.gen.spec(0)).map_err(gen_error)?,
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    world.save(&args.out).map_err(gen_error)?;
    let depth = world
        .distance_to_solved(world.root())
        .map_or("unsolvable".to_string(), |d| d.to_string());
    writeln!(
        out,
        "{}: {} states, {} edges, shortest proof {depth}",
        world.name(),
        world.num_states(),
        world.edges().len()
    )
    .map_err(io_err(Path::new("<stdout>")))?;
    Ok(ExitStatus::Success)
}

#[derive(Debug, Args)]
pub struct SimServeArgs {
    /// World file to serve.
    #[arg(long)]
    pub world: PathBuf,
    /// oracle, trap or noisy:<amplitude>.
    #[arg(long, default_value = "oracle")]
    pub critic: CriticKind,
}

pub fn cmd_sim_serve(args: &SimServeArgs) -> Result<ExitStatus, CliError> {
    let world = load_worlds(std::slice::from_ref(&args.world))?.remove(0);
    let env = SimEnvironment::new(world.clone());
    let generator = SimGenerator::new(world.clone());
    let critic = make_critic(args.critic, world);
    let stdin = std::io::stdin();
    serve_jsonl(
        &env,
        &generator,
        critic.as_ref(),
        BufReader::new(stdin.lock()),
        std::io::stdout().lock(),
    )
    .map_err(io_err(Path::new("<stdio>")))?;
    Ok(ExitStatus::Success)
}
