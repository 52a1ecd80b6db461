//! Multi-perspective stepwise search: expand the frontier, execute candidate
//! tactics, select the next frontier from the resulting pool, and verify any
//! stepwise proof as a whole script before reporting it solved.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use crate::backends::{
    apply_step, critic_distance, generate_tactics, verify_whole_proof, BackendError, Critic,
    ProofEnvironment, StepResponse, TacticGenerator,
};
use crate::perspectives::{select_with, Perspective, ScoreTable};
use crate::proof::{
    compute_budget, concat_script, BudgetSpec, NodeId, OutcomeKind, ProofError, ProofRecord,
    SearchOutcome, SearchStats, SearchTree,
};

mod trace;

pub use trace::{ExecRecord, ExecStatus, JsonlTrace, NullTrace, SkipRecord, TraceRecord, TraceSink};

/// Distance assigned to a node the critic failed to score twice.
pub const UNSCORED_DISTANCE: f64 = f64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// Only the children produced in this iteration.
    Local,
    /// Local, or every unexpanded node when the local pool is empty.
    #[default]
    LocalWithGlobalFallback,
    /// Every unexpanded node.
    Global,
}

impl std::str::FromStr for PoolMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(PoolMode::Local),
            "local_with_global_fallback" | "fallback" => Ok(PoolMode::LocalWithGlobalFallback),
            "global" => Ok(PoolMode::Global),
            other => Err(format!("unknown pool mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    #[serde(deserialize_with = "budget_notation_or_table")]
    pub budget: BudgetSpec,
    pub whole_search_timeout_s: f64,
    pub per_step_timeout_s: f64,
    pub pool_mode: PoolMode,
    pub seed: u64,
    pub dedup_states: bool,
    pub dedup_tactics_per_node: bool,
    /// Concurrent tactic executions per iteration; 1 runs sequentially.
    pub workers: usize,
    /// Perspective whose slot is filled by a seeded random draw.
    pub ablate: Option<Perspective>,
    #[serde(skip)]
    pub score_table: ScoreTable,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: BudgetSpec::default(),
            whole_search_timeout_s: 3600.0,
            per_step_timeout_s: 60.0,
            pool_mode: PoolMode::default(),
            seed: 0,
            dedup_states: true,
            dedup_tactics_per_node: true,
            workers: 1,
            ablate: None,
            score_table: ScoreTable::default(),
        }
    }
}

/// Accepts `budget = "64x4x800x8"` as well as the four named fields.
fn budget_notation_or_table<'de, D: serde::Deserializer<'de>>(de: D) -> Result<BudgetSpec, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        Notation(String),
        Table(BudgetSpec),
    }
    match Either::deserialize(de)? {
        Either::Notation(s) => s.parse().map_err(serde::de::Error::custom),
        Either::Table(b) => Ok(b),
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        compute_budget(&self.budget)?;
        if !(1..=4).contains(&self.budget.n_perspectives) {
            return Err(EngineError::Config(format!(
                "n_perspectives must be 1..=4, got {}",
                self.budget.n_perspectives
            )));
        }
        if !(self.per_step_timeout_s > 0.0 && self.whole_search_timeout_s > 0.0) {
            return Err(EngineError::Config("timeouts must be positive".into()));
        }
        if self.per_step_timeout_s > self.whole_search_timeout_s {
            return Err(EngineError::Config(
                "per-step timeout exceeds the whole-search timeout".into(),
            ));
        }
        if self.workers == 0 {
            return Err(EngineError::Config("workers must be at least 1".into()));
        }
        if let Some(p) = self.ablate {
            if !self.perspectives().contains(&p) {
                return Err(EngineError::Config(format!("cannot ablate inactive perspective {p}")));
            }
        }
        Ok(())
    }

    /// Active perspectives: the first `n_perspectives` in evaluation order.
    /// One perspective is plain critic-guided best-first search.
    pub fn perspectives(&self) -> &'static [Perspective] {
        let n = (self.budget.n_perspectives as usize).clamp(1, 4);
        &Perspective::ALL[..n]
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SearchConfig {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("environment rejected the statement: {0}")]
    Init(#[source] BackendError),
    #[error(transparent)]
    Proof(#[from] ProofError),
}

/// The three services one search talks to.
#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub generator: &'a dyn TacticGenerator,
    pub environment: &'a dyn ProofEnvironment,
    pub critic: &'a dyn Critic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theorem {
    #[serde(alias = "id")]
    pub theorem_id: String,
    pub statement: String,
}

impl Theorem {
    pub fn new(id: impl Into<String>, statement: impl Into<String>) -> Self {
        Theorem {
            theorem_id: id.into(),
            statement: statement.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassReport {
    pub theorem_id: String,
    pub outcomes: Vec<SearchOutcome>,
    pub solved_any: bool,
    pub total_candidates: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl PassReport {
    pub fn proof(&self) -> Option<&ProofRecord> {
        self.outcomes.iter().find(|o| o.is_solved()).and_then(|o| o.proof.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub attempted: Vec<String>,
    pub reports: Vec<PassReport>,
    pub newly_solved: usize,
    pub cumulative_solved: usize,
}

fn request_seed(seed: u64, iteration: u64, node: NodeId) -> u64 {
    let mut h = seed ^ 0x5851_F42D_4C95_7F2D;
    for v in [iteration, node as u64] {
        h = (h ^ v).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        h ^= h >> 29;
    }
    h
}

struct Job {
    node: NodeId,
    tactic: String,
}

enum Exec {
    Step(StepResponse),
    Failed(String),
    Lost(String),
}

enum Stop {
    Done(Box<SearchOutcome>),
}

struct Search<'a> {
    theorem: &'a Theorem,
    backends: Backends<'a>,
    config: &'a SearchConfig,
    trace: &'a mut dyn TraceSink,
    tree: SearchTree,
    env_ids: Vec<Option<u64>>,
    expanded: Vec<bool>,
    seen: HashSet<String>,
    candidates: u64,
    iterations: u64,
    rng: ChaCha8Rng,
    start: Instant,
    unverified: Option<(ProofRecord, String)>,
}

/// Runs one search pass. Every backend failure is absorbed into the outcome;
/// only configuration errors and a rejected statement are returned as errors.
pub fn run_search(
    theorem: &Theorem,
    backends: Backends<'_>,
    config: &SearchConfig,
    trace: &mut dyn TraceSink,
) -> Result<SearchOutcome, EngineError> {
    config.validate()?;
    let start = Instant::now();
    let init = backends
        .environment
        .init(&theorem.statement)
        .map_err(EngineError::Init)?;
    let root_solved = init.goals.trim().is_empty();
    let tree = SearchTree::new(init.goals.clone(), root_solved, &config.score_table);
    let mut search = Search {
        theorem,
        backends,
        config,
        trace,
        tree,
        env_ids: vec![Some(init.state_id)],
        expanded: vec![false],
        seen: HashSet::from([init.goals]),
        candidates: 0,
        iterations: 0,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        start,
        unverified: None,
    };
    let outcome = if root_solved {
        search.finish(OutcomeKind::Unverified, None, Some("initial state has no goals".into()))
    } else {
        search.run()
    };
    search.trace.record(TraceRecord::Outcome {
        theorem_id: theorem.theorem_id.clone(),
        seed: config.seed,
        outcome: outcome.clone(),
    });
    Ok(outcome)
}

impl<'a> Search<'a> {
    fn elapsed_out(&self) -> bool {
        self.start.elapsed().as_secs_f64() >= self.config.whole_search_timeout_s
    }

    fn finish(&mut self, kind: OutcomeKind, proof: Option<ProofRecord>, detail: Option<String>) -> SearchOutcome {
        let (kind, proof, detail) = match (kind, self.unverified.take()) {
            (OutcomeKind::Solved, _) | (_, None) => (kind, proof, detail),
            (other, Some((p, msg))) => {
                let why = match detail {
                    Some(d) => format!("{msg}; search then ended with {other}: {d}"),
                    None => format!("{msg}; search then ended with {other}"),
                };
                (OutcomeKind::Unverified, Some(p), Some(why))
            }
        };
        SearchOutcome {
            kind,
            proof,
            stats: SearchStats {
                iterations: self.iterations,
                candidates_explored: self.candidates,
                wall_seconds: self.start.elapsed().as_secs_f64(),
            },
            detail,
        }
    }

    fn run(&mut self) -> SearchOutcome {
        let mut frontier: Vec<NodeId> = vec![0];
        for iteration in 1..=self.config.budget.n_max_iter {
            if self.elapsed_out() {
                return self.finish(OutcomeKind::Timeout, None, Some("whole-search timeout".into()));
            }
            self.iterations = iteration;
            match self.iterate(iteration, &frontier) {
                Ok(Some(next)) => frontier = next,
                Ok(None) => return self.finish(OutcomeKind::Exhausted, None, None),
                Err(Stop::Done(outcome)) => return *outcome,
            }
        }
        self.finish(OutcomeKind::IterationCap, None, None)
    }

    fn samples_for(&self, iteration: u64) -> usize {
        let n = self.config.budget.n_samples;
        // The root alone fills every perspective slot of the first iteration.
        let n = if iteration == 1 { n * self.config.budget.n_perspectives } else { n };
        n as usize
    }

    fn generate_jobs(&mut self, iteration: u64, frontier: &[NodeId]) -> (Vec<Job>, Vec<SkipRecord>) {
        let mut jobs = Vec::new();
        let mut skipped = Vec::new();
        let n = self.samples_for(iteration);
        for &node in frontier {
            let goal = self.tree.get(node).expect("frontier node").state.goal_text.clone();
            let seed = Some(request_seed(self.config.seed, iteration, node));
            let gen = self.backends.generator;
            let result = generate_tactics(gen, &goal, n, seed).or_else(|e| {
                debug!(node, "generator failed once: {e}");
                generate_tactics(gen, &goal, n, seed)
            });
            match result {
                Ok(tactics) => {
                    let mut local_seen = HashSet::new();
                    for t in tactics {
                        if self.config.dedup_tactics_per_node && !local_seen.insert(t.clone()) {
                            continue;
                        }
                        jobs.push(Job { node, tactic: t });
                    }
                }
                Err(e) => skipped.push(SkipRecord {
                    node,
                    reason: e.to_string(),
                }),
            }
        }
        (jobs, skipped)
    }

    fn execute(&self, jobs: &[Job]) -> Vec<Exec> {
        let env = self.backends.environment;
        let timeout = Duration::from_secs_f64(self.config.per_step_timeout_s);
        let env_ids = &self.env_ids;
        let run_one = |job: &Job| -> Exec {
            let Some(state_id) = env_ids[job.node] else {
                return Exec::Lost("node has no live environment state".into());
            };
            let attempt = || apply_step(env, state_id, &job.tactic, timeout);
            let res = match attempt() {
                Err(e) if e.is_retryable() => attempt(),
                other => other,
            };
            match res {
                Ok(r) => Exec::Step(r),
                Err(BackendError::SessionLost(m)) => Exec::Lost(m),
                Err(e) => Exec::Failed(e.to_string()),
            }
        };
        let workers = self.config.workers.min(jobs.len()).max(1);
        if workers == 1 {
            return jobs.iter().map(run_one).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Exec>>> = (0..jobs.len()).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= jobs.len() {
                        break;
                    }
                    let r = run_one(&jobs[i]);
                    *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap_or_else(|p| p.into_inner()).expect("every job ran"))
            .collect()
    }

    /// Re-derives the environment state of `node` by replaying its tactic
    /// path from the nearest ancestor that still has one.
    fn ensure_env_state(&mut self, node: NodeId) -> Result<(), String> {
        if self.env_ids[node].is_some() {
            return Ok(());
        }
        let mut path = Vec::new();
        let mut cur = node;
        while self.env_ids[cur].is_none() {
            path.push(cur);
            cur = self.tree.get(cur).and_then(|n| n.state.parent).ok_or("root has no live state")?;
        }
        let timeout = Duration::from_secs_f64(self.config.per_step_timeout_s);
        for &id in path.iter().rev() {
            let n = self.tree.get(id).expect("path node");
            let parent = n.state.parent.expect("non-root");
            let tactic = n.tactic_in.clone().expect("non-root");
            let from = self.env_ids[parent].expect("replayed in order");
            match apply_step(self.backends.environment, from, &tactic, timeout) {
                Ok(StepResponse::Ok { new_state_id, .. }) => self.env_ids[id] = Some(new_state_id),
                Ok(other) => return Err(format!("replay of {tactic:?} gave {other:?}")),
                Err(e) => return Err(format!("replay of {tactic:?} failed: {e}")),
            }
        }
        Ok(())
    }

    fn restart_session(&mut self, iteration: u64, frontier: &[NodeId], reason: &str) -> Result<(), String> {
        warn!(theorem = %self.theorem.theorem_id, "environment session lost: {reason}");
        self.trace.record(TraceRecord::Restart {
            theorem_id: self.theorem.theorem_id.clone(),
            seed: self.config.seed,
            iteration,
            reason: reason.to_string(),
        });
        let env = self.backends.environment;
        env.restart().map_err(|e| format!("restart failed: {e}"))?;
        let init = env.init(&self.theorem.statement).map_err(|e| format!("re-init failed: {e}"))?;
        self.env_ids.iter_mut().for_each(|s| *s = None);
        self.env_ids[0] = Some(init.state_id);
        for &node in frontier {
            self.ensure_env_state(node)?;
        }
        Ok(())
    }

    fn open_nodes(&self) -> Vec<NodeId> {
        (0..self.tree.len())
            .filter(|&i| !self.expanded[i] && !self.tree.get(i).expect("node").state.solved)
            .collect()
    }

    fn score_pool(&mut self, pool: &[NodeId]) {
        let critic = self.backends.critic;
        for &id in pool {
            let node = self.tree.get(id).expect("pool node");
            if node.critic_distance.is_some() {
                continue;
            }
            let goal = node.state.goal_text.clone();
            let d = critic_distance(critic, &goal)
                .or_else(|_| critic_distance(critic, &goal))
                .unwrap_or_else(|e| {
                    warn!(node = id, "critic failed twice, node ranked last: {e}");
                    UNSCORED_DISTANCE
                });
            self.tree.get_mut(id).expect("pool node").critic_distance = Some(d);
        }
    }

    fn handle_solved(&mut self, leaf: NodeId) -> Result<bool, ProofError> {
        let proof = self
            .tree
            .extract_proof(leaf, &self.theorem.theorem_id, &self.theorem.statement)?;
        let script = concat_script(&proof)?;
        let verdict = verify_whole_proof(self.backends.environment, &self.theorem.statement, &script);
        match verdict {
            Ok(v) if v.verified => Ok(true),
            other => {
                let msg = match other {
                    Ok(v) => format!("whole-script verification failed: {}", v.messages.join("; ")),
                    Err(e) => format!("verification unavailable: {e}"),
                };
                debug!(leaf, "{msg}");
                if self.unverified.is_none() {
                    self.unverified = Some((proof, msg));
                }
                Ok(false)
            }
        }
    }

    fn iterate(&mut self, iteration: u64, frontier: &[NodeId]) -> Result<Option<Vec<NodeId>>, Stop> {
        let mut frontier = frontier.to_vec();
        frontier.sort_unstable();

        for &node in &frontier {
            if let Err(e) = self.ensure_env_state(node) {
                let out = self.finish(OutcomeKind::Timeout, None, Some(format!("session lost: {e}")));
                return Err(Stop::Done(Box::new(out)));
            }
        }
        let (jobs, skipped) = self.generate_jobs(iteration, &frontier);
        self.candidates += jobs.len() as u64;

        let mut results = self.execute(&jobs);
        if let Some(reason) = results.iter().find_map(|r| match r {
            Exec::Lost(m) => Some(m.clone()),
            _ => None,
        }) {
            let retried = self
                .restart_session(iteration, &frontier, &reason)
                .map(|_| self.execute(&jobs));
            match retried {
                Ok(r) if !r.iter().any(|x| matches!(x, Exec::Lost(_))) => results = r,
                Ok(_) | Err(_) => {
                    let out = self.finish(
                        OutcomeKind::Timeout,
                        None,
                        Some(format!("environment session lost twice in iteration {iteration}: {reason}")),
                    );
                    return Err(Stop::Done(Box::new(out)));
                }
            }
        }
        for &node in &frontier {
            self.expanded[node] = true;
        }

        let mut executed = Vec::with_capacity(jobs.len());
        let mut local = Vec::new();
        let mut solved_outcome = None;
        for (job, res) in jobs.iter().zip(results) {
            if solved_outcome.is_some() {
                executed.push(ExecRecord {
                    node: job.node,
                    tactic: job.tactic.clone(),
                    status: ExecStatus::Discarded,
                    child: None,
                });
                continue;
            }
            let (status, child) = match res {
                Exec::Step(StepResponse::Ok {
                    new_state_id,
                    goal_text,
                    solved,
                }) => {
                    if !solved && self.config.dedup_states && !self.seen.insert(goal_text.clone()) {
                        (ExecStatus::Duplicate, None)
                    } else {
                        let child = self
                            .tree
                            .add_child(job.node, job.tactic.clone(), goal_text, solved, &self.config.score_table)
                            .expect("frontier nodes are open");
                        self.env_ids.push(Some(new_state_id));
                        self.expanded.push(false);
                        if solved {
                            match self.handle_solved(child) {
                                Ok(true) => {
                                    let proof = self
                                        .tree
                                        .extract_proof(child, &self.theorem.theorem_id, &self.theorem.statement)
                                        .ok();
                                    solved_outcome = Some(proof);
                                    (ExecStatus::Solved, Some(child))
                                }
                                Ok(false) => (ExecStatus::Unverified, Some(child)),
                                Err(e) => {
                                    warn!("could not extract proof: {e}");
                                    (ExecStatus::Unverified, Some(child))
                                }
                            }
                        } else {
                            local.push(child);
                            (ExecStatus::Ok, Some(child))
                        }
                    }
                }
                Exec::Step(StepResponse::Error { .. }) => (ExecStatus::Error, None),
                Exec::Step(StepResponse::Timeout {}) => (ExecStatus::Timeout, None),
                Exec::Failed(m) | Exec::Lost(m) => {
                    debug!(node = job.node, tactic = %job.tactic, "step failed: {m}");
                    (ExecStatus::Failed, None)
                }
            };
            executed.push(ExecRecord {
                node: job.node,
                tactic: job.tactic.clone(),
                status,
                child,
            });
        }

        let mut record = TraceRecord::Iteration {
            theorem_id: self.theorem.theorem_id.clone(),
            seed: self.config.seed,
            iteration,
            expanded: frontier.clone(),
            skipped,
            executed,
            pool_size: 0,
            global_fallback: false,
            selection: None,
        };

        if let Some(proof) = solved_outcome {
            self.trace.record(record);
            let out = self.finish(OutcomeKind::Solved, proof, None);
            return Err(Stop::Done(Box::new(out)));
        }

        let (pool, fallback) = match self.config.pool_mode {
            PoolMode::Local => (local, false),
            PoolMode::Global => (self.open_nodes(), false),
            PoolMode::LocalWithGlobalFallback if local.is_empty() => (self.open_nodes(), true),
            PoolMode::LocalWithGlobalFallback => (local, false),
        };
        if let TraceRecord::Iteration {
            pool_size,
            global_fallback,
            ..
        } = &mut record
        {
            *pool_size = pool.len();
            *global_fallback = fallback;
        }
        if pool.is_empty() {
            self.trace.record(record);
            return Ok(None);
        }
        if self.elapsed_out() {
            self.trace.record(record);
            let out = self.finish(OutcomeKind::Timeout, None, Some("whole-search timeout".into()));
            return Err(Stop::Done(Box::new(out)));
        }

        self.score_pool(&pool);
        let nodes: Vec<_> = pool.iter().map(|&i| self.tree.get(i).expect("pool node")).collect();
        let selection = select_with(
            &nodes,
            self.backends.critic,
            self.config.perspectives(),
            self.config.ablate,
            &mut self.rng,
        )
        .expect("pool is nonempty and fully scored");
        let next = selection.selected.clone();
        if let TraceRecord::Iteration { selection: s, .. } = &mut record {
            *s = Some(selection);
        }
        self.trace.record(record);
        Ok(Some(next))
    }
}

/// Up to `budget.n_pass` independent searches with seeds `seed + p`,
/// stopping at the first solved pass.
pub fn run_pass_at_k(
    theorem: &Theorem,
    backends: Backends<'_>,
    config: &SearchConfig,
    trace: &mut dyn TraceSink,
) -> PassReport {
    let mut report = PassReport {
        theorem_id: theorem.theorem_id.clone(),
        outcomes: Vec::new(),
        solved_any: false,
        total_candidates: 0,
        errors: Vec::new(),
    };
    for p in 0..config.budget.n_pass {
        let cfg = config.with_seed(config.seed.wrapping_add(p));
        match run_search(theorem, backends, &cfg, trace) {
            Ok(outcome) => {
                report.total_candidates += outcome.stats.candidates_explored;
                let solved = outcome.is_solved();
                report.outcomes.push(outcome);
                if solved {
                    report.solved_any = true;
                    break;
                }
            }
            Err(e) => report.errors.push(format!("pass {p}: {e}")),
        }
    }
    report
}

/// Accumulative protocol: round `r` (0-based) reruns pass@k with seeds offset
/// by `r * n_pass`, only on problems no earlier round solved.
pub fn run_accumulative(
    problems: &[(Theorem, Backends<'_>)],
    config: &SearchConfig,
    rounds: usize,
    trace: &mut dyn TraceSink,
) -> Vec<RoundReport> {
    let mut solved = vec![false; problems.len()];
    let mut out = Vec::with_capacity(rounds);
    let mut cumulative = 0;
    for round in 0..rounds {
        let seed = config
            .seed
            .wrapping_add((round as u64).wrapping_mul(config.budget.n_pass));
        let cfg = config.with_seed(seed);
        let mut attempted = Vec::new();
        let mut reports = Vec::new();
        let mut newly = 0;
        for (i, (thm, backends)) in problems.iter().enumerate() {
            if solved[i] {
                continue;
            }
            attempted.push(thm.theorem_id.clone());
            let report = run_pass_at_k(thm, *backends, &cfg, trace);
            if report.solved_any {
                solved[i] = true;
                newly += 1;
            }
            reports.push(report);
        }
        cumulative += newly;
        out.push(RoundReport {
            round: round + 1,
            attempted,
            reports,
            newly_solved: newly,
            cumulative_solved: cumulative,
        });
    }
    out
}
