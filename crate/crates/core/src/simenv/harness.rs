//! Runs search variants over suites of simulated worlds under matched
//! budgets.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::{BiasedCritic, OracleCritic, SimEnvironment, SimGenerator};
use super::traps::trap_critic;
use super::world::ProofWorld;
use crate::backends::Critic;
use crate::engine::{run_pass_at_k, Backends, NullTrace, PassReport, SearchConfig, Theorem};
use crate::perspectives::Perspective;
use crate::proof::{compute_budget, BudgetSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CriticKind {
    /// Exact distance to the goal.
    Oracle,
    /// Miscalibrated: every dead end looks finished.
    Trap,
    /// Oracle distance plus seeded uniform noise of the given amplitude.
    Noisy { noise: f64, seed: u64 },
}

impl std::str::FromStr for CriticKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(CriticKind::Oracle),
            "trap" => Ok(CriticKind::Trap),
            other => match other.strip_prefix("noisy:") {
                Some(n) => n
                    .parse()
                    .map(|noise| CriticKind::Noisy { noise, seed: 0 })
                    .map_err(|_| format!("bad noise amplitude in {other:?}")),
                None => Err(format!("unknown critic {other:?}; use oracle, trap or noisy:<amplitude>")),
            },
        }
    }
}

pub fn make_critic(kind: CriticKind, world: Arc<ProofWorld>) -> Box<dyn Critic> {
    match kind {
        CriticKind::Oracle => Box::new(OracleCritic::new(world)),
        CriticKind::Trap => Box::new(trap_critic(world)),
        CriticKind::Noisy { noise, seed } => Box::new(BiasedCritic::new(world, Vec::new(), seed).with_noise(noise)),
    }
}

/// Generator, environment and critic over one world.
pub struct SimBackends {
    pub world: Arc<ProofWorld>,
    pub generator: SimGenerator,
    pub environment: SimEnvironment,
    pub critic: Box<dyn Critic>,
}

impl SimBackends {
    pub fn new(world: Arc<ProofWorld>, critic: CriticKind) -> Self {
        SimBackends {
            generator: SimGenerator::new(world.clone()),
            environment: SimEnvironment::new(world.clone()),
            critic: make_critic(critic, world.clone()),
            world,
        }
    }

    pub fn backends(&self) -> Backends<'_> {
        Backends {
            generator: &self.generator,
            environment: &self.environment,
            critic: self.critic.as_ref(),
        }
    }

    pub fn theorem(&self) -> Theorem {
        Theorem::new(self.world.name(), self.world.statement())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: String,
    pub budget: BudgetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablate: Option<Perspective>,
    pub attempted: usize,
    pub solved: usize,
    pub candidates: u64,
    pub reports: Vec<PassReport>,
}

impl VariantResult {
    pub fn solved_ids(&self) -> Vec<&str> {
        self.reports
            .iter()
            .filter(|r| r.solved_any)
            .map(|r| r.theorem_id.as_str())
            .collect()
    }
}

/// pass@k of one configuration over every world, in world order.
pub fn run_variant(name: &str, worlds: &[Arc<ProofWorld>], critic: CriticKind, config: &SearchConfig) -> VariantResult {
    let reports: Vec<PassReport> = worlds
        .par_iter()
        .map(|w| {
            let sim = SimBackends::new(w.clone(), critic);
            run_pass_at_k(&sim.theorem(), sim.backends(), config, &mut NullTrace)
        })
        .collect();
    VariantResult {
        variant: name.into(),
        budget: config.budget,
        ablate: config.ablate,
        attempted: reports.len(),
        solved: reports.iter().filter(|r| r.solved_any).count(),
        candidates: reports.iter().map(|r| r.total_candidates).sum(),
        reports,
    }
}

/// Critic-only best-first search with the same total budget: one
/// perspective, `n_perspectives` times as many passes.
pub fn critic_only_budget(mps: &BudgetSpec) -> BudgetSpec {
    BudgetSpec {
        n_pass: mps.n_pass * mps.n_perspectives,
        n_perspectives: 1,
        ..*mps
    }
}

/// Multi-perspective search against critic-only search under budget parity.
pub fn compare_variants(worlds: &[Arc<ProofWorld>], critic: CriticKind, config: &SearchConfig) -> Vec<VariantResult> {
    let bfs = SearchConfig {
        budget: critic_only_budget(&config.budget),
        ablate: None,
        ..config.clone()
    };
    debug_assert_eq!(compute_budget(&bfs.budget).ok(), compute_budget(&config.budget).ok());
    vec![
        run_variant("multi-perspective", worlds, critic, config),
        run_variant("critic-only", worlds, critic, &bfs),
    ]
}

/// The full search, then one run per active perspective with that slot
/// filled by a random draw.
pub fn ablation_variants(worlds: &[Arc<ProofWorld>], critic: CriticKind, config: &SearchConfig) -> Vec<VariantResult> {
    let full = SearchConfig {
        ablate: None,
        ..config.clone()
    };
    let mut out = vec![run_variant("full", worlds, critic, &full)];
    for &p in config.perspectives() {
        let cfg = SearchConfig {
            ablate: Some(p),
            ..config.clone()
        };
        out.push(run_variant(&format!("random {}", p.name()), worlds, critic, &cfg));
    }
    out
}
