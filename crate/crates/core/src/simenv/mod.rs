//! Deterministic synthetic proof universes that implement the generator,
//! environment and critic contracts, plus the brute-force oracle used to
//! check search results.
//!
//! A world file is JSON:
//!
//! ```json
//! {
//!   "name": "tiny",
//!   "root": 0,
//!   "states": {
//!     "0": { "goal_text": "⊢ P ∧ Q" },
//!     "1": { "goal_text": "case left\n⊢ P" },
//!     "2": { "goal_text": "", "solved": true }
//!   },
//!   "edges": [
//!     { "from": 0, "tactic_label": "constructor", "to": 1 },
//!     { "from": 1, "tactic_label": "simp_all", "to": 1, "kind": "noop" },
//!     { "from": 1, "tactic_label": "exact hp", "to": 2, "prob": 0.5 }
//!   ]
//! }
//! ```
//!
//! `kind` is `normal` (default), `noop` (a self-loop) or `inconsistent`
//! (accepted stepwise, rejected by whole-script verification). `prob` is the
//! chance the simulated generator proposes the edge on a call (default 1).

mod generate;
mod harness;
mod infinite;
mod serve;
mod sim;
mod traps;
mod world;

pub use generate::{generate_world, WorldGenSpec};
pub use harness::{
    ablation_variants, compare_variants, critic_only_budget, make_critic, run_variant, CriticKind,
    SimBackends, VariantResult,
};
pub use infinite::{InfiniteWorld, INFINITE_ROOT};
pub use serve::{handle, serve_jsonl};
pub use sim::{
    BiasMatch, BiasRule, BiasedCritic, OracleCritic, SimEnvironment, SimGenerator,
    UNREACHABLE_DISTANCE,
};
pub use traps::{trap_critic, trap_suite, trap_world, TrapKind, TRAP_STATES};
pub use world::{
    brute_force_shortest_proof, load_world, EdgeKind, ProofWorld, StateId, WorldEdge, WorldError,
    WorldFile, WorldState,
};

use std::sync::Arc;

pub fn oracle_critic(world: Arc<ProofWorld>) -> OracleCritic {
    OracleCritic::new(world)
}

pub fn biased_critic(world: Arc<ProofWorld>, rules: Vec<BiasRule>, seed: u64) -> BiasedCritic {
    BiasedCritic::new(world, rules, seed)
}
