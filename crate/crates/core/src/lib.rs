//! Multi-perspective stepwise proof search over pluggable tactic-generator,
//! critic and proof-environment backends, with proof-corpus curation and
//! proof-length analytics.

pub mod analytics;
pub mod backends;
pub mod cli;
pub mod config;
pub mod curation;
pub mod engine;
pub mod perspectives;
pub mod proof;
pub mod simenv;

pub use engine::{run_accumulative, run_pass_at_k, run_search, Backends, SearchConfig, Theorem};
pub use perspectives::{select_frontier, tactic_effectiveness_score, Perspective};
pub use proof::{compute_budget, BudgetSpec, OutcomeKind, ProofRecord, ProofStep, SearchOutcome};
