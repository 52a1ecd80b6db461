//! A procedural world with no goal and no failing tactics, where every
//! expansion yields fresh states and the four perspectives always disagree.

use std::time::Duration;

use super::sim::mix64;
use crate::backends::{
    BackendError, Critic, InitResponse, ProofEnvironment, StepResponse, TacticGenerator,
    VerifyResponse,
};

pub const INFINITE_ROOT: u64 = 1;

/// Tactic `j` of any state yields a child whose features make it the unique
/// winner of one perspective: 0 critic, 1 tactic score, 2 case count, 3 state
/// length. Higher indices lose on every perspective.
#[derive(Debug, Clone, Copy, Default)]
pub struct InfiniteWorld;

impl InfiniteWorld {
    pub fn statement() -> String {
        format!("⊢ g{INFINITE_ROOT:016x} root")
    }

    fn label(j: usize) -> String {
        let head = match j {
            0 => "simp",
            1 => "exact",
            2 => "ring_nf",
            3 => "rw",
            _ => "norm_num",
        };
        format!("{head} step_{j}")
    }

    fn parse_index(tactic: &str) -> Option<usize> {
        tactic.rsplit_once("step_")?.1.parse().ok()
    }

    pub fn child(parent: u64, j: usize) -> (u64, String) {
        let id = mix64(parent.wrapping_mul(1_000_003).wrapping_add(j as u64 + 1)) | 2;
        let base = format!("g{id:016x}");
        let text = match j {
            0 => format!("case a\n⊢ near {base} ∧ True ∧ True"),
            1 => format!("case a\n⊢ {base} ∧ Q ∧ R ∧ S"),
            2 => format!("⊢ {base} ∧ {}", "x".repeat(40)),
            3 => format!("case a ⊢ {base}"),
            _ => format!("case a\ncase b\n⊢ {base} ∧ {}", "y".repeat(48)),
        };
        (id, text)
    }
}

impl TacticGenerator for InfiniteWorld {
    fn generate(&self, _state: &str, n: usize, _seed: Option<u64>) -> Result<Vec<String>, BackendError> {
        Ok((0..n).map(Self::label).collect())
    }
}

impl ProofEnvironment for InfiniteWorld {
    fn init(&self, _statement: &str) -> Result<InitResponse, BackendError> {
        Ok(InitResponse {
            state_id: INFINITE_ROOT,
            goals: Self::statement(),
        })
    }

    fn apply_step(&self, state_id: u64, tactic: &str, _timeout: Duration) -> Result<StepResponse, BackendError> {
        match Self::parse_index(tactic) {
            Some(j) => {
                let (id, goal_text) = Self::child(state_id, j);
                Ok(StepResponse::Ok {
                    new_state_id: id,
                    goal_text,
                    solved: false,
                })
            }
            None => Ok(StepResponse::Error {
                message: format!("unknown tactic {tactic:?}"),
            }),
        }
    }

    fn verify(&self, _statement: &str, _script: &str) -> Result<VerifyResponse, BackendError> {
        Ok(VerifyResponse {
            verified: false,
            messages: vec!["this world has no goal".into()],
        })
    }
}

impl Critic for InfiniteWorld {
    fn distance(&self, goal_text: &str) -> Result<f64, BackendError> {
        Ok(if goal_text.contains("near") { 1.0 } else { 5.0 })
    }
}
