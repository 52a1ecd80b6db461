use std::sync::Arc;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::world::{EdgeKind, ProofWorld, StateId};
use crate::backends::{
    BackendError, Critic, InitResponse, ProofEnvironment, StepResponse, TacticGenerator,
    VerifyResponse,
};

pub const UNREACHABLE_DISTANCE: f64 = 1e9;

/// splitmix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn resolve(world: &ProofWorld, goal_text: &str) -> Result<Option<StateId>, BackendError> {
    if goal_text.trim().is_empty() {
        return Ok(None);
    }
    world
        .lookup_goal(goal_text)
        .map(Some)
        .ok_or_else(|| BackendError::UnknownState(goal_text.chars().take(60).collect()))
}

/// Exact graph distance to the nearest solved state.
#[derive(Debug, Clone)]
pub struct OracleCritic {
    world: Arc<ProofWorld>,
}

impl OracleCritic {
    pub fn new(world: Arc<ProofWorld>) -> Self {
        OracleCritic { world }
    }
}

impl Critic for OracleCritic {
    fn distance(&self, goal_text: &str) -> Result<f64, BackendError> {
        Ok(match resolve(&self.world, goal_text)? {
            None => 0.0,
            Some(id) => self
                .world
                .distance_to_solved(id)
                .map(|d| d as f64)
                .unwrap_or(UNREACHABLE_DISTANCE),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BiasMatch {
    /// Some incoming edge's label contains the text.
    LabelContains(String),
    /// Some incoming edge has this kind.
    EdgeKind(EdgeKind),
    /// No solved state is reachable from the state.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRule {
    pub matcher: BiasMatch,
    pub offset: f64,
}

/// Oracle distance distorted by additive rules and seeded noise, floored at 0.
/// With `unreachable_base` set, dead-end states start from that value instead
/// of the sentinel, modelling a critic that cannot see they are unprovable.
#[derive(Debug, Clone)]
pub struct BiasedCritic {
    world: Arc<ProofWorld>,
    pub rules: Vec<BiasRule>,
    pub noise: f64,
    pub seed: u64,
    pub unreachable_base: Option<f64>,
}

impl BiasedCritic {
    pub fn new(world: Arc<ProofWorld>, rules: Vec<BiasRule>, seed: u64) -> Self {
        BiasedCritic {
            world,
            rules,
            noise: 0.0,
            seed,
            unreachable_base: None,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_unreachable_base(mut self, base: f64) -> Self {
        self.unreachable_base = Some(base);
        self
    }

    fn rule_applies(&self, rule: &BiasRule, id: StateId) -> bool {
        match &rule.matcher {
            BiasMatch::LabelContains(s) => self.world.incoming(id).any(|e| e.tactic_label.contains(s.as_str())),
            BiasMatch::EdgeKind(k) => self.world.incoming(id).any(|e| e.kind == *k),
            BiasMatch::Unreachable => self.world.distance_to_solved(id).is_none(),
        }
    }
}

impl Critic for BiasedCritic {
    fn distance(&self, goal_text: &str) -> Result<f64, BackendError> {
        let Some(id) = resolve(&self.world, goal_text)? else {
            return Ok(0.0);
        };
        let mut d = match self.world.distance_to_solved(id) {
            Some(d) => d as f64,
            None => self.unreachable_base.unwrap_or(UNREACHABLE_DISTANCE),
        };
        for r in &self.rules {
            if self.rule_applies(r, id) {
                d += r.offset;
            }
        }
        if self.noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(self.seed ^ mix64(id)));
            d += rng.gen_range(-self.noise..=self.noise);
        }
        Ok(d.max(0.0))
    }
}

/// Stepwise environment over a world. Environment state ids are world state
/// ids, so every id ever returned stays valid.
#[derive(Debug, Clone)]
pub struct SimEnvironment {
    world: Arc<ProofWorld>,
}

impl SimEnvironment {
    pub fn new(world: Arc<ProofWorld>) -> Self {
        SimEnvironment { world }
    }

    pub fn world(&self) -> &ProofWorld {
        &self.world
    }
}

impl ProofEnvironment for SimEnvironment {
    fn init(&self, statement: &str) -> Result<InitResponse, BackendError> {
        if statement.trim() != self.world.statement().trim() {
            return Err(BackendError::UnknownState(format!(
                "statement does not match world {}",
                self.world.name()
            )));
        }
        Ok(InitResponse {
            state_id: self.world.root(),
            goals: self.world.statement().to_string(),
        })
    }

    fn apply_step(&self, state_id: StateId, tactic: &str, _timeout: Duration) -> Result<StepResponse, BackendError> {
        if self.world.state(state_id).is_none() {
            return Err(BackendError::UnknownState(format!("state id {state_id}")));
        }
        Ok(match self.world.edge(state_id, tactic.trim()) {
            Some(e) => {
                let target = self.world.state(e.to).expect("validated edge");
                StepResponse::Ok {
                    new_state_id: e.to,
                    goal_text: target.goal_text.clone(),
                    solved: target.solved,
                }
            }
            None => StepResponse::Error {
                message: format!("tactic {tactic:?} failed"),
            },
        })
    }

    fn verify(&self, statement: &str, script: &str) -> Result<VerifyResponse, BackendError> {
        let fail = |m: String| {
            Ok(VerifyResponse {
                verified: false,
                messages: vec![m],
            })
        };
        if statement.trim() != self.world.statement().trim() {
            return fail("statement does not match the world".into());
        }
        let mut cur = self.world.root();
        for (lineno, line) in script.lines().enumerate() {
            let tactic = line.trim();
            if tactic.is_empty() {
                continue;
            }
            if self.world.state(cur).is_some_and(|s| s.solved) {
                return fail(format!("line {}: no goals left", lineno + 1));
            }
            let Some(e) = self.world.edge(cur, tactic) else {
                return fail(format!("line {}: {tactic:?} does not apply", lineno + 1));
            };
            if e.kind == EdgeKind::Inconsistent {
                return fail(format!("line {}: {tactic:?} rejected by the checker", lineno + 1));
            }
            cur = e.to;
        }
        if self.world.state(cur).is_some_and(|s| s.solved) {
            Ok(VerifyResponse {
                verified: true,
                messages: Vec::new(),
            })
        } else {
            fail("unsolved goals remain".into())
        }
    }
}

/// Proposes a state's outgoing edge labels in seeded order. Each edge is
/// proposed with its own probability.
#[derive(Debug, Clone)]
pub struct SimGenerator {
    world: Arc<ProofWorld>,
}

impl SimGenerator {
    pub fn new(world: Arc<ProofWorld>) -> Self {
        SimGenerator { world }
    }
}

impl TacticGenerator for SimGenerator {
    fn generate(&self, state_text: &str, n: usize, seed: Option<u64>) -> Result<Vec<String>, BackendError> {
        let Some(id) = resolve(&self.world, state_text)? else {
            return Ok(Vec::new());
        };
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed.unwrap_or(0) ^ mix64(id.wrapping_add(1))));
        let mut labels: Vec<String> = self
            .world
            .outgoing(id)
            .filter(|e| e.prob >= 1.0 || rng.gen_bool(e.prob))
            .map(|e| e.tactic_label.clone())
            .collect();
        labels.shuffle(&mut rng);
        labels.truncate(n);
        Ok(labels)
    }
}
