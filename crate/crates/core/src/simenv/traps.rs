//! Trap worlds: the miscalibrated critic prefers dead-end branches at every
//! step, and exactly one heuristic perspective recognises the true path.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generate::synth_goal;
use super::sim::BiasedCritic;
use super::world::{EdgeKind, ProofWorld, StateId, WorldEdge, WorldFile, WorldState};
use super::{BiasMatch, BiasRule};

/// Which heuristic alone can follow the true path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapKind {
    TacticScore,
    CaseCount,
    StateLength,
}

impl TrapKind {
    pub const ALL: [TrapKind; 3] = [TrapKind::TacticScore, TrapKind::CaseCount, TrapKind::StateLength];
}

const HIGH: &[&str] = &["exact", "rcases", "rintro", "refine", "induction", "by_contra"];
const MID: &[&str] = &["rw", "apply", "linarith", "simp", "ring_nf", "convert"];
const LOW: &[&str] = &["norm_num", "swap", "norm_cast", "push_cast", "clear"];

/// Total trap states per world.
pub const TRAP_STATES: usize = 140;

/// (cases, pad) of true-path and trap goals.
fn shapes(kind: TrapKind) -> ((usize, usize), (usize, usize)) {
    match kind {
        TrapKind::TacticScore => ((1, 20), (0, 0)),
        TrapKind::CaseCount => ((0, 20), (1, 0)),
        TrapKind::StateLength => ((1, 0), (0, 20)),
    }
}

fn heads(kind: TrapKind) -> (&'static [&'static str], &'static [&'static str]) {
    match kind {
        TrapKind::TacticScore => (HIGH, MID),
        TrapKind::CaseCount | TrapKind::StateLength => (LOW, HIGH),
    }
}

pub fn trap_world(kind: TrapKind, seed: u64) -> ProofWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(3..=5usize);
    let ((main_cases, main_pad), (trap_cases, trap_pad)) = shapes(kind);
    let (main_heads, trap_heads) = heads(kind);

    let mut states = BTreeMap::new();
    let mut edges = Vec::new();
    let mut counter = 0usize;
    let mut label = |rng: &mut ChaCha8Rng, pool: &[&str]| {
        counter += 1;
        format!("{} t{counter}", pool.choose(rng).expect("nonempty"))
    };

    let mut main: Vec<StateId> = Vec::new();
    for i in 0..=depth {
        let id = states.len() as StateId;
        let st = if i == depth {
            WorldState {
                goal_text: String::new(),
                solved: true,
            }
        } else if i == 0 {
            WorldState {
                goal_text: synth_goal(id, 0, 4),
                solved: false,
            }
        } else {
            WorldState {
                goal_text: synth_goal(id, main_cases, main_pad),
                solved: false,
            }
        };
        states.insert(id, st);
        if let Some(&prev) = main.last() {
            edges.push(WorldEdge {
                from: prev,
                tactic_label: label(&mut rng, main_heads),
                to: id,
                kind: EdgeKind::Normal,
                prob: 1.0,
            });
        }
        main.push(id);
    }

    let mut queue: VecDeque<StateId> = VecDeque::new();
    let mut trap_count = 0usize;
    let add_trap = |states: &mut BTreeMap<StateId, WorldState>, rng: &mut ChaCha8Rng| {
        let id = states.len() as StateId;
        let cases = trap_cases + if trap_cases > 0 { rng.gen_range(0..2) } else { 0 };
        states.insert(
            id,
            WorldState {
                goal_text: synth_goal(id, cases, trap_pad),
                solved: false,
            },
        );
        id
    };
    for &m in &main[..depth] {
        for _ in 0..rng.gen_range(2..=3) {
            let t = add_trap(&mut states, &mut rng);
            trap_count += 1;
            edges.push(WorldEdge {
                from: m,
                tactic_label: label(&mut rng, trap_heads),
                to: t,
                kind: EdgeKind::Normal,
                prob: 1.0,
            });
            queue.push_back(t);
        }
    }
    while trap_count < TRAP_STATES {
        let Some(parent) = queue.pop_front() else { break };
        for _ in 0..rng.gen_range(1..=3) {
            if trap_count >= TRAP_STATES {
                break;
            }
            let t = add_trap(&mut states, &mut rng);
            trap_count += 1;
            edges.push(WorldEdge {
                from: parent,
                tactic_label: label(&mut rng, trap_heads),
                to: t,
                kind: EdgeKind::Normal,
                prob: 1.0,
            });
            queue.push_back(t);
        }
    }

    ProofWorld::new(WorldFile {
        name: Some(format!("trap-{kind:?}-{seed}").to_lowercase()),
        root: main[0],
        states,
        edges,
    })
    .expect("trap worlds are valid by construction")
}

/// `count` trap worlds cycling through the three kinds.
pub fn trap_suite(count: usize, seed: u64) -> Vec<ProofWorld> {
    (0..count)
        .map(|i| trap_world(TrapKind::ALL[i % 3], seed.wrapping_mul(1000).wrapping_add(i as u64)))
        .collect()
}

/// Critic that rates every dead end as already finished.
pub fn trap_critic(world: Arc<ProofWorld>) -> BiasedCritic {
    BiasedCritic::new(
        world,
        vec![BiasRule {
            matcher: BiasMatch::Unreachable,
            offset: -1.0,
        }],
        0,
    )
    .with_unreachable_base(1.0)
}
