use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::world::{EdgeKind, ProofWorld, StateId, WorldEdge, WorldError, WorldFile, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldGenSpec {
    pub n_states: usize,
    pub branching: usize,
    pub solve_depth: usize,
    pub trap_fraction: f64,
    pub noop_fraction: f64,
    pub seed: u64,
}

impl Default for WorldGenSpec {
    fn default() -> Self {
        WorldGenSpec {
            n_states: 50,
            branching: 3,
            solve_depth: 4,
            trap_fraction: 0.3,
            noop_fraction: 0.1,
            seed: 0,
        }
    }
}

impl WorldGenSpec {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::BadSpec(m));
        if self.solve_depth < 1 {
            return bad("solve_depth must be at least 1".into());
        }
        if self.branching < 1 {
            return bad("branching must be at least 1".into());
        }
        for (name, f) in [("trap_fraction", self.trap_fraction), ("noop_fraction", self.noop_fraction)] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} must lie in [0, 1], got {f}"));
            }
        }
        if self.n_states < 1 {
            return bad("n_states must be at least 1".into());
        }
        if self.trap_fraction < 1.0 && self.n_states < self.solve_depth + 1 {
            return bad(format!(
                "n_states {} cannot hold a path of depth {}",
                self.n_states, self.solve_depth
            ));
        }
        Ok(())
    }
}

const HEADS: &[&str] = &[
    "intro", "rcases", "rw", "apply", "simp", "norm_num", "linarith", "exact", "induction",
    "field_simp", "nlinarith", "ring_nf", "constructor", "aesop", "refine", "norm_cast",
];
const NOOP_HEADS: &[&str] = &["simp_all", "aesop", "all_goals", "norm_num"];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Main,
    Productive,
    Trap,
}

/// Goal text with `cases` leading `case` lines and `pad` conjuncts, unique
/// through the embedded id.
pub(crate) fn synth_goal(id: StateId, cases: usize, pad: usize) -> String {
    let mut s = String::new();
    for c in 0..cases {
        s.push_str(&format!("case h{c}\n"));
    }
    s.push_str(&format!("x{id} : ℕ\n⊢ P{id} x{id}"));
    for _ in 0..pad {
        s.push_str(" ∧ Q");
    }
    s
}

/// Builds a seeded world: a main path of `solve_depth` edges to the single
/// solved state, then extra states hung off existing ones. Extra states are
/// traps (their whole subtree has no route to the goal) or productive (they
/// rejoin the main path without creating a shortcut).
pub fn generate_world(spec: &WorldGenSpec) -> Result<ProofWorld, WorldError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut states: BTreeMap<StateId, WorldState> = BTreeMap::new();
    let mut edges: Vec<WorldEdge> = Vec::new();
    let mut class: Vec<Class> = Vec::new();
    let mut depth: Vec<usize> = Vec::new();
    let mut outdeg: Vec<usize> = Vec::new();
    let mut label_counter = 0usize;

    let mut new_label = |rng: &mut ChaCha8Rng| {
        label_counter += 1;
        let head = HEADS.choose(rng).expect("nonempty");
        format!("{head} h{label_counter}")
    };
    let add_state = |states: &mut BTreeMap<StateId, WorldState>, rng: &mut ChaCha8Rng, solved: bool| {
        let id = states.len() as StateId;
        let goal_text = if solved {
            String::new()
        } else {
            synth_goal(id, rng.gen_range(0..4), rng.gen_range(0..12))
        };
        states.insert(id, WorldState { goal_text, solved });
        id
    };

    let d = spec.solve_depth;
    let has_goal = spec.trap_fraction < 1.0;
    let mut main = Vec::new();
    if has_goal {
        for i in 0..=d {
            let id = add_state(&mut states, &mut rng, i == d);
            main.push(id);
            class.push(Class::Main);
            depth.push(i);
            outdeg.push(0);
            if i > 0 {
                edges.push(WorldEdge {
                    from: main[i - 1],
                    tactic_label: new_label(&mut rng),
                    to: id,
                    kind: EdgeKind::Normal,
                    prob: 1.0,
                });
                outdeg[i - 1] += 1;
            }
        }
    } else {
        add_state(&mut states, &mut rng, false);
        class.push(Class::Trap);
        depth.push(0);
        outdeg.push(0);
    }

    while states.len() < spec.n_states {
        let open: Vec<usize> = (0..states.len())
            .filter(|&i| !states[&(i as StateId)].solved && outdeg[i] < spec.branching)
            .collect();
        let parent = match open.choose(&mut rng) {
            Some(&p) => p,
            None => {
                let any: Vec<usize> = (0..states.len()).filter(|&i| !states[&(i as StateId)].solved).collect();
                *any.choose(&mut rng).expect("at least the root is unsolved")
            }
        };
        let trap = class[parent] == Class::Trap || rng.gen_bool(spec.trap_fraction);
        let id = add_state(&mut states, &mut rng, false);
        let e = depth[parent] + 1;
        class.push(if trap { Class::Trap } else { Class::Productive });
        depth.push(e);
        outdeg.push(0);
        edges.push(WorldEdge {
            from: parent as StateId,
            tactic_label: new_label(&mut rng),
            to: id,
            kind: EdgeKind::Normal,
            prob: 1.0,
        });
        outdeg[parent] += 1;
        if !trap {
            // Rejoining main[k] with k <= e + 1 keeps every path at least d long.
            let k = rng.gen_range(1..=(e + 1).min(d));
            edges.push(WorldEdge {
                from: id,
                tactic_label: new_label(&mut rng),
                to: main[k],
                kind: EdgeKind::Normal,
                prob: 1.0,
            });
            outdeg[id as usize] += 1;
        }
    }

    let unsolved: Vec<StateId> = states.iter().filter(|(_, s)| !s.solved).map(|(&k, _)| k).collect();
    for id in unsolved {
        if rng.gen_bool(spec.noop_fraction) {
            let head = NOOP_HEADS.choose(&mut rng).expect("nonempty");
            edges.push(WorldEdge {
                from: id,
                tactic_label: format!("{head} n{id}"),
                to: id,
                kind: EdgeKind::Noop,
                prob: 1.0,
            });
        }
    }

    ProofWorld::new(WorldFile {
        name: Some(format!("gen-{}", spec.seed)),
        root: 0,
        states,
        edges,
    })
}
