use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proof::{ProofRecord, ProofStep};

pub type StateId = u64;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing world: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("state {state}: {reason}")]
    BadState { state: StateId, reason: String },
    #[error("edge {index} ({from} -> {to} {label:?}): {reason}")]
    BadEdge {
        index: usize,
        from: StateId,
        to: StateId,
        label: String,
        reason: String,
    },
    #[error("root {0} is not a declared state")]
    MissingRoot(StateId),
    #[error("invalid generator spec: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub goal_text: String,
    #[serde(default)]
    pub solved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    #[default]
    Normal,
    /// Self-loop that leaves the goal untouched.
    Noop,
    /// Accepted stepwise but rejected by whole-script verification.
    Inconsistent,
}

fn is_one(p: &f64) -> bool {
    *p == 1.0
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldEdge {
    pub from: StateId,
    pub tactic_label: String,
    pub to: StateId,
    #[serde(default)]
    pub kind: EdgeKind,
    /// Chance that the simulated generator proposes this edge on one call.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub prob: f64,
}

/// On-disk world format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub root: StateId,
    pub states: BTreeMap<StateId, WorldState>,
    pub edges: Vec<WorldEdge>,
}

/// A validated synthetic proof universe.
#[derive(Debug, Clone)]
pub struct ProofWorld {
    file: WorldFile,
    outgoing: HashMap<StateId, Vec<usize>>,
    incoming: HashMap<StateId, Vec<usize>>,
    by_goal: HashMap<String, StateId>,
    distance: HashMap<StateId, u64>,
}

impl PartialEq for ProofWorld {
    fn eq(&self, other: &Self) -> bool {
        self.file == other.file
    }
}

impl ProofWorld {
    pub fn new(file: WorldFile) -> Result<Self, WorldError> {
        if !file.states.contains_key(&file.root) {
            return Err(WorldError::MissingRoot(file.root));
        }
        let mut by_goal = HashMap::new();
        for (&id, st) in &file.states {
            if st.solved && !st.goal_text.trim().is_empty() {
                return Err(WorldError::BadState {
                    state: id,
                    reason: "solved state must have an empty goal".into(),
                });
            }
            if !st.solved {
                if st.goal_text.trim().is_empty() {
                    return Err(WorldError::BadState {
                        state: id,
                        reason: "unsolved state has an empty goal".into(),
                    });
                }
                if let Some(prev) = by_goal.insert(st.goal_text.clone(), id) {
                    return Err(WorldError::BadState {
                        state: id,
                        reason: format!("goal text duplicates state {prev}"),
                    });
                }
            }
        }

        let mut outgoing: HashMap<StateId, Vec<usize>> = HashMap::new();
        let mut incoming: HashMap<StateId, Vec<usize>> = HashMap::new();
        let mut labels: HashSet<(StateId, &str)> = HashSet::new();
        for (index, e) in file.edges.iter().enumerate() {
            let bad = |reason: &str| WorldError::BadEdge {
                index,
                from: e.from,
                to: e.to,
                label: e.tactic_label.clone(),
                reason: reason.to_string(),
            };
            let from = file.states.get(&e.from).ok_or_else(|| bad("unknown source state"))?;
            if !file.states.contains_key(&e.to) {
                return Err(bad("unknown target state"));
            }
            if from.solved {
                return Err(bad("solved states have no outgoing edges"));
            }
            if e.kind == EdgeKind::Noop && e.to != e.from {
                return Err(bad("noop edge must loop back to its source"));
            }
            if e.tactic_label.trim() != e.tactic_label
                || e.tactic_label.is_empty()
                || e.tactic_label.contains('\n')
            {
                return Err(bad("tactic label must be trimmed, nonempty and single-line"));
            }
            if !(0.0..=1.0).contains(&e.prob) {
                return Err(bad("prob must lie in [0, 1]"));
            }
            if !labels.insert((e.from, e.tactic_label.as_str())) {
                return Err(bad("tactic label repeats on the same source state"));
            }
            outgoing.entry(e.from).or_default().push(index);
            incoming.entry(e.to).or_default().push(index);
        }
        for list in outgoing.values_mut() {
            list.sort_by(|&a, &b| file.edges[a].tactic_label.cmp(&file.edges[b].tactic_label));
        }

        let mut distance = HashMap::new();
        let mut queue = VecDeque::new();
        for (&id, st) in &file.states {
            if st.solved {
                distance.insert(id, 0u64);
                queue.push_back(id);
            }
        }
        while let Some(id) = queue.pop_front() {
            let d = distance[&id];
            for &ei in incoming.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
                let src = file.edges[ei].from;
                if let std::collections::hash_map::Entry::Vacant(e) = distance.entry(src) {
                    e.insert(d + 1);
                    queue.push_back(src);
                }
            }
        }

        Ok(ProofWorld {
            file,
            outgoing,
            incoming,
            by_goal,
            distance,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("world serializes")
    }

    pub fn file(&self) -> &WorldFile {
        &self.file
    }

    pub fn name(&self) -> &str {
        self.file.name.as_deref().unwrap_or("world")
    }

    pub fn root(&self) -> StateId {
        self.file.root
    }

    pub fn statement(&self) -> &str {
        &self.file.states[&self.file.root].goal_text
    }

    pub fn state(&self, id: StateId) -> Option<&WorldState> {
        self.file.states.get(&id)
    }

    pub fn states(&self) -> impl Iterator<Item = (StateId, &WorldState)> {
        self.file.states.iter().map(|(&k, v)| (k, v))
    }

    pub fn num_states(&self) -> usize {
        self.file.states.len()
    }

    pub fn edges(&self) -> &[WorldEdge] {
        &self.file.edges
    }

    /// Outgoing edges sorted by tactic label.
    pub fn outgoing(&self, id: StateId) -> impl Iterator<Item = &WorldEdge> {
        self.outgoing
            .get(&id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .map(|&i| &self.file.edges[i])
    }

    pub fn incoming(&self, id: StateId) -> impl Iterator<Item = &WorldEdge> {
        self.incoming
            .get(&id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .map(|&i| &self.file.edges[i])
    }

    pub fn edge(&self, from: StateId, label: &str) -> Option<&WorldEdge> {
        self.outgoing(from).find(|e| e.tactic_label == label)
    }

    /// State holding this goal text; the empty goal maps to no state.
    pub fn lookup_goal(&self, goal_text: &str) -> Option<StateId> {
        self.by_goal.get(goal_text).copied()
    }

    /// Edge count to the nearest solved state, if any is reachable.
    pub fn distance_to_solved(&self, id: StateId) -> Option<u64> {
        self.distance.get(&id).copied()
    }

    pub fn save(&self, path: &Path) -> Result<(), WorldError> {
        fs::write(path, self.to_json()).map_err(|source| WorldError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

pub fn load_world(path: &Path) -> Result<ProofWorld, WorldError> {
    let text = fs::read_to_string(path).map_err(|source| WorldError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ProofWorld::from_json(&text)
}

/// A minimum-length root-to-solved path, ties broken by the lexicographically
/// smallest label sequence.
pub fn brute_force_shortest_proof(world: &ProofWorld) -> Option<ProofRecord> {
    let mut cur = world.root();
    let mut d = world.distance_to_solved(cur)?;
    let mut steps = Vec::new();
    while d > 0 {
        let edge = world
            .outgoing(cur)
            .find(|e| world.distance_to_solved(e.to) == Some(d - 1))
            .expect("a state at distance d has a successor at d-1");
        steps.push(ProofStep {
            state_before: world.state(cur).expect("known state").goal_text.clone(),
            tactic: edge.tactic_label.clone(),
            state_after: world.state(edge.to).expect("known state").goal_text.clone(),
        });
        cur = edge.to;
        d -= 1;
    }
    Some(ProofRecord {
        theorem_id: world.name().to_string(),
        statement: world.statement().to_string(),
        steps,
    })
}
