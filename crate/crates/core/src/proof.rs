//! Proof-search domain types: states, nodes, budgets, proof records, search
//! trees and whole-script assembly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perspectives::{count_case_occurrences, state_length, ScoreTable};

/// Dense node identifier, assigned in creation order within one tree.
pub type NodeId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProofError {
    #[error("budget overflow: {0}")]
    BudgetOverflow(String),
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("node {0} is not solved")]
    NotSolved(NodeId),
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("corrupt tree: {0}")]
    CorruptTree(String),
    #[error("proof has no steps")]
    EmptyProof,
}

/// A prover state as seen by the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofState {
    pub id: NodeId,
    pub goal_text: String,
    pub parent: Option<NodeId>,
    pub depth: usize,
    pub solved: bool,
}

/// A tree node together with the features every perspective ranks on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNode {
    pub state: ProofState,
    pub tactic_in: Option<String>,
    pub critic_distance: Option<f64>,
    pub tactic_score: u8,
    pub case_count: usize,
    pub state_len: usize,
}

impl SearchNode {
    /// Builds a node and computes its heuristic features. The critic distance
    /// is left unscored.
    pub fn new(state: ProofState, tactic_in: Option<String>, table: &ScoreTable) -> Self {
        let tactic_score = match &tactic_in {
            Some(t) if !t.trim().is_empty() => table.score(t),
            _ => table.default_score(),
        };
        let case_count = count_case_occurrences(&state.goal_text);
        let state_len = state_length(&state.goal_text);
        SearchNode {
            state,
            tactic_in,
            critic_distance: None,
            tactic_score,
            case_count,
            state_len,
        }
    }

    pub fn id(&self) -> NodeId {
        self.state.id
    }
}

/// The four factors of the explored-candidate budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub n_pass: u64,
    pub n_perspectives: u64,
    pub n_max_iter: u64,
    pub n_samples: u64,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        BudgetSpec {
            n_pass: 1,
            n_perspectives: 4,
            n_max_iter: 800,
            n_samples: 8,
        }
    }
}

impl BudgetSpec {
    pub fn new(n_pass: u64, n_perspectives: u64, n_max_iter: u64, n_samples: u64) -> Self {
        BudgetSpec {
            n_pass,
            n_perspectives,
            n_max_iter,
            n_samples,
        }
    }

    fn factors(&self) -> [u64; 4] {
        [self.n_pass, self.n_perspectives, self.n_max_iter, self.n_samples]
    }

    pub fn validate(&self) -> Result<(), ProofError> {
        if self.factors().contains(&0) {
            return Err(ProofError::InvalidBudget(format!(
                "all budget factors must be positive, got {self}"
            )));
        }
        Ok(())
    }

    /// Candidates a single pass may explore.
    pub fn per_pass(&self) -> Result<u64, ProofError> {
        compute_budget(&BudgetSpec { n_pass: 1, ..*self })
    }
}

/// Total number of tactic candidates explored: the product of all four
/// factors, with overflow reported instead of wrapped.
pub fn compute_budget(spec: &BudgetSpec) -> Result<u64, ProofError> {
    spec.validate()?;
    spec.factors()
        .iter()
        .try_fold(1u64, |acc, &f| acc.checked_mul(f))
        .ok_or_else(|| ProofError::BudgetOverflow(spec.to_string()))
}

impl fmt::Display for BudgetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.n_pass, self.n_perspectives, self.n_max_iter, self.n_samples
        )
    }
}

impl FromStr for BudgetSpec {
    type Err = ProofError;

    /// Accepts `64x4x800x8`, `64×4×800×8` and `64 × 4 × 800 × 8`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s
            .split(['x', 'X', '×', '*'])
            .map(str::trim)
            .collect();
        if parts.len() != 4 {
            return Err(ProofError::InvalidBudget(format!(
                "expected four factors like 64x4x800x8, got {s:?}"
            )));
        }
        let mut v = [0u64; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| ProofError::InvalidBudget(format!("bad factor {p:?} in {s:?}")))?;
        }
        let spec = BudgetSpec::new(v[0], v[1], v[2], v[3]);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStep {
    pub state_before: String,
    pub tactic: String,
    pub state_after: String,
}

/// One theorem's proof as an ordered list of steps. Serialized as one JSONL
/// line with exactly the fields `theorem_id`, `statement`, `steps`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofRecord {
    pub theorem_id: String,
    pub statement: String,
    pub steps: Vec<ProofStep>,
}

impl ProofRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn tactics(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.tactic.as_str())
    }
}

/// Joins the proof's tactics with single newlines.
pub fn concat_script(proof: &ProofRecord) -> Result<String, ProofError> {
    if proof.steps.is_empty() {
        return Err(ProofError::EmptyProof);
    }
    Ok(proof.tactics().collect::<Vec<_>>().join("\n"))
}

/// Trims a tactic and rejects empty text or text with a raw line break.
pub fn normalize_tactic(raw: &str) -> Option<String> {
    let t = raw.trim();
    if t.is_empty() || t.contains('\n') || t.contains('\r') {
        None
    } else {
        Some(t.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Solved,
    Unverified,
    Exhausted,
    IterationCap,
    Timeout,
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OutcomeKind::Solved => "solved",
            OutcomeKind::Unverified => "unverified",
            OutcomeKind::Exhausted => "exhausted",
            OutcomeKind::IterationCap => "iteration_cap",
            OutcomeKind::Timeout => "timeout",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub iterations: u64,
    pub candidates_explored: u64,
    /// Wall time is kept out of serialized reports so they stay reproducible.
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub kind: OutcomeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proof: Option<ProofRecord>,
    pub stats: SearchStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl SearchOutcome {
    pub fn is_solved(&self) -> bool {
        self.kind == OutcomeKind::Solved
    }
}

/// Search tree owned by one engine run. Node ids are indices into `nodes`.
#[derive(Debug, Clone, Default)]
pub struct SearchTree {
    nodes: Vec<SearchNode>,
}

impl SearchTree {
    pub fn new(root_goal: impl Into<String>, solved: bool, table: &ScoreTable) -> Self {
        let state = ProofState {
            id: 0,
            goal_text: root_goal.into(),
            parent: None,
            depth: 0,
            solved,
        };
        SearchTree {
            nodes: vec![SearchNode::new(state, None, table)],
        }
    }

    /// Wraps pre-built nodes without checking links; `extract_proof` reports
    /// any inconsistency it walks into.
    pub fn from_nodes(nodes: Vec<SearchNode>) -> Self {
        SearchTree { nodes }
    }

    pub fn add_child(
        &mut self,
        parent: NodeId,
        tactic: impl Into<String>,
        goal_text: impl Into<String>,
        solved: bool,
        table: &ScoreTable,
    ) -> Result<NodeId, ProofError> {
        let parent_node = self.nodes.get(parent).ok_or(ProofError::UnknownNode(parent))?;
        if parent_node.state.solved {
            return Err(ProofError::CorruptTree(format!(
                "solved node {parent} cannot be expanded"
            )));
        }
        let id = self.nodes.len();
        let state = ProofState {
            id,
            goal_text: goal_text.into(),
            parent: Some(parent),
            depth: parent_node.state.depth + 1,
            solved,
        };
        self.nodes.push(SearchNode::new(state, Some(tactic.into()), table));
        Ok(id)
    }

    pub fn get(&self, id: NodeId) -> Option<&SearchNode> {
        self.nodes.get(id)
    }

    pub fn get_mut(&mut self, id: NodeId) -> Option<&mut SearchNode> {
        self.nodes.get_mut(id)
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Materializes the root-to-leaf path ending at a solved leaf.
    pub fn extract_proof(
        &self,
        leaf: NodeId,
        theorem_id: &str,
        statement: &str,
    ) -> Result<ProofRecord, ProofError> {
        let node = self.get(leaf).ok_or(ProofError::UnknownNode(leaf))?;
        if !node.state.solved {
            return Err(ProofError::NotSolved(leaf));
        }
        let mut steps = Vec::with_capacity(node.state.depth);
        let mut cur = node;
        while let Some(pid) = cur.state.parent {
            if steps.len() > self.nodes.len() {
                return Err(ProofError::CorruptTree(format!("parent cycle through {pid}")));
            }
            let parent = self.get(pid).ok_or_else(|| {
                ProofError::CorruptTree(format!("node {} points at missing parent {pid}", cur.id()))
            })?;
            if parent.state.depth + 1 != cur.state.depth {
                return Err(ProofError::CorruptTree(format!(
                    "depth mismatch between {} and parent {pid}",
                    cur.id()
                )));
            }
            let tactic = cur.tactic_in.clone().ok_or_else(|| {
                ProofError::CorruptTree(format!("node {} has a parent but no tactic", cur.id()))
            })?;
            steps.push(ProofStep {
                state_before: parent.state.goal_text.clone(),
                tactic,
                state_after: cur.state.goal_text.clone(),
            });
            cur = parent;
        }
        if cur.state.depth != 0 {
            return Err(ProofError::CorruptTree(format!(
                "walk ended at node {} with depth {}",
                cur.id(),
                cur.state.depth
            )));
        }
        steps.reverse();
        Ok(ProofRecord {
            theorem_id: theorem_id.to_string(),
            statement: statement.to_string(),
            steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table() -> ScoreTable {
        ScoreTable::default()
    }

    #[test]
    fn budget_table_rows() {
        assert_eq!(compute_budget(&BudgetSpec::new(1, 4, 800, 8)), Ok(25_600));
        assert_eq!(compute_budget(&BudgetSpec::new(64, 4, 800, 8)), Ok(1_638_400));
        assert_eq!(compute_budget(&BudgetSpec::new(1, 1, 1, 1)), Ok(1));
    }

    #[test]
    fn budget_overflow_is_an_error() {
        let spec = BudgetSpec::new(u64::MAX, 2, 1, 1);
        assert!(matches!(compute_budget(&spec), Err(ProofError::BudgetOverflow(_))));
        let zero = BudgetSpec::new(0, 4, 800, 8);
        assert!(matches!(compute_budget(&zero), Err(ProofError::InvalidBudget(_))));
    }

    #[test]
    fn budget_notation_parses() {
        let b: BudgetSpec = "64x4x800x8".parse().unwrap();
        assert_eq!(b, BudgetSpec::new(64, 4, 800, 8));
        let b: BudgetSpec = "64 × 4 × 800 × 8".parse().unwrap();
        assert_eq!(b, BudgetSpec::new(64, 4, 800, 8));
        assert!("64x4x800".parse::<BudgetSpec>().is_err());
        assert!("64x4x0x8".parse::<BudgetSpec>().is_err());
        assert_eq!(b.to_string().parse::<BudgetSpec>().unwrap(), b);
    }

    proptest! {
        #[test]
        fn budget_is_order_independent(a in 1u64..=50_000, b in 1u64..=50_000,
                                       c in 1u64..=50_000, d in 1u64..=50_000) {
            let x = compute_budget(&BudgetSpec::new(a, b, c, d)).unwrap();
            let y = compute_budget(&BudgetSpec::new(d, c, b, a)).unwrap();
            let z = compute_budget(&BudgetSpec::new(b, d, a, c)).unwrap();
            prop_assert_eq!(x, y);
            prop_assert_eq!(x, z);
            prop_assert_eq!(x as u128, a as u128 * b as u128 * c as u128 * d as u128);
        }

        #[test]
        fn insert_then_extract_round_trips(tactics in proptest::collection::vec("[a-z_]{1,8}( [a-z0-9]{1,4})?", 1..20)) {
            let t = table();
            let mut tree = SearchTree::new("⊢ root", false, &t);
            let mut cur = 0;
            for (i, tac) in tactics.iter().enumerate() {
                let last = i + 1 == tactics.len();
                let goal = if last { String::new() } else { format!("⊢ g{i}") };
                cur = tree.add_child(cur, tac.clone(), goal, last, &t).unwrap();
            }
            let proof = tree.extract_proof(cur, "thm", "stmt").unwrap();
            let got: Vec<&str> = proof.tactics().collect();
            let want: Vec<&str> = tactics.iter().map(String::as_str).collect();
            prop_assert_eq!(&got, &want);
            let script = concat_script(&proof).unwrap();
            let split: Vec<&str> = script.split('\n').collect();
            prop_assert_eq!(split, want);
        }
    }

    #[test]
    fn extract_single_step() {
        let t = table();
        let mut tree = SearchTree::new("⊢ P", false, &t);
        let a = tree.add_child(0, "exact h", "", true, &t).unwrap();
        let p = tree.extract_proof(a, "t", "P").unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.steps[0].state_before, "⊢ P");
        assert_eq!(p.steps[0].tactic, "exact h");
    }

    #[test]
    fn extract_chain_in_order() {
        let t = table();
        let mut tree = SearchTree::new("⊢ P", false, &t);
        let a = tree.add_child(0, "a", "⊢ A", false, &t).unwrap();
        let b = tree.add_child(a, "b", "⊢ B", false, &t).unwrap();
        let c = tree.add_child(b, "c", "", true, &t).unwrap();
        let p = tree.extract_proof(c, "t", "P").unwrap();
        assert_eq!(p.tactics().collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(p.len(), tree.get(c).unwrap().state.depth);
        for w in p.steps.windows(2) {
            assert_eq!(w[0].state_after, w[1].state_before);
        }
    }

    /// Reference walk: follow parent links from the leaf with no checks.
    fn naive_path(nodes: &[SearchNode], leaf: NodeId) -> Vec<String> {
        let mut out = Vec::new();
        let mut id = leaf;
        loop {
            let n = &nodes[id];
            match n.state.parent {
                Some(p) => {
                    out.push(n.tactic_in.clone().unwrap());
                    id = p;
                }
                None => break,
            }
        }
        out.reverse();
        out
    }

    #[test]
    fn extract_matches_naive_walk_on_random_tree() {
        let t = table();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut tree = SearchTree::new("⊢ root", false, &t);
            for i in 1..49 {
                let parent = rng.gen_range(0..tree.len());
                tree.add_child(parent, format!("tac{i}"), format!("⊢ s{i}"), false, &t)
                    .unwrap();
            }
            let parent = rng.gen_range(0..tree.len());
            let leaf = tree.add_child(parent, "done", "", true, &t).unwrap();
            assert_eq!(tree.len(), 50);
            let proof = tree.extract_proof(leaf, "t", "s").unwrap();
            let got: Vec<String> = proof.tactics().map(String::from).collect();
            assert_eq!(got, naive_path(tree.nodes(), leaf));
            assert_eq!(proof.len(), tree.get(leaf).unwrap().state.depth);
        }
    }

    #[test]
    fn extract_errors() {
        let t = table();
        let mut tree = SearchTree::new("⊢ P", false, &t);
        let a = tree.add_child(0, "a", "⊢ A", false, &t).unwrap();
        assert_eq!(tree.extract_proof(a, "t", "P"), Err(ProofError::NotSolved(a)));
        assert_eq!(tree.extract_proof(9, "t", "P"), Err(ProofError::UnknownNode(9)));

        let mut nodes = tree.nodes().to_vec();
        let mut broken = nodes[1].clone();
        broken.state.id = 2;
        broken.state.parent = Some(7);
        broken.state.solved = true;
        nodes.push(broken);
        let corrupt = SearchTree::from_nodes(nodes);
        assert!(matches!(
            corrupt.extract_proof(2, "t", "P"),
            Err(ProofError::CorruptTree(_))
        ));
    }

    #[test]
    fn solved_nodes_are_terminal() {
        let t = table();
        let mut tree = SearchTree::new("⊢ P", false, &t);
        let a = tree.add_child(0, "exact h", "", true, &t).unwrap();
        assert!(tree.add_child(a, "x", "⊢ Q", false, &t).is_err());
    }

    #[test]
    fn script_concatenation() {
        let rec = |tacs: &[&str]| ProofRecord {
            theorem_id: "t".into(),
            statement: "s".into(),
            steps: tacs
                .iter()
                .map(|t| ProofStep {
                    state_before: String::new(),
                    tactic: t.to_string(),
                    state_after: String::new(),
                })
                .collect(),
        };
        assert_eq!(concat_script(&rec(&["intro h", "exact h"])).unwrap(), "intro h\nexact h");
        assert_eq!(concat_script(&rec(&["norm_num"])).unwrap(), "norm_num");
        let eight: Vec<String> = (0..8).map(|i| format!("tac_{i} ⟨a, b⟩")).collect();
        let refs: Vec<&str> = eight.iter().map(String::as_str).collect();
        let script = concat_script(&rec(&refs)).unwrap();
        assert_eq!(script.bytes().filter(|&b| b == b'\n').count(), 7);
        assert_eq!(concat_script(&rec(&[])), Err(ProofError::EmptyProof));
    }

    #[test]
    fn tactic_normalization() {
        assert_eq!(normalize_tactic("  simp  ").as_deref(), Some("simp"));
        assert_eq!(normalize_tactic("   "), None);
        assert_eq!(normalize_tactic("intro h\nexact h"), None);
    }

    #[test]
    fn record_json_field_names() {
        let rec = ProofRecord {
            theorem_id: "t1".into(),
            statement: "⊢ True".into(),
            steps: vec![ProofStep {
                state_before: "⊢ True".into(),
                tactic: "trivial".into(),
                state_after: String::new(),
            }],
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            line,
            r#"{"theorem_id":"t1","statement":"⊢ True","steps":[{"state_before":"⊢ True","tactic":"trivial","state_after":""}]}"#
        );
        let back: ProofRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rec);
    }
}
