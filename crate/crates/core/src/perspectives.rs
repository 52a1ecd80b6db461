//! The four node-selection perspectives: learned critic distance, tactic
//! effectiveness score, case-split count and state length, plus the frontier
//! selection that combines them.

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, Critic};
use crate::proof::{NodeId, SearchNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perspective {
    Critic,
    TacticScore,
    CaseCount,
    StateLength,
}

impl Perspective {
    /// Evaluation order used by the frontier; on collisions the earlier
    /// perspective keeps the node.
    pub const ALL: [Perspective; 4] = [
        Perspective::Critic,
        Perspective::TacticScore,
        Perspective::CaseCount,
        Perspective::StateLength,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Perspective::Critic => "critic",
            Perspective::TacticScore => "tactic_score",
            Perspective::CaseCount => "case_count",
            Perspective::StateLength => "state_length",
        }
    }
}

impl fmt::Display for Perspective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Perspective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "critic" => Ok(Perspective::Critic),
            "score" | "tactic_score" | "tactic" => Ok(Perspective::TacticScore),
            "cases" | "case_count" => Ok(Perspective::CaseCount),
            "length" | "state_length" => Ok(Perspective::StateLength),
            other => Err(format!("unknown perspective {other:?}")),
        }
    }
}

/// A row pattern of the tactic score table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TacticPattern {
    /// Head token equals the name.
    Head(String),
    /// Head token equals `head` and `token` appears anywhere later (`rw .* at`).
    HeadWithToken { head: String, token: String },
    /// Head token is immediately followed by `next` (`simp only`).
    HeadFollowedBy { head: String, next: String },
    /// `have` stating an equality with no `by` block.
    BareHaveEquality,
}

impl TacticPattern {
    fn specificity(&self) -> u8 {
        match self {
            TacticPattern::BareHaveEquality => 3,
            TacticPattern::HeadFollowedBy { .. } => 2,
            TacticPattern::HeadWithToken { .. } => 2,
            TacticPattern::Head(_) => 1,
        }
    }

    fn matches(&self, tactic: &str, words: &[&str], head: &str) -> bool {
        match self {
            TacticPattern::Head(h) => head == h,
            TacticPattern::HeadWithToken { head: h, token } => {
                head == h && words.iter().skip(1).any(|w| w == token)
            }
            TacticPattern::HeadFollowedBy { head: h, next } => {
                head == h && words.get(1).is_some_and(|w| w == next)
            }
            TacticPattern::BareHaveEquality => {
                head == "have" && has_equality(tactic) && !has_by_token(tactic)
            }
        }
    }

    fn parse(pattern: &str) -> Result<Self, String> {
        let words: Vec<&str> = pattern.split_whitespace().collect();
        match words.as_slice() {
            [] => Err("empty pattern".to_string()),
            ["have", ..] if pattern.contains('=') => Ok(TacticPattern::BareHaveEquality),
            [head, ".*", token] => Ok(TacticPattern::HeadWithToken {
                head: head.to_string(),
                token: token.to_string(),
            }),
            [head, next] => Ok(TacticPattern::HeadFollowedBy {
                head: head.to_string(),
                next: next.to_string(),
            }),
            [head] => Ok(TacticPattern::Head(head.to_string())),
            _ => Err(format!("unsupported pattern {pattern:?}")),
        }
    }
}

impl fmt::Display for TacticPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TacticPattern::Head(h) => write!(f, "{h}"),
            TacticPattern::HeadWithToken { head, token } => write!(f, "{head} .* {token}"),
            TacticPattern::HeadFollowedBy { head, next } => write!(f, "{head} {next}"),
            TacticPattern::BareHaveEquality => write!(f, "have x = y"),
        }
    }
}

/// Head token of a tactic: its first whitespace-delimited word, cut at the
/// first bracket so `rw[foo]` still reads as `rw`.
pub fn head_token(tactic: &str) -> &str {
    let first = tactic.split_whitespace().next().unwrap_or("");
    match first.find(['[', '(', '⟨', '{', ',', ';', '<']) {
        Some(0) | None => first,
        Some(i) => &first[..i],
    }
}

fn has_equality(text: &str) -> bool {
    let chars: Vec<char> = text.chars().collect();
    chars.iter().enumerate().any(|(i, &c)| {
        if c != '=' {
            return false;
        }
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        !matches!(prev, Some(':' | '<' | '>' | '!' | '=')) && !matches!(next, Some('>'))
    })
}

fn has_by_token(text: &str) -> bool {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '\''))
        .any(|w| w == "by")
}

/// Tactic effectiveness table. Built-in rows reproduce the published table;
/// rows can be overridden from a `pattern score` config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreTable {
    rows: Vec<(TacticPattern, u8)>,
    default_score: u8,
}

impl Default for ScoreTable {
    fn default() -> Self {
        use TacticPattern::*;
        let head = |s: &str| Head(s.to_string());
        let mut rows = Vec::new();
        for t in [
            "exact", "refine", "rintro", "rcases", "induction", "revert", "by_contra", "contrapose",
        ] {
            rows.push((head(t), 6));
        }
        rows.push((
            HeadWithToken {
                head: "rw".into(),
                token: "at".into(),
            },
            5,
        ));
        for t in ["rw", "convert", "apply", "subst", "linarith", "congr", "ring_nf"] {
            rows.push((head(t), 5));
        }
        for t in ["ring", "field_simp", "group", "aesop"] {
            rows.push((head(t), 4));
        }
        rows.push((
            HeadFollowedBy {
                head: "simp".into(),
                next: "only".into(),
            },
            3,
        ));
        for t in ["simp", "simp?", "simp_all"] {
            rows.push((head(t), 3));
        }
        for t in ["norm_cast", "push_cast", "clear"] {
            rows.push((head(t), 2));
        }
        for t in ["norm_num", "swap", "all_goals"] {
            rows.push((head(t), 1));
        }
        rows.push((BareHaveEquality, 0));
        ScoreTable {
            rows,
            default_score: 3,
        }
    }
}

impl ScoreTable {
    pub const MAX_SCORE: u8 = 6;

    pub fn default_score(&self) -> u8 {
        self.default_score
    }

    pub fn rows(&self) -> &[(TacticPattern, u8)] {
        &self.rows
    }

    /// Score of a tactic. The most specific matching row wins; unmatched
    /// tactics get the default.
    pub fn score(&self, tactic: &str) -> u8 {
        let tactic = tactic.trim();
        let words: Vec<&str> = tactic.split_whitespace().collect();
        let head = head_token(tactic);
        self.rows
            .iter()
            .filter(|(p, _)| p.matches(tactic, &words, head))
            .max_by_key(|(p, _)| p.specificity())
            .map(|&(_, s)| s)
            .unwrap_or(self.default_score)
    }

    /// Sets or replaces the score of one pattern.
    pub fn set(&mut self, pattern: TacticPattern, score: u8) -> Result<(), String> {
        if score > Self::MAX_SCORE {
            return Err(format!("score {score} outside 0..=6"));
        }
        match self.rows.iter_mut().find(|(p, _)| *p == pattern) {
            Some(row) => row.1 = score,
            None => self.rows.push((pattern, score)),
        }
        Ok(())
    }

    /// Applies overrides from text with one `pattern score` pair per line.
    /// `default N` changes the fallback; `#` starts a comment.
    pub fn apply_overrides(&mut self, text: &str) -> Result<(), String> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (pattern, score) = line
                .rsplit_once(char::is_whitespace)
                .ok_or_else(|| format!("line {}: expected `pattern score`", lineno + 1))?;
            let score: u8 = score
                .parse()
                .map_err(|_| format!("line {}: bad score {score:?}", lineno + 1))?;
            let pattern = pattern.trim();
            if pattern == "default" {
                if score > Self::MAX_SCORE {
                    return Err(format!("line {}: score {score} outside 0..=6", lineno + 1));
                }
                self.default_score = score;
                continue;
            }
            let pat = TacticPattern::parse(pattern).map_err(|e| format!("line {}: {e}", lineno + 1))?;
            self.set(pat, score).map_err(|e| format!("line {}: {e}", lineno + 1))?;
        }
        Ok(())
    }
}

/// Tactic effectiveness score under the built-in table.
///
/// Panics on empty input.
pub fn tactic_effectiveness_score(tactic: &str) -> u8 {
    assert!(!tactic.trim().is_empty(), "tactic text must be nonempty");
    default_table().score(tactic)
}

fn default_table() -> &'static ScoreTable {
    static TABLE: std::sync::OnceLock<ScoreTable> = std::sync::OnceLock::new();
    TABLE.get_or_init(ScoreTable::default)
}

/// Number of whitespace-delimited tokens that read exactly `case` once
/// surrounding punctuation is trimmed. `cases` and `rcases` never count.
pub fn count_case_occurrences(goal_text: &str) -> usize {
    goal_text
        .split_whitespace()
        .filter(|w| w.trim_matches(|c: char| !(c.is_alphanumeric() || c == '_')) == "case")
        .count()
}

/// Unicode scalar count of the trimmed state text.
pub fn state_length(goal_text: &str) -> usize {
    goal_text.trim().chars().count()
}

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("critic failed on node {node}: {source}")]
    Scorer {
        node: NodeId,
        #[source]
        source: BackendError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pick {
    pub perspective: Perspective,
    pub node: NodeId,
    /// True when the slot was filled by a random draw (ablation).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub random: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub picks: Vec<Pick>,
    pub selected: Vec<NodeId>,
}

impl Selection {
    pub fn pick(&self, p: Perspective) -> Option<NodeId> {
        self.picks.iter().find(|k| k.perspective == p).map(|k| k.node)
    }
}

fn distance_of(node: &SearchNode, critic: &dyn Critic) -> Result<f64, SelectError> {
    match node.critic_distance {
        Some(d) => Ok(d),
        None => critic.distance(&node.state.goal_text).map_err(|source| SelectError::Scorer {
            node: node.id(),
            source,
        }),
    }
}

fn best_by<N, K, F>(pool: &[N], mut key: F) -> NodeId
where
    N: Borrow<SearchNode>,
    F: FnMut(&SearchNode) -> K,
    K: PartialOrd,
{
    let mut best = pool[0].borrow();
    let mut best_key = key(best);
    for n in pool[1..].iter().map(Borrow::borrow) {
        let k = key(n);
        let ord = k.partial_cmp(&best_key).unwrap_or(Ordering::Equal);
        if ord == Ordering::Less || (ord == Ordering::Equal && n.id() < best.id()) {
            best = n;
            best_key = k;
        }
    }
    best.id()
}

/// Argmin of critic distance, ties to the smallest node id.
pub fn critic_pick<N: Borrow<SearchNode>>(pool: &[N], critic: &dyn Critic) -> Result<NodeId, SelectError> {
    if pool.is_empty() {
        return Err(SelectError::EmptyPool);
    }
    let dists = pool
        .iter()
        .map(|n| distance_of(n.borrow(), critic))
        .collect::<Result<Vec<f64>, _>>()?;
    let id = |i: usize| pool[i].borrow().id();
    let mut best = 0;
    for i in 1..pool.len() {
        let ord = dists[i].total_cmp(&dists[best]);
        if ord == Ordering::Less || (ord == Ordering::Equal && id(i) < id(best)) {
            best = i;
        }
    }
    Ok(id(best))
}

fn heuristic_pick<N: Borrow<SearchNode>>(pool: &[N], p: Perspective) -> NodeId {
    match p {
        Perspective::TacticScore => best_by(pool, |n| std::cmp::Reverse(n.tactic_score)),
        Perspective::CaseCount => best_by(pool, |n| n.case_count),
        Perspective::StateLength => best_by(pool, |n| n.state_len),
        Perspective::Critic => unreachable!("critic is picked by critic_pick"),
    }
}

/// General frontier selection over the given perspectives, in order. A
/// `disabled` perspective has its slot filled by a uniform draw from `rng`.
pub fn select_with<N: Borrow<SearchNode>, R: Rng>(
    pool: &[N],
    critic: &dyn Critic,
    perspectives: &[Perspective],
    disabled: Option<Perspective>,
    rng: &mut R,
) -> Result<Selection, SelectError> {
    if pool.is_empty() {
        return Err(SelectError::EmptyPool);
    }
    let mut picks = Vec::with_capacity(perspectives.len());
    for &p in perspectives {
        let (node, random) = if disabled == Some(p) {
            (pool[rng.gen_range(0..pool.len())].borrow().id(), true)
        } else if p == Perspective::Critic {
            (critic_pick(pool, critic)?, false)
        } else {
            (heuristic_pick(pool, p), false)
        };
        picks.push(Pick {
            perspective: p,
            node,
            random,
        });
    }
    let mut selected: Vec<NodeId> = Vec::with_capacity(picks.len());
    for pick in &picks {
        if !selected.contains(&pick.node) {
            selected.push(pick.node);
        }
    }
    Ok(Selection { picks, selected })
}

/// Up to four nodes: critic argmin, score argmax, case-count argmin and
/// state-length argmin, duplicates kept once.
pub fn select_frontier(pool: &[SearchNode], critic: &dyn Critic) -> Result<Selection, SelectError> {
    // No slot is random, so the generator is never drawn from.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    select_with(pool, critic, &Perspective::ALL, None, &mut rng)
}

/// `select_frontier` with one perspective replaced by a seeded uniform draw.
pub fn ablated_frontier(
    pool: &[SearchNode],
    critic: &dyn Critic,
    disabled: Perspective,
    seed: u64,
) -> Result<Selection, SelectError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    select_with(pool, critic, &Perspective::ALL, Some(disabled), &mut rng)
}
