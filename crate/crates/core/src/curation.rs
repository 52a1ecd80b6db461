//! Training-data curation: drop ineffective steps, filter short proofs and
//! emit (state, step) pairs.
//!
//! The pipeline order is fixed: noop removal runs first, then the length
//! filter sees each proof's effective length.

use std::io::{BufRead, Write};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::backends::{BackendError, ProofEnvironment, StepResponse};
use crate::perspectives::head_token;
use crate::proof::{ProofRecord, ProofStep};

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("replay of {theorem_id}: {message}")]
    Replay { theorem_id: String, message: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    pub max_excluded_steps: usize,
    pub drop_noops: bool,
    pub whitespace_canonicalization: bool,
    /// When nonempty, only steps whose head token is listed count as noops.
    pub noop_tactics: Vec<String>,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            max_excluded_steps: 3,
            drop_noops: true,
            whitespace_canonicalization: true,
            noop_tactics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub input_theorems: usize,
    pub malformed_lines: usize,
    pub input_steps: usize,
    pub removed_noop_steps: usize,
    /// Records with no steps left after noop removal.
    pub emptied_records: usize,
    pub removed_short: usize,
    pub output_theorems: usize,
    pub output_pairs: usize,
    pub removed_short_fraction: f64,
    pub removed_noop_fraction: f64,
}

impl CurationReport {
    fn finalize(&mut self) {
        self.removed_short_fraction = ratio(self.removed_short, self.input_theorems);
        self.removed_noop_fraction = ratio(self.removed_noop_steps, self.input_steps);
    }

    pub fn summary(&self) -> String {
        format!(
            "theorems: {} in, {} short removed ({:.2}%), {} out\n\
             steps: {} in, {} noop removed ({:.2}%), {} pairs out\n\
             malformed lines skipped: {}, records emptied by noop removal: {}",
            self.input_theorems,
            self.removed_short,
            100.0 * self.removed_short_fraction,
            self.output_theorems,
            self.input_steps,
            self.removed_noop_steps,
            100.0 * self.removed_noop_fraction,
            self.output_pairs,
            self.malformed_lines,
            self.emptied_records,
        )
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub state: String,
    pub step: String,
}

/// Normalizes line endings, collapses runs of blanks within each line and
/// trims the result.
pub fn canonicalize(text: &str) -> String {
    let unified = text.replace("\r\n", "\n").replace('\r', "\n");
    let lines: Vec<String> = unified
        .split('\n')
        .map(|line| line.split([' ', '\t']).filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" "))
        .collect();
    lines.join("\n").trim().to_string()
}

fn same_state(a: &str, b: &str, config: &CurationConfig) -> bool {
    if config.whitespace_canonicalization {
        canonicalize(a) == canonicalize(b)
    } else {
        a == b
    }
}

fn is_noop(step: &ProofStep, config: &CurationConfig) -> bool {
    let eligible = config.noop_tactics.is_empty()
        || config.noop_tactics.iter().any(|t| t == head_token(&step.tactic));
    eligible && same_state(&step.state_before, &step.state_after, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoopOutcome {
    pub record: ProofRecord,
    pub removed: usize,
    /// Every step was a noop.
    pub emptied: bool,
}

/// Removes steps whose post-state equals their pre-state. The step after a
/// removed run inherits the run's original pre-state.
pub fn drop_noop_steps(record: &ProofRecord, config: &CurationConfig) -> NoopOutcome {
    let mut steps = Vec::with_capacity(record.steps.len());
    let mut pending_before: Option<&str> = None;
    for step in &record.steps {
        if is_noop(step, config) {
            pending_before.get_or_insert(step.state_before.as_str());
            continue;
        }
        let mut kept = step.clone();
        if let Some(before) = pending_before.take() {
            kept.state_before = before.to_string();
        }
        steps.push(kept);
    }
    let removed = record.steps.len() - steps.len();
    NoopOutcome {
        emptied: !record.steps.is_empty() && steps.is_empty(),
        removed,
        record: ProofRecord {
            steps,
            ..record.clone()
        },
    }
}

/// Keeps exactly the records longer than `max_excluded_steps`, in order.
pub fn filter_short_proofs<'c, I>(corpus: I, config: &'c CurationConfig) -> impl Iterator<Item = ProofRecord> + 'c
where
    I: IntoIterator<Item = ProofRecord>,
    I::IntoIter: 'c,
{
    corpus
        .into_iter()
        .filter(move |r| r.len() > config.max_excluded_steps)
}

pub fn emit_pairs(corpus: &[ProofRecord]) -> impl Iterator<Item = Pair> + '_ {
    corpus.iter().flat_map(|r| {
        r.steps.iter().map(|s| Pair {
            state: s.state_before.clone(),
            step: s.tactic.clone(),
        })
    })
}

pub fn write_pairs<W: Write>(corpus: &[ProofRecord], mut out: W) -> Result<usize, CurationError> {
    let mut n = 0;
    for pair in emit_pairs(corpus) {
        serde_json::to_writer(&mut out, &pair)?;
        out.write_all(b"\n")?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

fn check_record(r: &ProofRecord) -> Result<(), String> {
    if r.theorem_id.trim().is_empty() {
        return Err("empty theorem_id".into());
    }
    for (i, s) in r.steps.iter().enumerate() {
        if s.tactic.trim().is_empty() {
            return Err(format!("step {i} has an empty tactic"));
        }
    }
    Ok(())
}

/// Parses a ProofRecord JSONL stream. Blank lines are ignored; malformed
/// lines are returned as errors alongside the parsed records, in input order.
pub fn read_records<R: BufRead>(input: R) -> Result<(Vec<ProofRecord>, Vec<CurationError>), CurationError> {
    let mut lines = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    let parsed: Vec<Result<ProofRecord, CurationError>> = lines
        .par_iter()
        .map(|(n, line)| {
            serde_json::from_str::<ProofRecord>(line)
                .map_err(|e| e.to_string())
                .and_then(|r| check_record(&r).map(|_| r))
                .map_err(|message| CurationError::Malformed { line: *n, message })
        })
        .collect();
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for p in parsed {
        match p {
            Ok(r) => records.push(r),
            Err(e) => errors.push(e),
        }
    }
    Ok((records, errors))
}

/// Runs noop removal then the length filter over well-formed records.
pub fn curate(records: &[ProofRecord], config: &CurationConfig) -> (Vec<ProofRecord>, CurationReport) {
    let mut report = CurationReport {
        input_theorems: records.len(),
        input_steps: records.iter().map(ProofRecord::len).sum(),
        ..CurationReport::default()
    };
    let cleaned: Vec<ProofRecord> = if config.drop_noops {
        let outcomes: Vec<NoopOutcome> = records.par_iter().map(|r| drop_noop_steps(r, config)).collect();
        report.removed_noop_steps = outcomes.iter().map(|o| o.removed).sum();
        report.emptied_records = outcomes.iter().filter(|o| o.emptied).count();
        outcomes.into_iter().map(|o| o.record).collect()
    } else {
        records.to_vec()
    };
    let kept: Vec<ProofRecord> = filter_short_proofs(cleaned, config).collect();
    report.removed_short = records.len() - kept.len();
    report.output_theorems = kept.len();
    report.output_pairs = kept.iter().map(ProofRecord::len).sum();
    report.finalize();
    (kept, report)
}

/// Parses then curates a JSONL stream, logging each malformed line.
pub fn curate_jsonl<R: BufRead>(
    input: R,
    config: &CurationConfig,
) -> Result<(Vec<ProofRecord>, CurationReport), CurationError> {
    let (records, errors) = read_records(input)?;
    for e in &errors {
        warn!("skipping malformed record: {e}");
    }
    let (kept, mut report) = curate(&records, config);
    report.malformed_lines = errors.len();
    Ok((kept, report))
}

/// Re-derives every step's states by executing the tactics in `env`.
pub fn replay_record(
    record: &ProofRecord,
    env: &dyn ProofEnvironment,
    timeout: Duration,
) -> Result<ProofRecord, CurationError> {
    let fail = |message: String| CurationError::Replay {
        theorem_id: record.theorem_id.clone(),
        message,
    };
    let init = env.init(&record.statement)?;
    let mut state_id = init.state_id;
    let mut goal = init.goals;
    let mut steps = Vec::with_capacity(record.steps.len());
    for step in &record.steps {
        match env.apply_step(state_id, &step.tactic, timeout)? {
            StepResponse::Ok {
                new_state_id,
                goal_text,
                ..
            } => {
                steps.push(ProofStep {
                    state_before: std::mem::replace(&mut goal, goal_text.clone()),
                    tactic: step.tactic.clone(),
                    state_after: goal_text,
                });
                state_id = new_state_id;
            }
            StepResponse::Error { message } => return Err(fail(format!("{:?}: {message}", step.tactic))),
            StepResponse::Timeout {} => return Err(fail(format!("{:?} timed out", step.tactic))),
        }
    }
    Ok(ProofRecord {
        steps,
        ..record.clone()
    })
}
