//! Proof length and diversity statistics, common-subset comparisons and
//! report emission.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::warn;

use crate::engine::{PassReport, TraceRecord};
use crate::proof::{ProofRecord, ProofStep};

mod svg;

pub use svg::histogram_svg;

/// Buckets 1..=9 individually, then one bucket for 10 and above.
pub const HISTOGRAM_BUCKETS: usize = 10;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("proof {0:?} has no steps")]
    EmptyProof(String),
    #[error("statistics of an empty set")]
    EmptySet,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// First whitespace-delimited word of each step.
    #[default]
    HeadToken,
    /// The whole trimmed step.
    FullText,
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "head_token" | "head" => Ok(Normalization::HeadToken),
            "full_text" | "full" => Ok(Normalization::FullText),
            other => Err(format!("unknown normalization {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityScore {
    pub unique_tactics: usize,
    pub length: usize,
    pub score: f64,
}

fn tactic_key(tactic: &str, norm: Normalization) -> &str {
    let t = tactic.trim();
    match norm {
        Normalization::HeadToken => t.split_whitespace().next().unwrap_or(""),
        Normalization::FullText => t,
    }
}

pub fn diversity(proof: &ProofRecord, norm: Normalization) -> Result<DiversityScore, AnalyticsError> {
    if proof.is_empty() {
        return Err(AnalyticsError::EmptyProof(proof.theorem_id.clone()));
    }
    let unique = proof.tactics().map(|t| tactic_key(t, norm)).collect::<HashSet<_>>().len();
    let length = proof.len();
    Ok(DiversityScore {
        unique_tactics: unique,
        length,
        score: unique as f64 / length as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub count: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Counts for lengths 1..=9, then 10+.
    pub histogram: [usize; HISTOGRAM_BUCKETS],
}

/// Bucket index of a proof length; `None` for zero.
pub fn bucket(length: usize) -> Option<usize> {
    match length {
        0 => None,
        1..=9 => Some(length - 1),
        _ => Some(HISTOGRAM_BUCKETS - 1),
    }
}

pub fn bucket_label(index: usize) -> String {
    if index + 1 < HISTOGRAM_BUCKETS {
        (index + 1).to_string()
    } else {
        format!("{HISTOGRAM_BUCKETS}+")
    }
}

pub fn stats_of_lengths(lengths: &[usize]) -> Result<LengthStats, AnalyticsError> {
    if lengths.is_empty() {
        return Err(AnalyticsError::EmptySet);
    }
    if lengths.contains(&0) {
        return Err(AnalyticsError::EmptyProof(String::new()));
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mean = sorted.iter().sum::<usize>() as f64 / n as f64;
    let median = if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    };
    let var = sorted.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n as f64;
    let mut histogram = [0; HISTOGRAM_BUCKETS];
    for &l in &sorted {
        histogram[bucket(l).expect("nonzero length")] += 1;
    }
    Ok(LengthStats {
        count: n,
        min: sorted[0],
        max: sorted[n - 1],
        mean,
        median,
        std: var.sqrt(),
        histogram,
    })
}

pub fn length_stats(proofs: &[ProofRecord]) -> Result<LengthStats, AnalyticsError> {
    if let Some(p) = proofs.iter().find(|p| p.is_empty()) {
        return Err(AnalyticsError::EmptyProof(p.theorem_id.clone()));
    }
    stats_of_lengths(&proofs.iter().map(ProofRecord::len).collect::<Vec<_>>())
}

pub fn mean_diversity(proofs: &[ProofRecord], norm: Normalization) -> Result<f64, AnalyticsError> {
    if proofs.is_empty() {
        return Err(AnalyticsError::EmptySet);
    }
    let mut sum = 0.0;
    for p in proofs {
        sum += diversity(p, norm)?.score;
    }
    Ok(sum / proofs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub length: LengthStats,
    pub mean_diversity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub mean_diversity: f64,
}

/// Paired statistics over the theorems both corpora solved. Every delta is
/// side A minus side B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub common_ids: Vec<String>,
    pub a: Option<CorpusSummary>,
    pub b: Option<CorpusSummary>,
    pub deltas: Option<Deltas>,
}

impl Comparison {
    pub fn is_empty(&self) -> bool {
        self.common_ids.is_empty()
    }
}

fn summarize(proofs: &[ProofRecord], norm: Normalization) -> Result<CorpusSummary, AnalyticsError> {
    Ok(CorpusSummary {
        length: length_stats(proofs)?,
        mean_diversity: mean_diversity(proofs, norm)?,
    })
}

fn first_by_id(proofs: &[ProofRecord]) -> BTreeMap<&str, &ProofRecord> {
    let mut map = BTreeMap::new();
    for p in proofs {
        map.entry(p.theorem_id.as_str()).or_insert(p);
    }
    map
}

/// Restricts both corpora to the theorem ids they share. Only the first proof
/// per id on each side is used.
pub fn common_subset(
    proofs_a: &[ProofRecord],
    proofs_b: &[ProofRecord],
    norm: Normalization,
) -> Result<Comparison, AnalyticsError> {
    let a = first_by_id(proofs_a);
    let b = first_by_id(proofs_b);
    let ids: Vec<&str> = a.keys().filter(|k| b.contains_key(*k)).copied().collect();
    if ids.is_empty() {
        return Ok(Comparison {
            common_ids: Vec::new(),
            a: None,
            b: None,
            deltas: None,
        });
    }
    let side = |m: &BTreeMap<&str, &ProofRecord>| ids.iter().map(|id| m[id].clone()).collect::<Vec<_>>();
    let sa = summarize(&side(&a), norm)?;
    let sb = summarize(&side(&b), norm)?;
    let deltas = Deltas {
        min: sa.length.min as f64 - sb.length.min as f64,
        max: sa.length.max as f64 - sb.length.max as f64,
        mean: sa.length.mean - sb.length.mean,
        median: sa.length.median - sb.length.median,
        std: sa.length.std - sb.length.std,
        mean_diversity: sa.mean_diversity - sb.mean_diversity,
    };
    Ok(Comparison {
        common_ids: ids.into_iter().map(String::from).collect(),
        a: Some(sa),
        b: Some(sb),
        deltas: Some(deltas),
    })
}

/// One row per corpus: `corpus,min,max,mean,median,std`. Reals use the
/// shortest representation that round-trips.
pub fn length_table_csv(rows: &[(String, LengthStats)]) -> String {
    let mut out = String::from("corpus,min,max,mean,median,std\n");
    for (name, s) in rows {
        let name = if name.contains([',', '"', '\n']) {
            format!("\"{}\"", name.replace('"', "\"\""))
        } else {
            name.clone()
        };
        out.push_str(&format!("{name},{},{},{},{},{}\n", s.min, s.max, s.mean, s.median, s.std));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepCounting {
    /// One step per nonempty tactic line.
    #[default]
    Lines,
    /// Each `<;>` on a line adds one more step.
    ExpandChains,
}

impl std::str::FromStr for StepCounting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lines" => Ok(StepCounting::Lines),
            "expand_chains" | "expand" => Ok(StepCounting::ExpandChains),
            other => Err(format!("unknown step counting {other:?}")),
        }
    }
}

/// Tactic lines of a proof script. A declaration header ending in `:= by`
/// is skipped, as is a leading `by`; any tactic after either on the same
/// line is kept. Lean line comments are ignored.
pub fn script_steps(script: &str, mode: StepCounting) -> Vec<String> {
    let mut lines: Vec<&str> = script.lines().collect();
    if let Some(pos) = lines.iter().position(|l| l.contains(":= by")) {
        let rest = lines[pos].split_once(":= by").map(|(_, r)| r).unwrap_or("");
        lines.splice(..=pos, [rest]);
    }
    if let Some(first) = lines.iter_mut().find(|l| !l.trim().is_empty()) {
        let t = first.trim_start();
        if t == "by" || t.starts_with("by ") {
            *first = &t[2..];
        }
    }
    let mut steps = Vec::new();
    for line in lines {
        let t = line.trim();
        if t.is_empty() || t.starts_with("--") {
            continue;
        }
        match mode {
            StepCounting::Lines => steps.push(t.to_string()),
            StepCounting::ExpandChains => steps.extend(
                t.split("<;>")
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(String::from),
            ),
        }
    }
    steps
}

pub fn count_script_steps(script: &str, mode: StepCounting) -> usize {
    script_steps(script, mode).len()
}

/// Wraps a whole-proof script as a record whose steps carry no states.
pub fn script_to_record(theorem_id: &str, statement: &str, script: &str, mode: StepCounting) -> ProofRecord {
    ProofRecord {
        theorem_id: theorem_id.into(),
        statement: statement.into(),
        steps: script_steps(script, mode)
            .into_iter()
            .map(|tactic| ProofStep {
                state_before: String::new(),
                tactic,
                state_after: String::new(),
            })
            .collect(),
    }
}

#[derive(Debug, Deserialize)]
struct ScriptLine {
    #[serde(alias = "id")]
    theorem_id: String,
    #[serde(default)]
    statement: String,
    script: String,
}

/// Proofs found in one JSONL line: a ProofRecord, a search trace outcome, a
/// PassReport, or `{"theorem_id", "script"}`.
fn proofs_in_line(v: Value, mode: StepCounting) -> Result<Vec<ProofRecord>, String> {
    let obj = v.as_object().ok_or("not a JSON object")?;
    if obj.contains_key("event") {
        let rec: TraceRecord = serde_json::from_value(v).map_err(|e| e.to_string())?;
        return Ok(match rec {
            TraceRecord::Outcome { outcome, .. } if outcome.is_solved() => outcome.proof.into_iter().collect(),
            _ => Vec::new(),
        });
    }
    if obj.contains_key("outcomes") {
        let rep: PassReport = serde_json::from_value(v).map_err(|e| e.to_string())?;
        return Ok(rep.proof().cloned().into_iter().collect());
    }
    if obj.contains_key("script") {
        let s: ScriptLine = serde_json::from_value(v).map_err(|e| e.to_string())?;
        return Ok(vec![script_to_record(&s.theorem_id, &s.statement, &s.script, mode)]);
    }
    let rec: ProofRecord = serde_json::from_value(v).map_err(|e| e.to_string())?;
    Ok(vec![rec])
}

#[derive(Debug, Clone, Default)]
pub struct LoadedProofs {
    pub proofs: Vec<ProofRecord>,
    pub malformed_lines: usize,
    /// Well-formed records with no steps, left out of `proofs`.
    pub empty_proofs: usize,
}

pub fn load_proofs<R: BufRead>(input: R, mode: StepCounting) -> Result<LoadedProofs, AnalyticsError> {
    let mut out = LoadedProofs::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(&line)
            .map_err(|e| e.to_string())
            .and_then(|v| proofs_in_line(v, mode));
        match parsed {
            Ok(ps) => {
                for p in ps {
                    if p.is_empty() {
                        out.empty_proofs += 1;
                    } else {
                        out.proofs.push(p);
                    }
                }
            }
            Err(message) => {
                warn!("skipping malformed line {}: {message}", i + 1);
                out.malformed_lines += 1;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub corpus: String,
    pub proofs: usize,
    pub malformed_lines: usize,
    pub empty_proofs: usize,
    pub normalization: Normalization,
    /// Absent when the corpus holds no nonempty proof.
    pub summary: Option<CorpusSummary>,
}

pub fn corpus_report(name: &str, loaded: &LoadedProofs, norm: Normalization) -> Result<CorpusReport, AnalyticsError> {
    let summary = if loaded.proofs.is_empty() {
        None
    } else {
        Some(summarize(&loaded.proofs, norm)?)
    };
    Ok(CorpusReport {
        corpus: name.into(),
        proofs: loaded.proofs.len(),
        malformed_lines: loaded.malformed_lines,
        empty_proofs: loaded.empty_proofs,
        normalization: norm,
        summary,
    })
}
