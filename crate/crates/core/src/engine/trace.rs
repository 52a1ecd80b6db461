use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::perspectives::Selection;
use crate::proof::{NodeId, SearchOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    /// New open node added to the tree.
    Ok,
    /// Goal text already seen; child discarded.
    Duplicate,
    /// Closed the goal and passed whole-script verification.
    Solved,
    /// Closed the goal stepwise but failed whole-script verification.
    Unverified,
    /// The tactic was rejected by the environment.
    Error,
    Timeout,
    /// Transport or protocol failure after one retry.
    Failed,
    /// Executed, but the search had already ended in this batch.
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecRecord {
    pub node: NodeId,
    pub tactic: String,
    pub status: ExecStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub child: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub node: NodeId,
    pub reason: String,
}

/// One line of a search trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceRecord {
    Iteration {
        theorem_id: String,
        seed: u64,
        iteration: u64,
        expanded: Vec<NodeId>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        skipped: Vec<SkipRecord>,
        executed: Vec<ExecRecord>,
        pool_size: usize,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        global_fallback: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        selection: Option<Selection>,
    },
    Restart {
        theorem_id: String,
        seed: u64,
        iteration: u64,
        reason: String,
    },
    Outcome {
        theorem_id: String,
        seed: u64,
        outcome: SearchOutcome,
    },
}

pub trait TraceSink {
    fn record(&mut self, rec: TraceRecord);
}

/// Discards everything.
pub struct NullTrace;

impl TraceSink for NullTrace {
    fn record(&mut self, _rec: TraceRecord) {}
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, rec: TraceRecord) {
        self.push(rec);
    }
}

/// Writes each record as one JSON line. The first write error is kept and
/// later records are dropped.
pub struct JsonlTrace<W: Write> {
    out: W,
    error: Option<std::io::Error>,
}

impl<W: Write> JsonlTrace<W> {
    pub fn new(out: W) -> Self {
        JsonlTrace { out, error: None }
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> TraceSink for JsonlTrace<W> {
    fn record(&mut self, rec: TraceRecord) {
        if self.error.is_some() {
            return;
        }
        let res = serde_json::to_writer(&mut self.out, &rec)
            .map_err(std::io::Error::from)
            .and_then(|_| self.out.write_all(b"\n"));
        if let Err(e) = res {
            self.error = Some(e);
        }
    }
}
