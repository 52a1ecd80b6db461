use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{
    BackendError, Critic, CriticRequest, CriticResponse, GeneratorRequest, GeneratorResponse,
    TacticGenerator,
};

/// One captured exchange, stored one per JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureEntry {
    Generate {
        request: GeneratorRequest,
        response: GeneratorResponse,
    },
    Score {
        request: CriticRequest,
        response: CriticResponse,
    },
}

fn key<T: Serialize>(req: &T) -> String {
    serde_json::to_string(req).expect("requests serialize")
}

/// Wraps live backends and records every generator and critic exchange.
pub struct FixtureRecorder<G, C> {
    generator: G,
    critic: C,
    log: Mutex<Vec<FixtureEntry>>,
}

impl<G: TacticGenerator, C: Critic> FixtureRecorder<G, C> {
    pub fn new(generator: G, critic: C) -> Self {
        FixtureRecorder {
            generator,
            critic,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn entries(&self) -> Vec<FixtureEntry> {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in self.entries() {
            serde_json::to_writer(&mut out, &e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    fn push(&self, e: FixtureEntry) {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).push(e);
    }
}

impl<G: TacticGenerator, C: Critic> TacticGenerator for FixtureRecorder<G, C> {
    fn generate(&self, state: &str, n: usize, seed: Option<u64>) -> Result<Vec<String>, BackendError> {
        let tactics = self.generator.generate(state, n, seed)?;
        self.push(FixtureEntry::Generate {
            request: GeneratorRequest {
                state: state.to_string(),
                n,
                seed,
            },
            response: GeneratorResponse {
                tactics: tactics.clone(),
                scores: None,
            },
        });
        Ok(tactics)
    }
}

impl<G: TacticGenerator, C: Critic> Critic for FixtureRecorder<G, C> {
    fn distance(&self, state: &str) -> Result<f64, BackendError> {
        let d = self.critic.distance(state)?;
        self.push(FixtureEntry::Score {
            request: CriticRequest {
                state: state.to_string(),
            },
            response: CriticResponse { distance: d },
        });
        Ok(d)
    }
}

/// Answers generator and critic requests from captured exchanges only.
#[derive(Debug, Default, Clone)]
pub struct FixtureReplay {
    generate: HashMap<String, Vec<String>>,
    score: HashMap<String, f64>,
}

impl FixtureReplay {
    /// Later entries win. Conflicting entries for one request are logged.
    pub fn from_entries(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        let mut r = FixtureReplay::default();
        let mut conflicts = 0;
        for e in entries {
            match e {
                FixtureEntry::Generate { request, response } => {
                    let old = r.generate.insert(key(&request), response.tactics.clone());
                    conflicts += usize::from(old.is_some_and(|o| o != response.tactics));
                }
                FixtureEntry::Score { request, response } => {
                    let old = r.score.insert(key(&request), response.distance);
                    conflicts += usize::from(old.is_some_and(|o| o.to_bits() != response.distance.to_bits()));
                }
            }
        }
        if conflicts > 0 {
            warn!("{conflicts} fixture requests were recorded with different responses; replay keeps the last");
        }
        r
    }

    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self, BackendError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| BackendError::Transport(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: FixtureEntry = serde_json::from_str(&line)
                .map_err(|e| BackendError::Malformed(format!("fixture line {}: {e}", i + 1)))?;
            entries.push(e);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn len(&self) -> usize {
        self.generate.len() + self.score.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TacticGenerator for FixtureReplay {
    fn generate(&self, state: &str, n: usize, seed: Option<u64>) -> Result<Vec<String>, BackendError> {
        let req = GeneratorRequest {
            state: state.to_string(),
            n,
            seed,
        };
        self.generate
            .get(&key(&req))
            .cloned()
            .ok_or_else(|| BackendError::Unavailable(format!("no fixture for {}", key(&req))))
    }
}

impl Critic for FixtureReplay {
    fn distance(&self, state: &str) -> Result<f64, BackendError> {
        let req = CriticRequest {
            state: state.to_string(),
        };
        self.score
            .get(&key(&req))
            .copied()
            .ok_or_else(|| BackendError::Unavailable(format!("no fixture for {}", key(&req))))
    }
}
