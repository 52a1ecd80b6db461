//! Clients for the external services a deployment talks to: the tactic
//! generator, the stepwise proof environment (which also runs whole-script
//! verification) and the remote critic.
//!
//! All three share one JSON schema, carried either over a spawned process's
//! standard streams (one object per line) or over HTTP POST.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::proof::normalize_tactic;

mod clients;
mod fixture;
mod http;
mod subprocess;

pub use clients::{CriticClient, EnvironmentClient, GeneratorClient};
pub use fixture::{FixtureEntry, FixtureRecorder, FixtureReplay};
pub use http::HttpTransport;
pub use subprocess::SubprocessTransport;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("empty response")]
    Empty,
    #[error("session lost: {0}")]
    SessionLost(String),
    #[error("unknown state: {0}")]
    UnknownState(String),
    #[error("service unavailable: {0}")]
    Unavailable(String),
}

impl BackendError {
    /// Errors worth one retry (protocol or transport hiccups).
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::Transport(_) | BackendError::Malformed(_) | BackendError::Timeout(_)
        )
    }
}

pub trait TacticGenerator: Send + Sync {
    /// Raw service call; use [`generate_tactics`] for the normalized contract.
    fn generate(&self, state_text: &str, n: usize, seed: Option<u64>)
        -> Result<Vec<String>, BackendError>;
}

/// Distance-to-completion scorer. Lower is closer; solved states score the
/// minimum.
pub trait Critic: Send + Sync {
    fn distance(&self, goal_text: &str) -> Result<f64, BackendError>;
}

pub trait ProofEnvironment: Send + Sync {
    fn init(&self, statement: &str) -> Result<InitResponse, BackendError>;
    fn apply_step(
        &self,
        state_id: u64,
        tactic: &str,
        timeout: Duration,
    ) -> Result<StepResponse, BackendError>;
    fn verify(&self, statement: &str, script: &str) -> Result<VerifyResponse, BackendError>;
    /// Starts a fresh session after a crash. Old state ids become invalid.
    fn restart(&self) -> Result<(), BackendError> {
        Ok(())
    }
}

impl<T: TacticGenerator + ?Sized> TacticGenerator for &T {
    fn generate(&self, s: &str, n: usize, seed: Option<u64>) -> Result<Vec<String>, BackendError> {
        (**self).generate(s, n, seed)
    }
}

impl<T: Critic + ?Sized> Critic for &T {
    fn distance(&self, g: &str) -> Result<f64, BackendError> {
        (**self).distance(g)
    }
}

impl<T: TacticGenerator + ?Sized> TacticGenerator for Box<T> {
    fn generate(&self, s: &str, n: usize, seed: Option<u64>) -> Result<Vec<String>, BackendError> {
        (**self).generate(s, n, seed)
    }
}

impl<T: Critic + ?Sized> Critic for Box<T> {
    fn distance(&self, g: &str) -> Result<f64, BackendError> {
        (**self).distance(g)
    }
}

impl<T: ProofEnvironment + ?Sized> ProofEnvironment for &T {
    fn init(&self, statement: &str) -> Result<InitResponse, BackendError> {
        (**self).init(statement)
    }
    fn apply_step(&self, id: u64, t: &str, timeout: Duration) -> Result<StepResponse, BackendError> {
        (**self).apply_step(id, t, timeout)
    }
    fn verify(&self, statement: &str, script: &str) -> Result<VerifyResponse, BackendError> {
        (**self).verify(statement, script)
    }
    fn restart(&self) -> Result<(), BackendError> {
        (**self).restart()
    }
}

impl<T: ProofEnvironment + ?Sized> ProofEnvironment for Box<T> {
    fn init(&self, statement: &str) -> Result<InitResponse, BackendError> {
        (**self).init(statement)
    }
    fn apply_step(&self, id: u64, t: &str, timeout: Duration) -> Result<StepResponse, BackendError> {
        (**self).apply_step(id, t, timeout)
    }
    fn verify(&self, statement: &str, script: &str) -> Result<VerifyResponse, BackendError> {
        (**self).verify(statement, script)
    }
    fn restart(&self) -> Result<(), BackendError> {
        (**self).restart()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub state: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorResponse {
    pub tactics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticRequest {
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticResponse {
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitRequest {
    pub init: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitResponse {
    pub state_id: u64,
    pub goals: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRequest {
    pub state_id: u64,
    pub tactic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepResponse {
    Ok {
        new_state_id: u64,
        goal_text: String,
        solved: bool,
    },
    Error {
        message: String,
    },
    Timeout {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyPayload {
    pub statement: String,
    pub script: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRequest {
    pub verify: VerifyPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub verified: bool,
    #[serde(default)]
    pub messages: Vec<String>,
}

/// Any message accepted by a JSON-lines service, distinguished by its keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServiceRequest {
    Init(InitRequest),
    Verify(VerifyRequest),
    Step(StepRequest),
    Generate(GeneratorRequest),
    Score(CriticRequest),
}

/// Which service a message is addressed to; selects the HTTP path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Generate,
    Score,
    Env,
}

impl Route {
    pub fn path(self) -> &'static str {
        match self {
            Route::Generate => "/generate",
            Route::Score => "/score",
            Route::Env => "/env",
        }
    }
}

/// One request/response exchange of JSON values.
pub trait Transport: Send + Sync {
    fn call(
        &self,
        route: Route,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<serde_json::Value, BackendError>;

    fn restart(&self) -> Result<(), BackendError> {
        Ok(())
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn call(&self, route: Route, body: &serde_json::Value, timeout: Duration) -> Result<serde_json::Value, BackendError> {
        (**self).call(route, body, timeout)
    }

    fn restart(&self) -> Result<(), BackendError> {
        (**self).restart()
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn call(&self, route: Route, body: &serde_json::Value, timeout: Duration) -> Result<serde_json::Value, BackendError> {
        (**self).call(route, body, timeout)
    }

    fn restart(&self) -> Result<(), BackendError> {
        (**self).restart()
    }
}

/// Generator contract: at most `n` trimmed, newline-free tactics in service
/// order. An empty result is an error.
pub fn generate_tactics(
    generator: &dyn TacticGenerator,
    state_text: &str,
    n: usize,
    seed: Option<u64>,
) -> Result<Vec<String>, BackendError> {
    if n == 0 {
        return Err(BackendError::Malformed("n_samples must be at least 1".into()));
    }
    let raw = generator.generate(state_text, n, seed)?;
    let tactics: Vec<String> = raw.iter().filter_map(|t| normalize_tactic(t)).take(n).collect();
    if tactics.is_empty() {
        return Err(BackendError::Empty);
    }
    Ok(tactics)
}

/// Applies one tactic. The timeout must be positive.
pub fn apply_step(
    env: &dyn ProofEnvironment,
    state_id: u64,
    tactic: &str,
    timeout: Duration,
) -> Result<StepResponse, BackendError> {
    if timeout.is_zero() {
        return Err(BackendError::Malformed("step timeout must be positive".into()));
    }
    env.apply_step(state_id, tactic, timeout)
}

/// Whole-script check. Failures to reach the checker surface as
/// `Unavailable`, which the engine treats as not verified.
pub fn verify_whole_proof(
    env: &dyn ProofEnvironment,
    statement: &str,
    script: &str,
) -> Result<VerifyResponse, BackendError> {
    if script.trim().is_empty() {
        return Err(BackendError::Malformed("script is empty".into()));
    }
    env.verify(statement, script).map_err(|e| match e {
        BackendError::Unavailable(m) => BackendError::Unavailable(m),
        other => BackendError::Unavailable(other.to_string()),
    })
}

/// Critic contract: a finite non-negative distance.
pub fn critic_distance(critic: &dyn Critic, state_text: &str) -> Result<f64, BackendError> {
    let d = critic.distance(state_text)?;
    if !d.is_finite() || d < 0.0 {
        return Err(BackendError::Malformed(format!("critic returned {d}")));
    }
    Ok(d)
}

/// Runs `f`, retrying once on a retryable error.
pub fn with_one_retry<T>(mut f: impl FnMut() -> Result<T, BackendError>) -> Result<T, BackendError> {
    match f() {
        Err(e) if e.is_retryable() => f(),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Canned(Vec<String>);
    impl TacticGenerator for Canned {
        fn generate(&self, _: &str, _: usize, _: Option<u64>) -> Result<Vec<String>, BackendError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn generator_contract_trims_and_truncates() {
        let g = Canned(vec!["  simp ".into(), "".into(), "a\nb".into(), "ring".into(), "exact h".into()]);
        assert_eq!(generate_tactics(&g, "⊢ P", 2, None).unwrap(), ["simp", "ring"]);
        let empty = Canned(vec![" ".into()]);
        assert_eq!(generate_tactics(&empty, "⊢ P", 4, None), Err(BackendError::Empty));
    }

    #[test]
    fn wire_shapes() {
        let ok = StepResponse::Ok {
            new_state_id: 3,
            goal_text: "⊢ Q".into(),
            solved: false,
        };
        assert_eq!(
            serde_json::to_string(&ok).unwrap(),
            r#"{"ok":{"new_state_id":3,"goal_text":"⊢ Q","solved":false}}"#
        );
        assert_eq!(serde_json::to_string(&StepResponse::Timeout {}).unwrap(), r#"{"timeout":{}}"#);
        let req: ServiceRequest = serde_json::from_str(r#"{"state_id":0,"tactic":"simp"}"#).unwrap();
        assert!(matches!(req, ServiceRequest::Step(_)));
        let req: ServiceRequest = serde_json::from_str(r#"{"init":"⊢ P"}"#).unwrap();
        assert!(matches!(req, ServiceRequest::Init(_)));
        let req: ServiceRequest =
            serde_json::from_str(r#"{"verify":{"statement":"s","script":"x"}}"#).unwrap();
        assert!(matches!(req, ServiceRequest::Verify(_)));
        let req: ServiceRequest = serde_json::from_str(r#"{"state":"⊢ P","n":4}"#).unwrap();
        assert!(matches!(req, ServiceRequest::Generate(_)));
        let req: ServiceRequest = serde_json::from_str(r#"{"state":"⊢ P"}"#).unwrap();
        assert!(matches!(req, ServiceRequest::Score(_)));
    }

    #[test]
    fn retry_once_only() {
        let mut calls = 0;
        let r: Result<(), _> = with_one_retry(|| {
            calls += 1;
            Err(BackendError::Transport("x".into()))
        });
        assert!(r.is_err());
        assert_eq!(calls, 2);
        let mut calls = 0;
        let _: Result<(), _> = with_one_retry(|| {
            calls += 1;
            Err(BackendError::Empty)
        });
        assert_eq!(calls, 1);
    }
}
