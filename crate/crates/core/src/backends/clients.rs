use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    BackendError, Critic, CriticRequest, CriticResponse, GeneratorRequest, GeneratorResponse,
    InitRequest, InitResponse, ProofEnvironment, Route, StepRequest, StepResponse,
    TacticGenerator, Transport, VerifyPayload, VerifyRequest, VerifyResponse,
};

fn exchange<Req: Serialize, Resp: DeserializeOwned>(
    transport: &dyn Transport,
    route: Route,
    req: &Req,
    timeout: Duration,
) -> Result<Resp, BackendError> {
    let body = serde_json::to_value(req).map_err(|e| BackendError::Malformed(e.to_string()))?;
    let value = transport.call(route, &body, timeout)?;
    serde_json::from_value(value).map_err(|e| BackendError::Malformed(e.to_string()))
}

/// Like `exchange`, but a `{"error": {"message": ..}}` reply becomes
/// `Unavailable` instead of a schema mismatch.
fn request<Req: Serialize, Resp: DeserializeOwned>(
    transport: &dyn Transport,
    route: Route,
    req: &Req,
    timeout: Duration,
) -> Result<Resp, BackendError> {
    let value: serde_json::Value = exchange(transport, route, req, timeout)?;
    if let Some(err) = value.get("error") {
        let msg = err.get("message").and_then(|m| m.as_str()).unwrap_or("unspecified error");
        return Err(BackendError::Unavailable(msg.to_string()));
    }
    serde_json::from_value(value).map_err(|e| BackendError::Malformed(e.to_string()))
}

pub struct GeneratorClient<T> {
    transport: T,
    timeout: Duration,
}

impl<T: Transport> GeneratorClient<T> {
    pub fn new(transport: T, timeout: Duration) -> Self {
        GeneratorClient { transport, timeout }
    }
}

impl<T: Transport> TacticGenerator for GeneratorClient<T> {
    fn generate(&self, state: &str, n: usize, seed: Option<u64>) -> Result<Vec<String>, BackendError> {
        let req = GeneratorRequest {
            state: state.to_string(),
            n,
            seed,
        };
        let resp: GeneratorResponse = request(&self.transport, Route::Generate, &req, self.timeout)?;
        Ok(resp.tactics)
    }
}

pub struct CriticClient<T> {
    transport: T,
    timeout: Duration,
}

impl<T: Transport> CriticClient<T> {
    pub fn new(transport: T, timeout: Duration) -> Self {
        CriticClient { transport, timeout }
    }
}

impl<T: Transport> Critic for CriticClient<T> {
    fn distance(&self, state: &str) -> Result<f64, BackendError> {
        let req = CriticRequest {
            state: state.to_string(),
        };
        let resp: CriticResponse = request(&self.transport, Route::Score, &req, self.timeout)?;
        if !resp.distance.is_finite() || resp.distance < 0.0 {
            return Err(BackendError::Malformed(format!("distance {}", resp.distance)));
        }
        Ok(resp.distance)
    }
}

/// Stepwise environment over a transport. One client is one session.
pub struct EnvironmentClient<T> {
    transport: T,
    /// Budget for init and verification calls.
    pub control_timeout: Duration,
    /// Extra wait past a step's own timeout before giving up on the reply.
    pub grace: Duration,
}

impl<T: Transport> EnvironmentClient<T> {
    pub fn new(transport: T, control_timeout: Duration, grace: Duration) -> Self {
        EnvironmentClient {
            transport,
            control_timeout,
            grace,
        }
    }
}

impl<T: Transport> ProofEnvironment for EnvironmentClient<T> {
    fn init(&self, statement: &str) -> Result<InitResponse, BackendError> {
        let req = InitRequest {
            init: statement.to_string(),
        };
        request(&self.transport, Route::Env, &req, self.control_timeout)
    }

    fn apply_step(&self, state_id: u64, tactic: &str, timeout: Duration) -> Result<StepResponse, BackendError> {
        let req = StepRequest {
            state_id,
            tactic: tactic.to_string(),
        };
        match exchange(&self.transport, Route::Env, &req, timeout + self.grace) {
            Err(BackendError::Timeout(_)) => Ok(StepResponse::Timeout {}),
            other => other,
        }
    }

    fn verify(&self, statement: &str, script: &str) -> Result<VerifyResponse, BackendError> {
        let req = VerifyRequest {
            verify: VerifyPayload {
                statement: statement.to_string(),
                script: script.to_string(),
            },
        };
        request(&self.transport, Route::Env, &req, self.control_timeout)
    }

    fn restart(&self) -> Result<(), BackendError> {
        self.transport.restart()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;
    use std::sync::Mutex;

    use serde_json::{json, Value};

    use super::*;

    /// Replays canned replies and records what was sent.
    #[derive(Default)]
    struct Scripted {
        replies: Mutex<VecDeque<Result<Value, BackendError>>>,
        sent: Mutex<Vec<(Route, Value, Duration)>>,
    }

    impl Scripted {
        fn new(replies: Vec<Result<Value, BackendError>>) -> Self {
            Scripted {
                replies: Mutex::new(replies.into()),
                sent: Mutex::default(),
            }
        }
    }

    impl Transport for Scripted {
        fn call(&self, route: Route, body: &Value, timeout: Duration) -> Result<Value, BackendError> {
            self.sent.lock().unwrap().push((route, body.clone(), timeout));
            self.replies.lock().unwrap().pop_front().unwrap_or(Err(BackendError::Empty))
        }
    }

    const T: Duration = Duration::from_secs(5);

    #[test]
    fn generator_request_shape() {
        let s = Scripted::new(vec![Ok(json!({"tactics": ["simp", "ring"]}))]);
        let g = GeneratorClient::new(&s, T);
        assert_eq!(g.generate("⊢ x", 8, Some(3)).unwrap(), vec!["simp", "ring"]);
        let sent = s.sent.lock().unwrap();
        assert_eq!(sent[0].0, Route::Generate);
        assert_eq!(sent[0].1, json!({"state": "⊢ x", "n": 8, "seed": 3}));
    }

    #[test]
    fn malformed_replies_are_typed() {
        let s = Scripted::new(vec![Ok(json!({"tactic": "simp"})), Ok(json!({"distance": -1.0}))]);
        assert!(matches!(
            GeneratorClient::new(&s, T).generate("g", 1, None),
            Err(BackendError::Malformed(_))
        ));
        assert!(matches!(CriticClient::new(&s, T).distance("g"), Err(BackendError::Malformed(_))));
    }

    #[test]
    fn step_replies_and_timeout_mapping() {
        let grace = Duration::from_millis(250);
        let s = Scripted::new(vec![
            Ok(json!({"ok": {"new_state_id": 7, "goal_text": "⊢ b", "solved": false}})),
            Ok(json!({"error": {"message": "unknown identifier"}})),
            Err(BackendError::Timeout(T)),
            Ok(json!({"timeout": {}})),
        ]);
        let env = EnvironmentClient::new(&s, T, grace);
        let step = Duration::from_secs(60);
        assert_eq!(
            env.apply_step(1, "simp", step).unwrap(),
            StepResponse::Ok {
                new_state_id: 7,
                goal_text: "⊢ b".into(),
                solved: false
            }
        );
        assert!(matches!(env.apply_step(1, "bad", step).unwrap(), StepResponse::Error { .. }));
        assert_eq!(env.apply_step(1, "slow", step).unwrap(), StepResponse::Timeout {});
        assert_eq!(env.apply_step(1, "slow", step).unwrap(), StepResponse::Timeout {});
        let sent = s.sent.lock().unwrap();
        assert_eq!(sent[0].1, json!({"state_id": 1, "tactic": "simp"}));
        assert_eq!(sent[0].2, step + grace);
    }

    #[test]
    fn service_errors_are_unavailable() {
        let s = Scripted::new(vec![Ok(json!({"error": {"message": "model offline"}}))]);
        assert_eq!(
            GeneratorClient::new(&s, T).generate("g", 1, None),
            Err(BackendError::Unavailable("model offline".into()))
        );
    }

    #[test]
    fn init_and_verify_shapes() {
        let s = Scripted::new(vec![
            Ok(json!({"state_id": 0, "goals": "⊢ p"})),
            Ok(json!({"verified": false, "messages": ["unsolved goals"]})),
        ]);
        let env = EnvironmentClient::new(&s, T, Duration::ZERO);
        assert_eq!(env.init("theorem t : p").unwrap().goals, "⊢ p");
        let v = env.verify("theorem t : p", "simp").unwrap();
        assert!(!v.verified);
        let sent = s.sent.lock().unwrap();
        assert_eq!(sent[0].1, json!({"init": "theorem t : p"}));
        assert_eq!(sent[1].1, json!({"verify": {"statement": "theorem t : p", "script": "simp"}}));
    }
}
