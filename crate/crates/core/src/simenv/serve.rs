use std::io::{BufRead, Write};
use std::time::Duration;

use serde_json::json;

use crate::backends::{
    BackendError, Critic, GeneratorResponse, ProofEnvironment, ServiceRequest, TacticGenerator,
};

/// Answers one JSON request per input line with one JSON reply per output
/// line, dispatching on the request's keys. Runs until end of input.
pub fn serve_jsonl<R: BufRead, W: Write>(
    env: &dyn ProofEnvironment,
    generator: &dyn TacticGenerator,
    critic: &dyn Critic,
    input: R,
    mut output: W,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<ServiceRequest>(&line) {
            Ok(req) => handle(env, generator, critic, req),
            Err(e) => json!({ "error": { "message": format!("bad request: {e}") } }),
        };
        serde_json::to_writer(&mut output, &reply)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

fn error_reply(e: BackendError) -> serde_json::Value {
    json!({ "error": { "message": e.to_string() } })
}

pub fn handle(
    env: &dyn ProofEnvironment,
    generator: &dyn TacticGenerator,
    critic: &dyn Critic,
    req: ServiceRequest,
) -> serde_json::Value {
    let to_value = |r: Result<serde_json::Value, BackendError>| r.unwrap_or_else(error_reply);
    match req {
        ServiceRequest::Init(r) => to_value(env.init(&r.init).map(|v| json!(v))),
        ServiceRequest::Step(r) => {
            to_value(env.apply_step(r.state_id, &r.tactic, Duration::from_secs(60)).map(|v| json!(v)))
        }
        ServiceRequest::Verify(r) => {
            to_value(env.verify(&r.verify.statement, &r.verify.script).map(|v| json!(v)))
        }
        ServiceRequest::Generate(r) => to_value(generator.generate(&r.state, r.n, r.seed).map(|tactics| {
            json!(GeneratorResponse {
                tactics,
                scores: None
            })
        })),
        ServiceRequest::Score(r) => to_value(critic.distance(&r.state).map(|d| json!({ "distance": d }))),
    }
}
