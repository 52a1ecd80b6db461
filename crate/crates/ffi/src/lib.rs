//! C ABI over `mps-core`.
//!
//! Every fallible function returns an [`MpsStatus`] and writes results through
//! out-pointers. On failure, [`mps_last_error`] describes the error for the
//! calling thread. Handles are opaque and released with their `_free`
//! function; strings returned by the library are released with
//! [`mps_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use mps_core::analytics::{corpus_report, load_proofs, Normalization, StepCounting};
use mps_core::curation::{curate_jsonl, write_pairs, CurationConfig};
use mps_core::engine::{run_pass_at_k, NullTrace, PassReport, SearchConfig};
use mps_core::perspectives::tactic_effectiveness_score;
use mps_core::proof::{compute_budget, BudgetSpec, OutcomeKind};
use mps_core::simenv::{
    generate_world, trap_world, CriticKind, ProofWorld, SimBackends, TrapKind, WorldGenSpec,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Backend = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpsOutcomeKind {
    Solved = 0,
    Unverified = 1,
    Exhausted = 2,
    IterationCap = 3,
    Timeout = 4,
    /// No pass produced an outcome.
    None = 5,
}

impl From<OutcomeKind> for MpsOutcomeKind {
    fn from(k: OutcomeKind) -> Self {
        match k {
            OutcomeKind::Solved => MpsOutcomeKind::Solved,
            OutcomeKind::Unverified => MpsOutcomeKind::Unverified,
            OutcomeKind::Exhausted => MpsOutcomeKind::Exhausted,
            OutcomeKind::IterationCap => MpsOutcomeKind::IterationCap,
            OutcomeKind::Timeout => MpsOutcomeKind::Timeout,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpsTrapKind {
    TacticScore = 0,
    CaseCount = 1,
    StateLength = 2,
}

/// Opaque simulated proof world.
pub struct MpsWorld(Arc<ProofWorld>);

/// Opaque pass@k result for one theorem.
pub struct MpsReport(PassReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(MpsStatus, String);

impl Fail {
    fn invalid(msg: impl std::fmt::Display) -> Self {
        Fail(MpsStatus::InvalidArgument, msg.to_string())
    }
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MpsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MpsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MpsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(MpsStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MpsStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(MpsStatus::NullPointer, format!("{name} is null")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(MpsStatus::NullPointer, format!("{name} is null")))
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

fn json_or_default<T: serde::de::DeserializeOwned + Default>(text: Option<&str>) -> Result<T, Fail> {
    match text.map(str::trim) {
        None | Some("") => Ok(T::default()),
        Some(t) => serde_json::from_str(t).map_err(Fail::invalid),
    }
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next library call on the same thread.
#[no_mangle]
pub extern "C" fn mps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Total explored-candidate budget of the four factors.
///
/// # Safety
/// `out_total` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mps_compute_budget(
    n_pass: u64,
    n_perspectives: u64,
    n_max_iter: u64,
    n_samples: u64,
    out_total: *mut u64,
) -> MpsStatus {
    guard(|| {
        let out = out_arg(out_total, "out_total")?;
        let spec = BudgetSpec::new(n_pass, n_perspectives, n_max_iter, n_samples);
        *out = compute_budget(&spec).map_err(Fail::invalid)?;
        Ok(())
    })
}

/// Parses budget notation such as `64x4x800x8` and writes its total.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out_total` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mps_parse_budget(spec: *const c_char, out_total: *mut u64) -> MpsStatus {
    guard(|| {
        let spec: BudgetSpec = str_arg(spec, "spec")?.parse().map_err(Fail::invalid)?;
        *out_arg(out_total, "out_total")? = compute_budget(&spec).map_err(Fail::invalid)?;
        Ok(())
    })
}

/// Effectiveness score (0 to 6) of a tactic under the default table.
///
/// # Safety
/// `tactic` must be a NUL-terminated string and `out_score` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mps_tactic_score(tactic: *const c_char, out_score: *mut u8) -> MpsStatus {
    guard(|| {
        let t = str_arg(tactic, "tactic")?;
        *out_arg(out_score, "out_score")? = tactic_effectiveness_score(t);
        Ok(())
    })
}

/// Parses a world from its JSON file format.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_world` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mps_world_from_json(json: *const c_char, out_world: *mut *mut MpsWorld) -> MpsStatus {
    guard(|| {
        let out = out_arg(out_world, "out_world")?;
        let world = ProofWorld::from_json(str_arg(json, "json")?).map_err(Fail::invalid)?;
        *out = Box::into_raw(Box::new(MpsWorld(Arc::new(world))));
        Ok(())
    })
}

/// Loads a world file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_world` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mps_world_load(path: *const c_char, out_world: *mut *mut MpsWorld) -> MpsStatus {
    guard(|| {
        let out = out_arg(out_world, "out_world")?;
        let path = str_arg(path, "path")?;
        let world = mps_core::simenv::load_world(path.as_ref()).map_err(|e| Fail(MpsStatus::Io, e.to_string()))?;
        *out = Box::into_raw(Box::new(MpsWorld(Arc::new(world))));
        Ok(())
    })
}

/// Generates a random world.
///
/// # Safety
/// `out_world` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mps_world_generate(
    n_states: usize,
    branching: usize,
    solve_depth: usize,
    trap_fraction: f64,
    noop_fraction: f64,
    seed: u64,
    out_world: *mut *mut MpsWorld,
) -> MpsStatus {
    guard(|| {
        let out = out_arg(out_world, "out_world")?;
        let spec = WorldGenSpec {
            n_states,
            branching,
            solve_depth,
            trap_fraction,
            noop_fraction,
            seed,
        };
        let world = generate_world(&spec).map_err(Fail::invalid)?;
        *out = Box::into_raw(Box::new(MpsWorld(Arc::new(world))));
        Ok(())
    })
}

/// Builds a trap world where only one heuristic can follow the proof.
///
/// # Safety
/// `out_world` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mps_world_trap(kind: MpsTrapKind, seed: u64, out_world: *mut *mut MpsWorld) -> MpsStatus {
    guard(|| {
        let out = out_arg(out_world, "out_world")?;
        let kind = match kind {
            MpsTrapKind::TacticScore => TrapKind::TacticScore,
            MpsTrapKind::CaseCount => TrapKind::CaseCount,
            MpsTrapKind::StateLength => TrapKind::StateLength,
        };
        *out = Box::into_raw(Box::new(MpsWorld(Arc::new(trap_world(kind, seed)))));
        Ok(())
    })
}

/// Length of the shortest proof, or -1 when the root cannot be solved.
///
/// # Safety
/// `world` must be a live handle and `out_depth` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mps_world_shortest_proof(world: *const MpsWorld, out_depth: *mut i64) -> MpsStatus {
    guard(|| {
        let w = &handle(world, "world")?.0;
        *out_arg(out_depth, "out_depth")? = w.distance_to_solved(w.root()).map_or(-1, |d| d as i64);
        Ok(())
    })
}

/// Releases a world. Null is ignored.
///
/// # Safety
/// `world` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mps_world_free(world: *mut MpsWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Runs pass@k search on a simulated world.
///
/// `critic` is `oracle`, `trap` or `noisy:<amplitude>`; null means oracle.
/// `config_json` is a search configuration object; null or empty means
/// defaults. Searches that end unsolved still return `MPS_STATUS_OK`.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `world` must be a live
/// handle and `out_report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mps_search_world(
    world: *const MpsWorld,
    critic: *const c_char,
    config_json: *const c_char,
    out_report: *mut *mut MpsReport,
) -> MpsStatus {
    guard(|| {
        let out = out_arg(out_report, "out_report")?;
        let w = handle(world, "world")?.0.clone();
        let critic: CriticKind = if critic.is_null() {
            CriticKind::Oracle
        } else {
            str_arg(critic, "critic")?.parse().map_err(Fail::invalid)?
        };
        let cfg_text = if config_json.is_null() {
            None
        } else {
            Some(str_arg(config_json, "config_json")?)
        };
        let config: SearchConfig = json_or_default(cfg_text)?;
        config.validate().map_err(Fail::invalid)?;
        let sim = SimBackends::new(w, critic);
        let report = run_pass_at_k(&sim.theorem(), sim.backends(), &config, &mut NullTrace);
        if report.outcomes.is_empty() && !report.errors.is_empty() {
            return Err(Fail(MpsStatus::Backend, report.errors.join("; ")));
        }
        *out = Box::into_raw(Box::new(MpsReport(report)));
        Ok(())
    })
}

/// Whether any pass solved the theorem.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mps_report_solved(report: *const MpsReport) -> bool {
    report.as_ref().is_some_and(|r| r.0.solved_any)
}

/// Kind of the last pass's outcome.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mps_report_kind(report: *const MpsReport) -> MpsOutcomeKind {
    report
        .as_ref()
        .and_then(|r| r.0.outcomes.last())
        .map_or(MpsOutcomeKind::None, |o| o.kind.into())
}

/// Candidates explored over all passes.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mps_report_candidates(report: *const MpsReport) -> u64 {
    report.as_ref().map_or(0, |r| r.0.total_candidates)
}

/// Number of steps in the verified proof, 0 when unsolved.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mps_report_proof_len(report: *const MpsReport) -> usize {
    report.as_ref().and_then(|r| r.0.proof()).map_or(0, |p| p.len())
}

/// Tactic of proof step `index` as a new string, or null when out of range.
///
/// # Safety
/// `report` must be a live handle. Free the result with `mps_string_free`.
#[no_mangle]
pub unsafe extern "C" fn mps_report_tactic(report: *const MpsReport, index: usize) -> *mut c_char {
    report
        .as_ref()
        .and_then(|r| r.0.proof())
        .and_then(|p| p.steps.get(index))
        .map_or(ptr::null_mut(), |s| c_string(s.tactic.clone()))
}

/// The full report as JSON.
///
/// # Safety
/// `report` must be a live handle and `out_json` a valid pointer. Free the
/// result with `mps_string_free`.
#[no_mangle]
pub unsafe extern "C" fn mps_report_to_json(report: *const MpsReport, out_json: *mut *mut c_char) -> MpsStatus {
    guard(|| {
        let r = handle(report, "report")?;
        let text = serde_json::to_string(&r.0).map_err(Fail::invalid)?;
        *out_arg(out_json, "out_json")? = c_string(text);
        Ok(())
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mps_report_free(report: *mut MpsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Curates a ProofRecord JSONL corpus held in memory.
///
/// Writes the (state, step) pairs as JSONL and the curation report as JSON.
/// `config_json` may be null for defaults.
///
/// # Safety
/// String arguments must be null or NUL-terminated; out-pointers must be
/// valid. Free both results with `mps_string_free`.
#[no_mangle]
pub unsafe extern "C" fn mps_curate_jsonl(
    corpus_jsonl: *const c_char,
    config_json: *const c_char,
    out_pairs_jsonl: *mut *mut c_char,
    out_report_json: *mut *mut c_char,
) -> MpsStatus {
    guard(|| {
        let corpus = str_arg(corpus_jsonl, "corpus_jsonl")?;
        let cfg_text = if config_json.is_null() {
            None
        } else {
            Some(str_arg(config_json, "config_json")?)
        };
        let config: CurationConfig = json_or_default(cfg_text)?;
        let pairs_out = out_arg(out_pairs_jsonl, "out_pairs_jsonl")?;
        let report_out = out_arg(out_report_json, "out_report_json")?;
        let (kept, report) = curate_jsonl(corpus.as_bytes(), &config).map_err(Fail::invalid)?;
        let mut pairs = Vec::new();
        write_pairs(&kept, &mut pairs).map_err(Fail::invalid)?;
        let pairs = String::from_utf8(pairs).map_err(Fail::invalid)?;
        let report = serde_json::to_string(&report).map_err(Fail::invalid)?;
        *pairs_out = c_string(pairs);
        *report_out = c_string(report);
        Ok(())
    })
}

/// Length and diversity report of an in-memory proof corpus as JSON.
///
/// `normalization` is `head_token` or `full_text`, `step_counting` is
/// `lines` or `expand_chains`; null selects the first of each.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out_json` must be
/// valid. Free the result with `mps_string_free`.
#[no_mangle]
pub unsafe extern "C" fn mps_analyze_jsonl(
    corpus_jsonl: *const c_char,
    normalization: *const c_char,
    step_counting: *const c_char,
    out_json: *mut *mut c_char,
) -> MpsStatus {
    guard(|| {
        let corpus = str_arg(corpus_jsonl, "corpus_jsonl")?;
        let norm: Normalization = if normalization.is_null() {
            Normalization::default()
        } else {
            str_arg(normalization, "normalization")?.parse().map_err(Fail::invalid)?
        };
        let mode: StepCounting = if step_counting.is_null() {
            StepCounting::default()
        } else {
            str_arg(step_counting, "step_counting")?.parse().map_err(Fail::invalid)?
        };
        let out = out_arg(out_json, "out_json")?;
        let loaded = load_proofs(corpus.as_bytes(), mode).map_err(Fail::invalid)?;
        let report = corpus_report("corpus", &loaded, norm).map_err(Fail::invalid)?;
        *out = c_string(serde_json::to_string(&report).map_err(Fail::invalid)?);
        Ok(())
    })
}
