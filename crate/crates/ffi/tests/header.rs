//! Compiles a C program against the generated header and the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mps.h")).unwrap();
    for symbol in [
        "mps_last_error",
        "mps_string_free",
        "mps_compute_budget",
        "mps_parse_budget",
        "mps_tactic_score",
        "mps_world_from_json",
        "mps_world_load",
        "mps_world_generate",
        "mps_world_trap",
        "mps_world_free",
        "mps_search_world",
        "mps_report_solved",
        "mps_report_kind",
        "mps_report_to_json",
        "mps_report_free",
        "mps_curate_jsonl",
        "mps_analyze_jsonl",
        "typedef struct MpsWorld MpsWorld",
        "MPS_STATUS_OK = 0",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
}

#[test]
fn c_program_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libmps_ffi.a");
    assert!(lib.exists(), "{} was not built", lib.display());
    let out = std::env::temp_dir().join(format!("mps_ffi_smoke_{}", std::process::id()));
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("C compiler runs");
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
