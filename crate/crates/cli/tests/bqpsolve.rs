use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bqpsolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bqpsolve")).args(args).output().expect("spawn bqpsolve")
}

fn run_json(args: &[&str]) -> (i32, Value, String) {
    let out = bqpsolve(args);
    let text = String::from_utf8(out.stdout).unwrap();
    let json: Value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
    (out.status.code().unwrap(), json, text)
}

#[test]
fn maxcut_k3() {
    let input = fixture("k3.txt");
    let (code, json, _) = run_json(&["--mode", "maxcut", "--input", input.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(json["status"], "optimal");
    assert_eq!(json["value"], 2);
    assert_eq!(json["nodes"], 1);
    assert_eq!(json["sigma"], Value::Null);
    assert_eq!(json["solution"].as_array().unwrap().len(), 3);
}

#[test]
fn dks_k4_reports_subgraph_weight() {
    let input = fixture("k4.txt");
    let (code, json, _) = run_json(&["--mode", "dks", "--k", "3", "--input", input.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(json["status"], "optimal");
    assert_eq!(json["value"], 3);
    let ones = json["solution"].as_array().unwrap().iter().filter(|v| v.as_i64() == Some(1)).count();
    assert_eq!(ones, 3);
    assert!(json["sigma"].as_f64().unwrap() > 0.0);
}

#[test]
fn bqp_verdicts() {
    for name in ["infeasible_bqp.txt", "parity_bqp.txt"] {
        let input = fixture(name);
        let (code, json, _) = run_json(&["--mode", "bqp", "--input", input.to_str().unwrap()]);
        assert_eq!(code, 0, "{name}");
        assert_eq!(json["status"], "infeasible", "{name}");
        assert_eq!(json["value"], Value::Null);
    }
    let input = fixture("small_bqp.txt");
    let (code, json, _) = run_json(&["--mode", "bqp", "--input", input.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(json["status"], "optimal");
    assert_eq!(json["value"], -1);
    assert_eq!(json["exactness"], "exact");
    assert_eq!(json["epsilon"], 1);
    let (u, l) = (json["u_tilde"].as_f64().unwrap(), json["l_tilde"].as_f64().unwrap());
    assert!(l <= -1.0 && -1.0 <= u);
    assert_eq!(json["rho"].as_f64().unwrap(), u);
}

#[test]
fn repeated_runs_are_identical_apart_from_timing() {
    let input = fixture("small_bqp.txt");
    let args = ["--mode", "bqp", "--seed", "9", "--input", input.to_str().unwrap()];
    let strip = |s: &str| s.lines().filter(|l| !l.contains("wall_seconds")).collect::<Vec<_>>().join("\n");
    let (_, _, a) = run_json(&args);
    let (_, _, b) = run_json(&args);
    assert_eq!(strip(&a), strip(&b));
    let k4 = fixture("k4.txt");
    let args = ["--mode", "maxcut", "--seed", "3", "--input", k4.to_str().unwrap()];
    assert_eq!(strip(&run_json(&args).2), strip(&run_json(&args).2));
}

#[test]
fn output_and_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let trace = dir.path().join("trace.csv");
    let input = fixture("k4.txt");
    let out = bqpsolve(&[
        "--mode",
        "maxcut",
        "--input",
        input.to_str().unwrap(),
        "--output",
        report.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("status          optimal"));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["value"], 4);
    assert_eq!(json["workers"], 2);
    assert!(std::fs::read_to_string(&trace).unwrap().starts_with("id,depth"));
}

#[test]
fn input_errors_exit_with_one() {
    let dup = fixture("duplicate_edge.txt");
    let out = bqpsolve(&["--mode", "maxcut", "--input", dup.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 3"));

    let out = bqpsolve(&["--mode", "maxcut", "--input", "/nonexistent/graph.txt"]);
    assert_eq!(out.status.code(), Some(1));

    let k4 = fixture("k4.txt");
    let out = bqpsolve(&["--mode", "dks", "--input", k4.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = bqpsolve(&["--mode", "dks", "--k", "9", "--input", k4.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = bqpsolve(&["--mode", "maxcut", "--workers", "0", "--input", k4.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = bqpsolve(&["--mode", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(bqpsolve(&["--help"]).status.code(), Some(0));
}

#[test]
fn timeout_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    let w = bqp_core::io::gen_random_graph(40, 0.8, (-10, 10), 1);
    std::fs::write(&path, bqp_core::io::write_graph(&w)).unwrap();
    let (code, json, _) = run_json(&["--mode", "maxcut", "--time-limit", "0", "--input", path.to_str().unwrap()]);
    if json["nodes"].as_u64().unwrap() > 1 {
        assert_eq!(code, 2);
        assert_eq!(json["status"], "unproven-timeout");
        assert!(json["root_bound"].as_f64().unwrap() >= json["value"].as_f64().unwrap());
    } else {
        assert_eq!(code, 0);
    }
}
