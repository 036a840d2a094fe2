//! End-to-end checks of the command-line binary: reports, determinism, and
//! exit codes.

use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sharpbounds"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_problem(content: &str) -> tempfile::NamedTempFile {
    let mut file = tempfile::NamedTempFile::new().expect("temp file");
    file.write_all(content.as_bytes()).expect("write");
    file
}

fn json_of(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

#[test]
fn bound_subcommand_reports_and_is_deterministic() {
    let file = write_problem(
        r#"{"marginals": ["1/2", "3/5", "7/10"],
            "query": {"kind": "at_least", "k": 2, "direction": "upper"}}"#,
    );
    let path = file.path().to_str().unwrap();
    let a = run(&["bound", "-i", path, "--distribution"]);
    let b = run(&["bound", "-i", path, "--distribution"]);
    assert_eq!(a.stdout, b.stdout, "reports must be byte-identical");
    let report = json_of(&a);
    assert_eq!(report["bound"], "9/10");
    assert_eq!(report["r_star"], 0);
    assert_eq!(report["achieved"], "9/10");
}

#[test]
fn bound_emits_atoms_in_caller_order() {
    let file = write_problem(
        r#"{"marginals": ["1/10", "2/10", "9/10"],
            "query": {"kind": "at_least", "k": 2, "direction": "upper"}}"#,
    );
    let report = json_of(&run(&[
        "bound",
        "-i",
        file.path().to_str().unwrap(),
        "--distribution",
    ]));
    let atoms = report["atoms"].as_object().unwrap();
    assert_eq!(atoms["101"], "1/10");
    assert_eq!(atoms["011"], "1/5");
    assert_eq!(atoms["001"], "3/5");
    assert_eq!(atoms["000"], "1/10");
}

#[test]
fn oracle_reports_infeasible_as_status() {
    let file = write_problem(
        r#"{"marginals": ["3/10", "3/5"],
            "event": {"kind": "words", "words": ["11"], "direction": "maximize"},
            "constraints": [{"words": ["11"], "relation": "eq", "value": "1/2"}]}"#,
    );
    let output = run(&["oracle", "-i", file.path().to_str().unwrap()]);
    let report = json_of(&output);
    assert_eq!(report["status"], "infeasible");
}

#[test]
fn oracle_emits_optimizer_and_dominating_indices() {
    let file = write_problem(
        r#"{"marginals": ["1/10", "2/10", "9/10"],
            "event": {"kind": "at_least", "k": 2, "direction": "maximize"}}"#,
    );
    let report = json_of(&run(&[
        "oracle",
        "-i",
        file.path().to_str().unwrap(),
        "--emit-optimizer",
    ]));
    assert_eq!(report["value"], "3/10");
    assert_eq!(report["dominating_indices"], serde_json::json!([3]));
}

#[test]
fn exclusive_subcommand() {
    let file = write_problem(r#"{"sets": [["3/10", "7/10"], ["1/5"]]}"#);
    let report = json_of(&run(&["exclusive", "-i", file.path().to_str().unwrap()]));
    assert_eq!(report["bound"], "1/2");
    assert_eq!(report["t_star"], "0");
    assert_eq!(report["weaker_bound"], "1/2");
}

#[test]
fn policy_subcommand() {
    let file = write_problem(
        r#"{"marginals": ["1/2", "3/5", "7/10"],
            "query": {"kind": "at_least", "k": 2, "direction": "upper"}}"#,
    );
    let report = json_of(&run(&["policy", "-i", file.path().to_str().unwrap()]));
    assert!(report["move_count"].as_u64().unwrap() <= 4);
    assert_eq!(report["total_reward"], "9/10");
    let moves = report["moves"].as_array().unwrap();
    assert_eq!(moves.last().unwrap()["cumulative"], "9/10");
}

#[test]
fn sweep_subcommand() {
    let file = write_problem(r#"{"marginals": ["1/2", "3/5", "7/10"]}"#);
    let report = json_of(&run(&[
        "sweep",
        "-i",
        file.path().to_str().unwrap(),
        "--kind",
        "at_least",
        "--direction",
        "upper",
    ]));
    let bounds: Vec<&str> = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["bound"].as_str().unwrap())
        .collect();
    assert_eq!(bounds, ["1", "9/10", "1/2"]);
    assert!(report["inequality_evaluations"].as_u64().unwrap() <= 3);
}

#[test]
fn verify_subcommand_exits_zero_on_clean_run() {
    let output = run(&["verify", "--n-max", "3", "--trials", "4", "--seed", "9"]);
    let report = json_of(&output);
    assert_eq!(report["mismatches_total"], 0);
}

#[test]
fn verify_standard_campaign_is_clean() {
    let output = run(&["verify", "--n-max", "6", "--trials", "50", "--seed", "42"]);
    let report = json_of(&output);
    assert_eq!(report["mismatches_total"], 0);
    assert!(report["categories"]["bounds"]["checked"].as_u64().unwrap() > 500);
    let brute = report["categories"]["simplex_bruteforce"]["checked"].as_u64().unwrap();
    assert!(brute > 0, "small-n trials must cross-check the simplex");
}

#[test]
fn input_errors_exit_with_code_two() {
    let file = write_problem(
        r#"{"marginals": ["3/2"], "query": {"kind": "at_least", "k": 1, "direction": "upper"}}"#,
    );
    let output = run(&["bound", "-i", file.path().to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());

    let output = run(&["bound", "-i", "/nonexistent/problem.json"]);
    assert_eq!(output.status.code(), Some(2));

    let file = write_problem(
        r#"{"marginals": ["1/2"], "query": {"kind": "at_least", "k": 7, "direction": "upper"}}"#,
    );
    let output = run(&["bound", "-i", file.path().to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}
