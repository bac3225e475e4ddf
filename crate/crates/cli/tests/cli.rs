use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn slinlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slinlab")).args(args).env_remove("SLINLAB_WORKERS").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn passing_check_exits_zero() {
    let o = slinlab(&["check", "--program", "maxRegisterFA", "--n", "2", "--ops", "1"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("all properties hold"));
}

#[test]
fn failing_check_exits_one_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = slinlab(&[
        "check",
        "--program",
        "collectCounter",
        "--workload",
        "negwitness",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["items"].as_array().unwrap().len(), 1);
    assert!(r["items"][0]["failures"].as_array().unwrap().iter().any(|f| f == "strongLinearizable"));
}

#[test]
fn oversized_family_exits_two() {
    let o = slinlab(&["check", "--program", "readableTAS", "--n", "9", "--ops", "9"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_exit_sixty_four() {
    assert_eq!(code(&slinlab(&["check", "--program", "noSuchThing"])), 64);
    assert_eq!(code(&slinlab(&["check", "--program", "readableTAS", "--bogus"])), 64);
    assert_eq!(code(&slinlab(&["check"])), 64);
    assert_eq!(code(&slinlab(&["agreement", "--object", "heap"])), 64);
    assert_eq!(code(&slinlab(&["agreement", "--n", "1"])), 64);
    assert_eq!(code(&slinlab(&["replay", "/definitely/not/here.json"])), 64);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&slinlab(&["--help"])), 0);
    assert_eq!(code(&slinlab(&["--version"])), 0);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "program = \"fetchIncFromTAS\"\nn = 3\nops = 1\ncrashBudget = 0\n").unwrap();
    let report = dir.path().join("r.json");
    let o = slinlab(&["check", "--config", cfg.to_str().unwrap(), "--n", "2", "--report", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["config"]["program"], "fetchIncFromTAS");
    assert_eq!(r["config"]["n"], 2);
    assert_eq!(r["config"]["ops"], 1);
}

#[test]
fn bad_config_file_exits_sixty_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "program = [").unwrap();
    assert_eq!(code(&slinlab(&["check", "--config", cfg.to_str().unwrap()])), 64);
}

#[test]
fn emitted_trace_replays() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.json");
    let o = slinlab(&[
        "check",
        "--program",
        "collectCounter",
        "--workload",
        "negwitness",
        "--emit-trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let o = slinlab(&["replay", trace.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["identical"], true);

    // a tampered history must not replay
    let mut t: Value = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    let steps = t["steps"].as_array_mut().unwrap();
    steps.pop();
    fs::write(&trace, serde_json::to_string(&t).unwrap()).unwrap();
    let o = slinlab(&["replay", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn lists_every_algorithm() {
    let o = slinlab(&["list-algorithms", "--json"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["algorithms"].as_array().unwrap().len(), 7);
    let o = slinlab(&["list-algorithms"]);
    assert_eq!(stdout(&o).lines().count(), 7);
}

#[test]
fn exhaustive_agreement_on_a_queue() {
    let o = slinlab(&["agreement", "--object", "queue", "--n", "2", "--exhaustive", "--conformance", "--json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["exhaustive"]["validityFailures"], 0);
    assert_eq!(r["exhaustive"]["agreementFailures"], 0);
}

#[test]
fn sampled_agreement_on_a_stuttering_stack_fails() {
    let o = slinlab(&["agreement", "--object", "stutteringStack(1)", "--n", "2", "--runs", "300", "--conformance"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("DOES NOT conform"));
}

#[test]
fn mutants_are_killed() {
    let o = slinlab(&["mutate", "--program", "readableTAS", "--n", "2", "--ops", "2"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("mutants killed"));
}
