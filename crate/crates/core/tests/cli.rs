//! End-to-end tests of the command-line harness: exit codes, report
//! formats, determinism, and config-file merging.

use std::process::{Command, Output};

fn hbsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbsim"))
        .args(args)
        .output()
        .expect("harness binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 report")
}

fn json_of(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout_of(out)).expect("stdout is a JSON report")
}

#[test]
fn default_squash_passes_with_exit_zero() {
    let out = hbsim(&["squash"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json_of(&out);
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
    assert!(String::from_utf8_lossy(&out.stderr).contains("squash: pass"));
}

#[test]
fn reruns_are_byte_identical() {
    for format in ["json", "csv"] {
        let args = ["lift", "--seed", "9", "--trials", "4", "--format", format];
        let first = hbsim(&args);
        let second = hbsim(&args);
        assert_eq!(first.status.code(), Some(0));
        assert_eq!(
            first.stdout, second.stdout,
            "format {format} not deterministic"
        );
    }
}

#[test]
fn csv_headers_are_stable() {
    let out = hbsim(&[
        "id-protocol",
        "--sweep",
        "--r-prime",
        "8",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let body = stdout_of(&out);
    assert_eq!(body.lines().next(), Some("r_prime,pass_prob"));
    assert_eq!(body.lines().count(), 3);

    let out = hbsim(&["squash", "--format", "csv"]);
    assert_eq!(
        stdout_of(&out).lines().next(),
        Some("m,epsilon,bound_t,chain_lhs,chain_rhs,dense_check_pass")
    );

    let out = hbsim(&["hadamard-chain", "--t", "50", "--l", "2", "--format", "csv"]);
    assert_eq!(
        stdout_of(&out).lines().next(),
        Some("t,l,theta,alpha,final_fidelity,lower_bound,pass")
    );
}

#[test]
fn config_file_is_merged_and_flags_win() {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = dir.path().join("experiment.json");
    std::fs::write(&config, r#"{"seed": 3, "trials": 2, "n": 2}"#).unwrap();
    let config = config.to_str().unwrap();

    let from_config = hbsim(&["prep", "--config", config]);
    assert_eq!(from_config.status.code(), Some(0));
    let report = json_of(&from_config);
    assert_eq!(report["n"], serde_json::json!(2));
    assert_eq!(report["seed"], serde_json::json!(3));

    let overridden = hbsim(&["prep", "--config", config, "--seed", "5"]);
    let direct = hbsim(&["prep", "--n", "2", "--trials", "2", "--seed", "5"]);
    assert_eq!(overridden.stdout, direct.stdout);
}

#[test]
fn output_flag_writes_the_report_file() {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("forge.json");
    let out = hbsim(&["forge", "--n", "2", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout_of(&out).is_empty(),
        "report must go to the file only"
    );
    let body = std::fs::read_to_string(&path).unwrap();
    let report: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
    assert_eq!(report["n"], serde_json::json!(2));
}

#[test]
fn configuration_errors_exit_two() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["id-protocol", "--prover", "mallory"],
        vec!["squash", "--m", "4"],
        vec!["prep", "--config", "/nonexistent/config.json"],
        vec!["lift", "--format", "yaml"],
    ];
    for args in cases {
        let out = hbsim(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "args {args:?}, stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(
            !out.stderr.is_empty(),
            "args {args:?} should explain the problem"
        );
    }

    let dir = tempfile::tempdir().expect("temp dir");
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"bogus_key": 1}"#).unwrap();
    let out = hbsim(&["prep", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn assertion_failures_exit_one() {
    // An impossible tolerance turns numerical noise into a failed check.
    let out = hbsim(&["lift", "--trials", "2", "--tolerance", "1e-18"]);
    assert_eq!(out.status.code(), Some(1));
    let report = json_of(&out);
    assert_eq!(report["pass"], serde_json::Value::Bool(false));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn chain_report_carries_the_fidelity_floor() {
    let out = hbsim(&["hadamard-chain", "--t", "200", "--l", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json_of(&out);
    assert_eq!(report["t"], serde_json::json!(200));
    assert_eq!(report["l"], serde_json::json!(1));
    let fidelity = report["final_fidelity"].as_f64().unwrap();
    assert!(fidelity >= 0.99499, "fidelity {fidelity}");
}
