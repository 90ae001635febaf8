//! Binary-level contract tests: output text, exit codes, determinism, and
//! the density spec grammar as seen from the command line.

use std::process::{Command, Output};

fn expmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expmix"))
        .args(args)
        .env("NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

#[test]
fn exponential_arc_check_reports_the_witness_interval() {
    let out = expmix(&["arc", "exp-check", "--p", "uniform", "--q", "beta beta=2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("Connected"), "missing verdict: {text}");
    assert!(text.contains("(-1, inf)"), "missing witness interval: {text}");
}

#[test]
fn divergence_check_reports_the_closed_form_value() {
    let out = expmix(&["divergence", "--p", "uniform", "--q", "beta beta=2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("D(q||p) = 0.1931472"), "missing value: {text}");
}

#[test]
fn closure_rows_follow_the_halving_oracle() {
    let out = expmix(&[
        "closure",
        "approx",
        "--density",
        "uniform",
        "--target",
        "steps 0:0.5:2,0.5:1:0",
        "--n-max",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("closure-n-000010"), "missing final row: {text}");
    assert!(text.contains("c_n = 1.0500000"), "normalizer off: {text}");
}

#[test]
fn unknown_subcommands_and_flags_exit_with_usage() {
    assert_eq!(expmix(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(expmix(&["norm", "--frequency", "3"]).status.code(), Some(2));
    assert_eq!(expmix(&[]).status.code(), Some(2));
}

#[test]
fn malformed_density_specs_exit_with_usage() {
    let out = expmix(&["arc", "exp-check", "--p", "gaussian", "--q", "uniform"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).is_empty(), "usage errors must not emit a report");
    let err = String::from_utf8(out.stderr).expect("utf-8 stderr");
    assert!(err.contains("gaussian"), "error should echo the spec: {err}");

    let out = expmix(&["restrict", "--p", "uniform", "--t", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn text_reports_are_deterministic_and_unstyled() {
    let args = ["model", "--p", "uniform", "--q", "beta beta=2"];
    let first = expmix(&args);
    let second = expmix(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.contains(&0x1b), "text output carries escape bytes");
}

#[test]
fn json_reports_parse_and_round_trip() {
    let out = expmix(&["--json", "stability-scan", "--p", "co419", "--grid", "0.25,0.5,0.75"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let report: expmix::report::Report = serde_json::from_str(&text).expect("valid JSON");
    assert_eq!(report.schema_version, 1);
    assert!(report.pass);
    assert_eq!(report.render_json(), text);
    assert!(!text.contains('\u{1b}'));
}
