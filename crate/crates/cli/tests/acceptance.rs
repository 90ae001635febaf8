//! End-to-end verification of the full check suite. Each test drives one
//! bundle from `expmix::suite::CRITERIA`, so the harness prints one
//! pass/fail line per bundle; the last test runs the installed binary
//! twice and compares reports byte for byte.

use std::process::Command;
use std::time::Instant;

use expmix::report::Report;
use expmix::suite::{verify_all_report, CRITERIA};

fn run_bundle(index: usize, expect_label: &str) {
    let (label, bundle) = CRITERIA[index];
    assert_eq!(label, expect_label, "bundle order changed");
    let entries = bundle();
    assert!(!entries.is_empty(), "[{label}] produced no checks");
    for e in &entries {
        assert!(
            e.pass,
            "[{label}] check `{}` failed\n  inputs:  {}\n  verdict: {}\n  interval: ({}, {})",
            e.id, e.inputs, e.verdict, e.interval[0], e.interval[1]
        );
    }
}

#[test]
fn singular_family_moments_diverge_while_divergences_stay_finite() {
    let started = Instant::now();
    run_bundle(0, "one-sided singular family");
    assert!(
        started.elapsed().as_secs() < 30,
        "singular family bundle exceeded its time budget: {:?}",
        started.elapsed()
    );
}

#[test]
fn power_family_joins_the_exponential_arc_with_exact_witness() {
    run_bundle(1, "power family connectivity");
}

#[test]
fn luxemburg_norm_satisfies_the_axioms() {
    run_bundle(2, "Luxemburg norm axioms");
}

#[test]
fn conjugate_inequality_and_doubling_bounds_hold() {
    run_bundle(3, "conjugate pair and growth bounds");
}

#[test]
fn cumulant_functional_is_positive_and_convex() {
    run_bundle(4, "cumulant functional");
}

#[test]
fn divergence_equivalence_holds_across_the_pair_grid() {
    run_bundle(5, "divergence equivalence grid");
}

#[test]
fn restriction_filtration_behaves_as_a_tower() {
    run_bundle(6, "restriction filtration");
}

#[test]
fn closure_iterates_converge_in_total_variation() {
    run_bundle(7, "closure construction");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_expmix"))
            .args(["verify-all", "--json"])
            .output()
            .expect("binary runs")
    };
    let first = run();
    let second = run();
    assert!(first.status.success(), "first run failed: {first:?}");
    assert!(second.status.success(), "second run failed: {second:?}");
    assert_eq!(first.stdout, second.stdout, "verify-all --json is not deterministic");

    let text = String::from_utf8(first.stdout).expect("utf-8 report");
    let parsed: Report = serde_json::from_str(&text).expect("report deserializes");
    assert!(parsed.pass, "binary reported failing checks");
    assert_eq!(parsed.render_json(), text, "serialization does not round-trip");
    assert_eq!(parsed, verify_all_report(), "binary and in-process reports differ");
}
