//! End-to-end flows around the two singular series densities: moment
//! verdicts against divergence verdicts, truncation and restriction
//! behavior, and the connectivity threshold scan.

use expmix_core::arcs::{exp_connected, mix_connected, ArcVerdict};
use expmix_core::counterexamples::{
    co419_density, co419_q, divergenza_density, divergenza_kl_direct, divergenza_kl_series,
    KlDirection,
};
use expmix_core::divergence::{finitediv_equivalence, kl_divergence};
use expmix_core::filtration::{co419_agreement_check, restrict, stability_scan};
use expmix_core::measure::{Density, QuadratureSpec, Verdict};

#[test]
fn every_power_moment_diverges_while_both_divergences_stay_finite() {
    use expmix_core::counterexamples::divergenza_moment_verdict;
    let mut eps = 1.0_f64;
    for _ in 0..8 {
        let report = divergenza_moment_verdict(eps).unwrap();
        assert_eq!(report.verdict, Verdict::Divergent, "moment at eps={eps}");
        let witness = report.witness_piece.unwrap();
        assert!(witness as f64 * eps >= 1.0);
        eps *= 0.5;
    }
    for direction in [KlDirection::DensityFromUniform, KlDirection::UniformFromDensity] {
        let series = divergenza_kl_series(direction, 10_000);
        assert!(series.partial_sum.is_finite());
        // The remainder envelope shrinks like log(N)/N.
        assert!(series.tail_bound < 1e-2);
        let direct =
            divergenza_kl_direct(direction, 10_000, &QuadratureSpec::default()).unwrap();
        // Both sides truncate at the same piece, so they differ only by
        // accumulated rounding.
        let diff = (series.partial_sum - direct.value().unwrap()).abs();
        assert!(
            diff <= direct.error_bound + 1e-9 && diff <= 1e-4,
            "series vs direct at {direction:?}: diff {diff}"
        );
    }
}

#[test]
fn divergences_agree_with_the_generic_engine() {
    let q = divergenza_density();
    let u = Density::uniform();
    let qp = kl_divergence(&q, &u).unwrap();
    assert_eq!(qp.verdict, Verdict::Finite);
    let series = divergenza_kl_series(KlDirection::DensityFromUniform, 10_000);
    assert!((qp.value().unwrap() - series.partial_sum).abs() < 1e-4);
    let pq = kl_divergence(&u, &q).unwrap();
    assert_eq!(pq.verdict, Verdict::Finite);
    let series = divergenza_kl_series(KlDirection::UniformFromDensity, 10_000);
    assert!((pq.value().unwrap() - series.partial_sum).abs() < 1e-4);
}

#[test]
fn finite_divergence_does_not_grant_arc_membership() {
    let q = divergenza_density();
    let u = Density::uniform();
    // Both relative entropies are finite yet the density sits outside the
    // exponential family of the uniform center: the moment condition is
    // strictly stronger than finite divergence.
    let report = exp_connected(&u, &q).unwrap();
    assert_eq!(report.verdict, ArcVerdict::NotConnected);
    let report = mix_connected(&u, &q).unwrap();
    assert_eq!(report.verdict, ArcVerdict::NotConnected);
}

#[test]
fn truncating_the_family_restores_connectivity() {
    let q = divergenza_density();
    let u = Density::uniform();
    // Cutting at t < 1 keeps only finitely many singular pieces, each with
    // exponent above -1, so the restricted density rejoins the family.
    let r = restrict(&q, 0.9).unwrap();
    assert!(!r.restricted.has_tail());
    let report = exp_connected(&u, &r.restricted).unwrap();
    assert_eq!(report.verdict, ArcVerdict::Connected);
}

#[test]
fn two_sided_scan_localizes_the_midpoint_threshold() {
    let d = co419_density();
    let report = stability_scan(&d, &[0.2, 0.4, 0.6, 0.8]).unwrap();
    let threshold = report.threshold.unwrap();
    assert!((threshold - 0.5).abs() <= 0.0009765625 + 1e-12);
    for entry in &report.entries {
        let expect = if entry.t < threshold {
            ArcVerdict::Connected
        } else {
            ArcVerdict::NotConnected
        };
        assert_eq!(entry.verdict, expect, "scan verdict at t={}", entry.t);
    }
}

#[test]
fn smooth_truncation_agrees_below_the_cut_and_joins_the_family() {
    assert!(co419_agreement_check(0.25, 2.0, &[0.1, 0.2, 0.25]).unwrap());
    let q = co419_q(0.25, 2.0).unwrap();
    let u = Density::uniform();
    assert_eq!(exp_connected(&u, &q).unwrap().verdict, ArcVerdict::Connected);
    // The materialized singular pieces below the cut leave the ratio
    // unbounded, so mixture membership still fails.
    assert_eq!(mix_connected(&u, &q).unwrap().verdict, ArcVerdict::NotConnected);
    let report = finitediv_equivalence(&q, &u).unwrap();
    assert!(report.lemma_checks.consistent());
    assert_eq!(report.divergence_qp.verdict, Verdict::Finite);
}
