//! Restrictions of a density to the information available up to a cut time
//! `t`: the restricted density keeps the original values on `[0, t]` and
//! spreads the remaining mass uniformly over `(t, 1]`. On top of the
//! restriction map the module provides connectivity scans in `t` (where
//! does the restricted density stop being exponentially reachable from the
//! uniform base?) and the agreement check between the two-sided clustering
//! density and its smooth continuation, which share every restriction up to
//! the continuation point while only one of them is reachable.

use alloc::format;
use alloc::vec::Vec;

use crate::arcs::{exp_connected, ArcVerdict};
use crate::counterexamples::{co419_density, co419_q};
use crate::error::{Error, Result};
use crate::fm;
use crate::measure::{mass_between, Density, Piece, QuadratureSpec};

/// Spacing down to which a bracketed Connected/NotConnected transition is
/// refined by bisection during a stability scan.
pub const THRESHOLD_RESOLUTION: f64 = 0.0009765625; // 2^-10

/// Pointwise tolerance for restriction agreement: the shared pieces are
/// identical by construction, so only rounding in the flat level remains.
pub const AGREEMENT_TOL: f64 = 1e-9;

/// Sample points per gap between piece boundaries when comparing two
/// restrictions pointwise.
const AGREEMENT_SAMPLES_PER_GAP: usize = 8;

/// A density conditioned on the cut time `t`.
#[derive(Clone, Debug)]
pub struct RestrictionResult {
    /// The cut time.
    pub t: f64,
    /// Original values on `[0, t]`, constant `(1 - f_t) / (1 - t)` beyond.
    pub restricted: Density,
    /// Cumulative mass of the source density on `[0, t]`.
    pub f_t: f64,
}

/// One scanned cut time and the connectivity verdict of its restriction
/// against the uniform base.
#[derive(Clone, Debug)]
pub struct StabilityEntry {
    pub t: f64,
    pub verdict: ArcVerdict,
    /// Exponent witness interval reported for a connected restriction.
    pub witness: Option<(f64, f64)>,
}

/// Outcome of a stability scan over a grid of cut times.
#[derive(Clone, Debug)]
pub struct StabilityReport {
    /// Scanned entries ordered by `t`, including bisection refinements.
    pub entries: Vec<StabilityEntry>,
    /// Smallest scanned `t` whose restriction is not reachable, refined to
    /// [`THRESHOLD_RESOLUTION`] when the scan brackets the transition.
    pub threshold: Option<f64>,
    /// Cut times whose verdict was inconclusive.
    pub inconclusive: Vec<f64>,
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter { what: "cut time", value: t });
    }
    Ok(())
}

/// Cumulative mass of `p` on `[0, t]`.
pub fn cdf(p: &Density, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    mass_between(p, 0.0, t, &QuadratureSpec::default())?.expect_finite()
}

/// Conditions `p` on the cut time `t`: the result keeps `p` on `[0, t]`
/// and is the constant `(1 - F(t)) / (1 - t)` on `(t, 1]`, so it stays a
/// probability density. `t = 1` returns `p` itself; `t = 0` gives the
/// uniform density. Infinite piece families are split at `t`: families
/// clustering inside `[0, t]` survive as families, the finitely many
/// pieces reaching below `t` of the others are materialized.
pub fn restrict(p: &Density, t: f64) -> Result<RestrictionResult> {
    check_time(t)?;
    if t == 1.0 {
        let f_t = cdf(p, 1.0)?;
        return Ok(RestrictionResult { t, restricted: p.clone(), f_t });
    }
    let f_t = cdf(p, t)?;
    let flat = (1.0 - f_t) / (1.0 - t);
    if !(flat > 0.0) {
        return Err(Error::NotPositive { at: t });
    }
    let mut pieces: Vec<Piece> = Vec::new();
    for piece in &p.pieces {
        if piece.hi <= t {
            pieces.push(piece.clone());
        } else if piece.lo < t {
            pieces.push(piece.restricted(piece.lo, t));
        }
    }
    let mut kept_tail = None;
    if let Some(tail) = &p.tail {
        let (materialized, kept) = tail.split_at(t)?;
        pieces.extend(materialized);
        kept_tail = kept;
    }
    pieces.push(Piece::constant(t, 1.0, flat));
    pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let name = format!("{}|t={t}", p.name);
    let restricted = match kept_tail {
        Some(tail) => Density::with_tail(&name, pieces, tail, p.strictly_positive),
        None => Density::from_pieces(&name, pieces)?,
    };
    Ok(RestrictionResult { t, restricted, f_t })
}

/// Runs `exp_connected(uniform, restrict(p, t))` over a grid of cut times,
/// reports the verdict sequence ordered by `t`, and localizes the first
/// Connected to NotConnected transition by bisection down to
/// [`THRESHOLD_RESOLUTION`]. The sequence must be monotone (reachability
/// is never regained as `t` grows); a NotConnected entry followed by a
/// Connected one is a soundness failure and reported as an error.
pub fn stability_scan(p: &Density, t_grid: &[f64]) -> Result<StabilityReport> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter { what: "scan grid size", value: 0.0 });
    }
    let mut ts: Vec<f64> = t_grid.to_vec();
    for &t in &ts {
        check_time(t)?;
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let base = Density::uniform();
    let mut entries = Vec::new();
    for &t in &ts {
        entries.push(scan_point(&base, p, t)?);
    }
    // Bracket the first transition and bisect it down to the resolution.
    if let Some(first_nc) = entries.iter().position(|e| e.verdict == ArcVerdict::NotConnected) {
        let last_conn = entries[..first_nc]
            .iter()
            .rev()
            .find(|e| e.verdict == ArcVerdict::Connected)
            .map(|e| e.t);
        if let Some(mut lo) = last_conn {
            let mut hi = entries[first_nc].t;
            while hi - lo > THRESHOLD_RESOLUTION {
                let mid = 0.5 * (lo + hi);
                let e = scan_point(&base, p, mid)?;
                let v = e.verdict;
                entries.push(e);
                match v {
                    ArcVerdict::Connected => lo = mid,
                    ArcVerdict::NotConnected => hi = mid,
                    ArcVerdict::Inconclusive => break,
                }
            }
        }
    }
    entries.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut seen_blocked = false;
    for e in &entries {
        match e.verdict {
            ArcVerdict::NotConnected => seen_blocked = true,
            ArcVerdict::Connected if seen_blocked => {
                return Err(Error::VerdictMismatch {
                    context: format!(
                        "restriction of {} regained connectivity at t = {}",
                        p.name, e.t
                    ),
                });
            }
            _ => {}
        }
    }
    let threshold = entries
        .iter()
        .find(|e| e.verdict == ArcVerdict::NotConnected)
        .map(|e| e.t);
    let inconclusive = entries
        .iter()
        .filter(|e| e.verdict == ArcVerdict::Inconclusive)
        .map(|e| e.t)
        .collect();
    Ok(StabilityReport { entries, threshold, inconclusive })
}

fn scan_point(base: &Density, p: &Density, t: f64) -> Result<StabilityEntry> {
    let r = restrict(p, t)?;
    let report = exp_connected(base, &r.restricted)?;
    Ok(StabilityEntry { t, verdict: report.verdict, witness: report.witness_interval })
}

/// Certifies the conditional-agreement phenomenon of the two-sided
/// clustering density `p` and its smooth continuation `q(t0, beta)`: the
/// two share every restriction up to `t0` even though only `q` is
/// exponentially reachable from the uniform base. Returns true when the
/// reachability facts hold (q reachable, p not) and the restrictions agree
/// pointwise within [`AGREEMENT_TOL`] at every grid time; a grid time past
/// `t0` makes the restrictions differ and the check false.
pub fn co419_agreement_check(t0: f64, beta: f64, t_grid: &[f64]) -> Result<bool> {
    let q = co419_q(t0, beta)?;
    let p = co419_density();
    for &t in t_grid {
        check_time(t)?;
    }
    let base = Density::uniform();
    if exp_connected(&base, &q)?.verdict != ArcVerdict::Connected {
        return Ok(false);
    }
    if exp_connected(&base, &p)?.verdict != ArcVerdict::NotConnected {
        return Ok(false);
    }
    for &t in t_grid {
        let rp = restrict(&p, t)?;
        let rq = restrict(&q, t)?;
        if !restrictions_agree(&rp.restricted, &rq.restricted) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Pointwise agreement of two densities within [`AGREEMENT_TOL`], sampled
/// on every gap between piece boundaries of either side. Differing tails
/// (one side keeps an infinite family the other lacks) disagree outright.
fn restrictions_agree(a: &Density, b: &Density) -> bool {
    match (&a.tail, &b.tail) {
        (None, None) => {}
        (Some(ta), Some(tb)) => {
            if !ta.same_descriptor(tb) {
                return false;
            }
        }
        _ => return false,
    }
    let mut cuts: Vec<f64> = Vec::new();
    for piece in a.pieces.iter().chain(b.pieces.iter()) {
        cuts.push(piece.lo);
        cuts.push(piece.hi);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if !(hi > lo) {
            continue;
        }
        for i in 0..AGREEMENT_SAMPLES_PER_GAP {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / (AGREEMENT_SAMPLES_PER_GAP as f64);
            let va = a.value_at(x);
            let vb = b.value_at(x);
            if !(fm::abs(va - vb) <= AGREEMENT_TOL * fm::max(1.0, fm::min(va, vb))) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexamples::divergenza_density;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn cdf_matches_the_elementary_closed_forms() {
        let u = Density::uniform();
        assert!((cdf(&u, 0.3).unwrap() - 0.3).abs() < 1e-12);
        let b2 = Density::beta(2.0).unwrap();
        assert!((cdf(&b2, 0.5).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(cdf(&b2, 0.0).unwrap(), 0.0);
        assert!((cdf(&b2, 1.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cdf_sums_the_singular_series_to_full_mass() {
        let d = divergenza_density();
        assert!((cdf(&d, 1.0).unwrap() - 1.0).abs() < 1e-6);
        let c = co419_density();
        assert!((cdf(&c, 1.0).unwrap() - 1.0).abs() < 1e-6);
        // Monotone in t.
        let mut last = 0.0;
        for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let f = cdf(&d, t).unwrap();
            assert!(f >= last);
            last = f;
        }
    }

    #[test]
    fn cdf_rejects_times_outside_the_unit_interval() {
        let u = Density::uniform();
        assert!(matches!(cdf(&u, -0.1), Err(Error::InvalidParameter { .. })));
        assert!(matches!(cdf(&u, 1.5), Err(Error::InvalidParameter { .. })));
        assert!(matches!(cdf(&u, f64::NAN), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn restriction_keeps_the_density_and_flattens_beyond_the_cut() {
        let b2 = Density::beta(2.0).unwrap();
        let r = restrict(&b2, 0.5).unwrap();
        assert!((r.f_t - 0.25).abs() < 1e-12);
        for x in [0.1, 0.25, 0.4, 0.499] {
            assert!((r.restricted.value_at(x) - 2.0 * x).abs() < 1e-12);
        }
        for x in [0.501, 0.7, 0.9, 0.999] {
            assert!((r.restricted.value_at(x) - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn restriction_time_endpoints_give_uniform_and_identity() {
        let b2 = Density::beta(2.0).unwrap();
        let r0 = restrict(&b2, 0.0).unwrap();
        assert_eq!(r0.f_t, 0.0);
        for x in grid(17) {
            assert!((r0.restricted.value_at(x) - 1.0).abs() < 1e-12);
        }
        let r1 = restrict(&b2, 1.0).unwrap();
        assert!((r1.f_t - 1.0).abs() < 1e-9);
        for x in grid(17) {
            assert!((r1.restricted.value_at(x) - b2.value_at(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn power_restrictions_match_the_flat_closed_form() {
        for beta in [0.5, 2.0, 5.0] {
            let p = Density::beta(beta).unwrap();
            for t in [0.25, 0.6] {
                let r = restrict(&p, t).unwrap();
                let flat = (1.0 - fm::powf(t, beta)) / (1.0 - t);
                assert!((r.restricted.value_at(0.5 * (t + 1.0)) - flat).abs() < 1e-12);
                assert!((r.restricted.value_at(0.5 * t) - p.value_at(0.5 * t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn restrictions_stay_normalized_for_every_source() {
        let sources = [
            Density::uniform(),
            Density::beta(0.5).unwrap(),
            Density::beta(5.0).unwrap(),
            divergenza_density(),
            co419_density(),
        ];
        let spec = QuadratureSpec::default();
        for p in &sources {
            for t in [0.1, 0.35, 0.5, 0.62, 0.9] {
                let r = restrict(p, t).unwrap();
                let m = mass_between(&r.restricted, 0.0, 1.0, &spec).unwrap();
                let v = m.value().expect("restriction mass is finite");
                assert!(
                    (v - 1.0).abs() <= 1e-9 + m.error_bound,
                    "mass {v} for {} at t={t}",
                    p.name
                );
            }
        }
    }

    #[test]
    fn restriction_splits_the_two_sided_family_at_the_cut() {
        let c = co419_density();
        // Below the cluster: finitely many pieces materialize, no family
        // survives, the flat level covers the rest.
        let r = restrict(&c, 0.3).unwrap();
        assert!(!r.restricted.has_tail());
        assert!((r.restricted.value_at(0.2) - c.value_at(0.2)).abs() < 1e-12);
        let flat = (1.0 - r.f_t) / 0.7;
        assert!((r.restricted.value_at(0.6) - flat).abs() < 1e-12);
        // Above the cluster: the left family survives as a family and the
        // right family splits into kept inner pieces plus the flat level.
        let r = restrict(&c, 0.7).unwrap();
        assert!(r.restricted.has_tail());
        for x in [0.3, 0.45, 0.499, 0.52, 0.6, 0.68] {
            let expected = c.value_at(x);
            assert!(
                (r.restricted.value_at(x) - expected).abs() <= 1e-12 * expected.max(1.0),
                "mismatch at {x}"
            );
        }
        let flat = (1.0 - r.f_t) / 0.3;
        assert!((r.restricted.value_at(0.8) - flat).abs() < 1e-12);
    }

    #[test]
    fn repeated_restriction_collapses_to_the_earlier_cut() {
        for p in [Density::beta(2.0).unwrap(), co419_density()] {
            let outer = restrict(&p, 0.6).unwrap();
            let twice = restrict(&outer.restricted, 0.3).unwrap();
            let once = restrict(&p, 0.3).unwrap();
            for x in grid(64) {
                let a = twice.restricted.value_at(x);
                let b = once.restricted.value_at(x);
                assert!((a - b).abs() <= 1e-10 * b.max(1.0), "tower mismatch at {x}");
            }
        }
    }

    #[test]
    fn stability_scan_keeps_power_restrictions_connected() {
        let p = Density::beta(2.0).unwrap();
        let ts: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let report = stability_scan(&p, &ts).unwrap();
        assert_eq!(report.entries.len(), 9);
        assert!(report.entries.iter().all(|e| e.verdict == ArcVerdict::Connected));
        assert!(report.threshold.is_none());
        assert!(report.inconclusive.is_empty());
    }

    #[test]
    fn stability_scan_of_the_uniform_base_is_trivially_connected() {
        let report = stability_scan(&Density::uniform(), &[0.2, 0.5, 0.8]).unwrap();
        assert!(report.entries.iter().all(|e| e.verdict == ArcVerdict::Connected));
        assert!(report.threshold.is_none());
    }

    #[test]
    fn stability_scan_localizes_the_two_sided_threshold() {
        let c = co419_density();
        let report = stability_scan(&c, &[0.1, 0.3, 0.49, 0.5, 0.7]).unwrap();
        for e in &report.entries {
            let expected =
                if e.t < 0.5 { ArcVerdict::Connected } else { ArcVerdict::NotConnected };
            assert_eq!(e.verdict, expected, "verdict at t={}", e.t);
        }
        let threshold = report.threshold.expect("transition bracketed");
        assert!((threshold - 0.5).abs() <= THRESHOLD_RESOLUTION);
        // Bisection entries fill the bracket down to the resolution.
        let below: Vec<&StabilityEntry> =
            report.entries.iter().filter(|e| e.t < threshold).collect();
        let closest = below.iter().map(|e| threshold - e.t).fold(f64::INFINITY, f64::min);
        assert!(closest <= THRESHOLD_RESOLUTION);
        assert!(report.inconclusive.is_empty());
    }

    #[test]
    fn stability_scan_validates_the_grid() {
        let u = Density::uniform();
        assert!(matches!(
            stability_scan(&u, &[]),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            stability_scan(&u, &[0.5, 1.25]),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn agreement_check_certifies_the_shared_restriction_range() {
        assert!(co419_agreement_check(0.25, 2.0, &[0.1, 0.2, 0.25]).unwrap());
        assert!(!co419_agreement_check(0.25, 2.0, &[0.2, 0.3]).unwrap());
    }

    #[test]
    fn agreement_check_validates_its_parameters() {
        assert!(matches!(
            co419_agreement_check(0.6, 2.0, &[0.1]),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            co419_agreement_check(0.25, -1.0, &[0.1]),
            Err(Error::InvalidParameter { .. })
        ));
    }
}
