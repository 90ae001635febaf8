//! Constructive reach of the mixture family: any simple nonnegative target
//! density is an L1 limit of strictly positive iterates built from a model
//! center `p`. Each iterate clamps `p` into the band `[1/n, n]`, reweights
//! the target by `p` over its clamp where the target lives, and spreads a
//! vanishing level `a_n` times `p` over the region where the target is
//! zero; the normalizer `c_n` tends to 1 and every iterate is
//! mixture-connected to the center with explicit ratio bounds. The module
//! also provides the total-variation distance used to track convergence,
//! the convexity scan for blends of two reachable densities, and the
//! phi-moment membership test `E_p[phi(q/p)]`.
//!
//! Band crossings of non-constant pieces are located by sampling the piece
//! at [`LEVEL_SCAN_GRID`] points and bisecting each bracket, so level sets
//! narrower than the sampling resolution are not separated.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::arcs::{exp_connected, mix_connected, mixture_arc_density, ArcKind, ArcVerdict};
use crate::divergence::{ensure_strictly_positive, finite_shadow};
use crate::error::{Error, Result};
use crate::fm;
use crate::kahan::KahanSum;
use crate::measure::{
    eval_form, integrate, integrate_forms, pointwise_ratio, refine_breakpoints, scale_form,
    sign_change_points, Density, Expression, IntegralValue, LogAtom, Piece, PieceForm, PowerAtom,
    Provenance, QuadratureSpec, RandomVariable, Ratio, RatioForm, Weight,
};

/// Sample points per piece when bracketing band or sign crossings.
const LEVEL_SCAN_GRID: u32 = 256;

/// Shrink rule for the level assigned to the target's null region.
pub type ShrinkRule = fn(u64) -> f64;

/// The default shrink rule `a_n = 1/n`: vanishes as required while keeping
/// the normalizer drift `c_n - 1` of order `1/n`.
pub fn default_shrink(n: u64) -> f64 {
    1.0 / n as f64
}

/// One constructed iterate.
#[derive(Clone, Debug)]
pub struct ClosureStep {
    pub n: u64,
    /// Level spread over the target's null region before normalization.
    pub a_n: f64,
    /// Normalizer: integral of the unnormalized iterate.
    pub c_n: f64,
    /// Rounding bound accumulated while computing `c_n`.
    pub c_bound: f64,
    pub iterate: Density,
    /// Essential bounds of iterate/center confirmed by the mixture check.
    pub ratio_bounds: (f64, f64),
}

/// Iterate row of a closure sequence: index, normalizer, density, and its
/// total-variation distance from the target.
#[derive(Clone, Debug)]
pub struct ClosureIterate {
    pub n: u64,
    pub c_n: f64,
    pub iterate: Density,
    pub l1_error: f64,
}

/// A run of iterates approaching a simple target.
#[derive(Clone, Debug)]
pub struct ClosureSequence {
    pub target: Density,
    pub a_rule: ShrinkRule,
    pub iterates: Vec<ClosureIterate>,
}

/// Verdicts for blends of two densities already connected to the center.
#[derive(Clone, Debug)]
pub struct ConvexityReport {
    pub kind: ArcKind,
    /// `(lambda, verdict)` rows in grid order.
    pub entries: Vec<(f64, ArcVerdict)>,
    pub all_connected: bool,
}

fn clamp_band(n: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidParameter { what: "clamp band index", value: 0.0 });
    }
    let nf = n as f64;
    Ok((1.0 / nf, nf))
}

/// Pointwise clamp of the density to the band `[1/n, n]`.
pub fn clamp_value(p: &Density, n: u64, x: f64) -> Result<f64> {
    let (blo, bhi) = clamp_band(n)?;
    Ok(fm::min(fm::max(p.value_at(x), blo), bhi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Regime {
    Below,
    Inside,
    Above,
}

fn regime_of(v: f64, blo: f64, bhi: f64) -> Regime {
    if v < blo {
        Regime::Below
    } else if v > bhi {
        Regime::Above
    } else {
        Regime::Inside
    }
}

/// Splits one piece at its crossings of the band levels and classifies
/// each window by the midpoint value.
fn band_windows(piece: &Piece, blo: f64, bhi: f64) -> Vec<(f64, f64, Regime)> {
    if let PieceForm::Constant(c) = piece.form {
        return alloc::vec![(piece.lo, piece.hi, regime_of(c, blo, bhi))];
    }
    let mut cuts = alloc::vec![piece.lo, piece.hi];
    for level in [blo, bhi] {
        let form = piece.form.clone();
        let f = move |x: f64| eval_form(&form, x) - level;
        cuts.extend(sign_change_points(&f, piece.lo, piece.hi, LEVEL_SCAN_GRID));
    }
    cuts.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64, Regime)> = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= 1e-12 {
            continue;
        }
        let regime = regime_of(eval_form(&piece.form, 0.5 * (lo + hi)), blo, bhi);
        match out.last_mut() {
            Some(last) if last.2 == regime => last.1 = hi,
            _ => out.push((lo, hi, regime)),
        }
    }
    if let Some(first) = out.first_mut() {
        first.0 = piece.lo;
    }
    if let Some(last) = out.last_mut() {
        last.1 = piece.hi;
    }
    out
}

/// Materialized clamp of a density to the band `[1/n, n]`: keeps the
/// original pieces where they sit inside the band and replaces the
/// excursions by the band edges. Densities with infinite piece families
/// cannot be materialized into finitely many pieces; use [`clamp_value`]
/// for pointwise probing of those.
pub fn clamp(p: &Density, n: u64) -> Result<RandomVariable> {
    let (blo, bhi) = clamp_band(n)?;
    if p.has_tail() {
        return Err(Error::TailUnsupported { op: "materializing the clamp of an infinite piece family" });
    }
    let mut pieces = Vec::new();
    for piece in &p.pieces {
        for (lo, hi, regime) in band_windows(piece, blo, bhi) {
            pieces.push(match regime {
                Regime::Below => Piece::constant(lo, hi, blo),
                Regime::Above => Piece::constant(lo, hi, bhi),
                Regime::Inside => piece.restricted(lo, hi),
            });
        }
    }
    Ok(RandomVariable::from_pieces(&format!("clamp({}, {n})", p.name), pieces))
}

/// Constant levels `(lo, hi, value)` of a simple target.
fn simple_levels(target: &Density) -> Result<Vec<(f64, f64, f64)>> {
    if target.has_tail() {
        return Err(Error::TargetNotSimple);
    }
    let mut levels = Vec::with_capacity(target.pieces.len());
    for piece in &target.pieces {
        match piece.form {
            PieceForm::Constant(v) => levels.push((piece.lo, piece.hi, v)),
            _ => return Err(Error::TargetNotSimple),
        }
    }
    Ok(levels)
}

/// One step of the constructive approximation with the default shrink
/// rule `a_n = 1/n`.
pub fn closure_step(p: &Density, target: &Density, n: u64) -> Result<ClosureStep> {
    closure_step_with(p, target, n, default_shrink(n))
}

/// One step with an explicit null-region level `a_n`: the unnormalized
/// iterate is `target * p / clamp(p, n)` where the target is positive and
/// `a_n * p` where it vanishes; `c_n` is its total integral and the
/// returned density is the quotient. The iterate is verified to be
/// mixture-connected to the center with essential ratio bounds inside
/// `[min(a/n, a_n)/c_n, max(A n, a_n)/c_n]` for target levels in `[a, A]`.
pub fn closure_step_with(p: &Density, target: &Density, n: u64, a_n: f64) -> Result<ClosureStep> {
    let (blo, bhi) = clamp_band(n)?;
    if !(a_n > 0.0) || !a_n.is_finite() {
        return Err(Error::InvalidParameter { what: "null-region level", value: a_n });
    }
    if p.has_tail() {
        return Err(Error::TailUnsupported { op: "closure step from an infinite-family center" });
    }
    ensure_strictly_positive(p)?;
    let levels = simple_levels(target)?;
    let nf = n as f64;

    let mut raw: Vec<Piece> = Vec::new();
    for piece in &p.pieces {
        let windows = band_windows(piece, blo, bhi);
        for &(t_lo, t_hi, v) in &levels {
            for &(w_lo, w_hi, regime) in &windows {
                let lo = fm::max(w_lo, t_lo);
                let hi = fm::min(w_hi, t_hi);
                if !(hi > lo) {
                    continue;
                }
                let form = if v > 0.0 {
                    match regime {
                        Regime::Inside => PieceForm::Constant(v),
                        Regime::Below => scale_form(&piece.form, v * nf),
                        Regime::Above => scale_form(&piece.form, v / nf),
                    }
                } else {
                    scale_form(&piece.form, a_n)
                };
                raw.push(Piece { lo, hi, form });
            }
        }
    }

    let spec = QuadratureSpec::default();
    let mut c_sum = KahanSum::new();
    let mut c_bound = 0.0;
    for piece in &raw {
        let m = integrate_forms(&piece.form, &PieceForm::Constant(1.0), piece.lo, piece.hi, &spec)?;
        c_sum += m.expect_finite()?;
        c_bound += m.error_bound;
    }
    let c_n = c_sum.total();
    if !(c_n > 0.0) {
        return Err(Error::NotPositive { at: levels.first().map(|l| l.0).unwrap_or(0.0) });
    }

    let inv = 1.0 / c_n;
    let pieces = raw
        .iter()
        .map(|piece| Piece { lo: piece.lo, hi: piece.hi, form: scale_form(&piece.form, inv) })
        .collect::<Vec<Piece>>();
    let iterate =
        Density::from_pieces(&format!("iterate(n={n}, target={})", target.name), pieces)?;

    // The construction promises mixture connectivity with explicit bounds;
    // verify both through the generic decider.
    let report = mix_connected(p, &iterate)?;
    if report.verdict != ArcVerdict::Connected {
        return Err(Error::VerdictMismatch {
            context: format!("closure iterate n={n} is not mixture-connected to {}", p.name),
        });
    }
    let (c1, c2) = report.ratio_bounds.unwrap_or((0.0, f64::INFINITY));
    let mut a = f64::INFINITY;
    let mut big_a: f64 = 0.0;
    for &(_, _, v) in &levels {
        if v > 0.0 {
            a = fm::min(a, v);
            big_a = fm::max(big_a, v);
        }
    }
    let lo_env = fm::min(a / nf, a_n) * inv;
    let hi_env = fm::max(big_a * nf, a_n) * inv;
    let tol = 1e-9 * fm::max(1.0, hi_env);
    if c1 < lo_env - tol || c2 > hi_env + tol {
        return Err(Error::VerdictMismatch {
            context: format!(
                "closure iterate n={n} ratio bounds ({c1}, {c2}) escape the envelope ({lo_env}, {hi_env})"
            ),
        });
    }
    Ok(ClosureStep { n, a_n, c_n, c_bound, iterate, ratio_bounds: (c1, c2) })
}

/// Runs closure steps for each index with the default shrink rule and
/// tracks the total-variation error of every iterate.
pub fn closure_sequence(p: &Density, target: &Density, ns: &[u64]) -> Result<ClosureSequence> {
    closure_sequence_with(p, target, ns, default_shrink)
}

/// Runs closure steps for each index under a caller-chosen shrink rule.
pub fn closure_sequence_with(
    p: &Density,
    target: &Density,
    ns: &[u64],
    a_rule: ShrinkRule,
) -> Result<ClosureSequence> {
    let mut iterates = Vec::with_capacity(ns.len());
    for &n in ns {
        let step = closure_step_with(p, target, n, a_rule(n))?;
        let l1 = l1_distance(&step.iterate, target)?.expect_finite()?;
        iterates.push(ClosureIterate { n, c_n: step.c_n, iterate: step.iterate, l1_error: l1 });
    }
    Ok(ClosureSequence { target: target.clone(), a_rule, iterates })
}

fn power_atoms(form: &PieceForm) -> Option<Vec<PowerAtom>> {
    match form {
        PieceForm::Constant(c) => Some(alloc::vec![PowerAtom::new(*c, 0.0, 0.0)]),
        PieceForm::PowerSum(atoms) => Some(atoms.clone()),
        _ => None,
    }
}

fn form_at(d: &Density, x: f64) -> Option<PieceForm> {
    for p in &d.pieces {
        if p.contains(x) {
            return Some(p.form.clone());
        }
    }
    None
}

/// Total variation `int |f - g|`. Differences of power-form pieces are
/// integrated exactly after splitting at sampled sign changes; opaque
/// pieces fall back to quadrature of the absolute difference. Infinite
/// families must be identical on both sides (they cancel); any other
/// family combination is not supported.
pub fn l1_distance(f: &Density, g: &Density) -> Result<IntegralValue> {
    match (&f.tail, &g.tail) {
        (None, None) => {}
        (Some(a), Some(b)) if a.same_descriptor(b) => {}
        _ => {
            return Err(Error::TailUnsupported {
                op: "total-variation distance across different infinite families",
            })
        }
    }
    let spec = QuadratureSpec::default();
    let cuts = refine_breakpoints(&[&f.pieces, &g.pieces], 0.0, 1.0);
    let mut sum = KahanSum::new();
    let mut err = 0.0;
    let mut provenance = Provenance::ClosedForm;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let (ff, gf) = match (form_at(f, mid), form_at(g, mid)) {
            (Some(a), Some(b)) => (a, b),
            // Neither side carries a piece here, so the window belongs to
            // the shared family region and the difference vanishes.
            _ => continue,
        };
        match (power_atoms(&ff), power_atoms(&gf)) {
            (Some(fa), Some(ga)) => {
                if fa == ga {
                    continue;
                }
                let mut atoms = fa;
                atoms.extend(ga.iter().map(|a| PowerAtom::new(-a.coeff, a.anchor, a.exponent)));
                let diff = PieceForm::PowerSum(atoms);
                let dform = diff.clone();
                let eval = move |x: f64| eval_form(&dform, x);
                let mut seg = alloc::vec![lo];
                seg.extend(sign_change_points(&eval, lo, hi, LEVEL_SCAN_GRID));
                seg.push(hi);
                for s in seg.windows(2) {
                    if !(s[1] > s[0]) {
                        continue;
                    }
                    let part =
                        integrate_forms(&diff, &PieceForm::Constant(1.0), s[0], s[1], &spec)?;
                    sum += fm::abs(part.expect_finite()?);
                    err += part.error_bound;
                }
            }
            _ => {
                let (ef, eg) = (ff.clone(), gf.clone());
                let abs_diff = PieceForm::Expr(Expression {
                    eval: Arc::new(move |x| fm::abs(eval_form(&ef, x) - eval_form(&eg, x))),
                    left_exponent: endpoint_rate(&ff, &gf, true),
                    right_exponent: endpoint_rate(&ff, &gf, false),
                    range: None,
                });
                let part =
                    integrate_forms(&abs_diff, &PieceForm::Constant(1.0), lo, hi, &spec)?;
                sum += part.expect_finite()?;
                err += part.error_bound;
                provenance = Provenance::Quadrature;
            }
        }
    }
    Ok(IntegralValue::finite(sum.total(), err, provenance))
}

/// Endpoint rate annotation of |f - g|: the more singular side dominates.
fn endpoint_rate(f: &PieceForm, g: &PieceForm, left: bool) -> f64 {
    let rate = |form: &PieceForm| match form {
        PieceForm::Expr(e) => {
            if left {
                e.left_exponent
            } else {
                e.right_exponent
            }
        }
        _ => 0.0,
    };
    fm::min(rate(f), rate(g))
}

/// Checks that every blend `(1-lambda) q + lambda r` of two densities
/// already connected to the center stays connected, for the requested arc
/// family. The endpoint memberships are preconditions and re-verified.
pub fn convexity_check(
    p: &Density,
    q: &Density,
    r: &Density,
    lambdas: &[f64],
    kind: ArcKind,
) -> Result<ConvexityReport> {
    let decide = |d: &Density| -> Result<ArcVerdict> {
        let report = match kind {
            ArcKind::Exponential => exp_connected(p, d)?,
            ArcKind::Mixture => mix_connected(p, d)?,
        };
        Ok(report.verdict)
    };
    if decide(q)? != ArcVerdict::Connected || decide(r)? != ArcVerdict::Connected {
        return Err(Error::NotConnected);
    }
    let mut entries = Vec::with_capacity(lambdas.len());
    let mut all_connected = true;
    for &lambda in lambdas {
        if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
            return Err(Error::InvalidParameter { what: "blend weight", value: lambda });
        }
        let blend = mixture_arc_density(q, r, lambda)?;
        let verdict = decide(&blend)?;
        all_connected &= verdict == ArcVerdict::Connected;
        entries.push((lambda, verdict));
    }
    Ok(ConvexityReport { kind, entries, all_connected })
}

/// Moment weight for [`phi_membership`].
#[derive(Clone)]
pub enum PhiSpec {
    /// `x * max(ln x, 0)`: the positive-part entropy weight.
    XLogPlus,
    /// Caller-supplied continuous positive weight on `(0, inf)`; evaluated
    /// numerically.
    Custom { name: String, eval: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl core::fmt::Debug for PhiSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PhiSpec::XLogPlus => f.write_str("XLogPlus"),
            PhiSpec::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

/// Positive part of ln(q/p) with exact splits where the ratio crosses one,
/// so the entropy-weight integrand keeps closed log forms.
fn poslog_ratio_variable(ratio: &Ratio) -> RandomVariable {
    let mut pieces = Vec::new();
    for rp in &ratio.pieces {
        match &rp.form {
            RatioForm::Atom(a) => {
                if a.coeff <= 0.0 {
                    // Vanishing ratio: the positive part is zero.
                    continue;
                }
                let (c, r, anchor) = (a.coeff, a.exponent, a.anchor);
                if r == 0.0 {
                    if fm::ln(c) > 0.0 {
                        pieces.push(Piece::constant(rp.lo, rp.hi, fm::ln(c)));
                    }
                    continue;
                }
                let dstar = fm::exp(-fm::ln(c) / r);
                let mut cuts = alloc::vec![rp.lo];
                for cand in [anchor - dstar, anchor + dstar] {
                    if cand > rp.lo && cand < rp.hi {
                        cuts.push(cand);
                    }
                }
                cuts.push(rp.hi);
                cuts.sort_by(f64::total_cmp);
                for wi in cuts.windows(2) {
                    let (lo, hi) = (wi[0], wi[1]);
                    if !(hi > lo) {
                        continue;
                    }
                    let mid = 0.5 * (lo + hi);
                    if fm::ln(c) + r * fm::ln(fm::abs(mid - anchor)) > 0.0 {
                        pieces.push(Piece::log_ratio(
                            lo,
                            hi,
                            fm::ln(c),
                            alloc::vec![LogAtom { coeff: r, anchor }],
                        ));
                    }
                }
            }
            RatioForm::General { eval, .. } => {
                let e = eval.clone();
                pieces.push(Piece::expr(
                    rp.lo,
                    rp.hi,
                    Expression {
                        eval: Arc::new(move |x| fm::max(fm::ln(fm::max(e(x), 1e-300)), 0.0)),
                        left_exponent: 0.0,
                        right_exponent: 0.0,
                        range: None,
                    },
                ));
            }
        }
    }
    RandomVariable::from_pieces("positive-log-ratio", pieces)
}

/// Finiteness of `E_p[phi(q/p)]`. The built-in entropy weight integrates
/// in closed form (it reduces to the positive part of the relative-entropy
/// integrand); custom weights run on quadrature only, and a quadrature
/// failure is reported as an inconclusive verdict rather than an error.
/// Identical infinite families cancel to ratio one; other family
/// combinations are unsupported.
pub fn phi_membership(p: &Density, q: &Density, phi: &PhiSpec) -> Result<IntegralValue> {
    ensure_strictly_positive(p)?;
    let tail_mass = match (&q.tail, &p.tail) {
        (None, None) => 0.0,
        (Some(a), Some(b)) if a.same_descriptor(b) => b.mass().partial_sum,
        _ => {
            return Err(Error::TailUnsupported {
                op: "phi moment across a one-sided infinite family",
            })
        }
    };
    let ratio = pointwise_ratio(q, p)?;
    let spec = QuadratureSpec::default();
    match phi {
        PhiSpec::XLogPlus => {
            // E_p[(q/p) ln+(q/p)] = int q ln+(q/p); the shared-family
            // region has ratio one and contributes nothing.
            let w = poslog_ratio_variable(&ratio);
            let shadow = finite_shadow(q);
            integrate(&w, Weight::Dens(&shadow), &spec)
        }
        PhiSpec::Custom { eval, .. } => {
            let mut pieces = Vec::new();
            for rp in &ratio.pieces {
                let value: Arc<dyn Fn(f64) -> f64 + Send + Sync> = match &rp.form {
                    RatioForm::Atom(a) => {
                        let (c, r, anchor) = (a.coeff, a.exponent, a.anchor);
                        Arc::new(move |x: f64| c * fm::powf(fm::abs(x - anchor), r))
                    }
                    RatioForm::General { eval, .. } => eval.clone(),
                };
                let phi_fn = eval.clone();
                pieces.push(Piece::expr(
                    rp.lo,
                    rp.hi,
                    Expression {
                        eval: Arc::new(move |x| phi_fn(value(x))),
                        left_exponent: 0.0,
                        right_exponent: 0.0,
                        range: None,
                    },
                ));
            }
            let w = RandomVariable::from_pieces("phi-of-ratio", pieces);
            let shadow = finite_shadow(p);
            let base = match integrate(&w, Weight::Dens(&shadow), &spec) {
                Ok(v) => v,
                Err(Error::UnannotatedSingularity { .. }) | Err(Error::QuadratureStalled { .. }) => {
                    return Ok(IntegralValue::inconclusive(
                        0.0,
                        f64::INFINITY,
                        Provenance::Quadrature,
                    ))
                }
                Err(e) => return Err(e),
            };
            let v = base.expect_finite()? + eval(1.0) * tail_mass;
            Ok(IntegralValue::finite(v, base.error_bound, base.provenance))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexamples::{co419_density, divergenza_density};
    use crate::measure::Verdict;

    fn step_target() -> Density {
        Density::simple("half-step", &[(0.0, 0.5, 2.0), (0.5, 1.0, 0.0)]).unwrap()
    }

    #[test]
    fn clamp_leaves_in_band_densities_alone() {
        let u = Density::uniform();
        let c = clamp(&u, 5).unwrap();
        for x in [0.1, 0.5, 0.9] {
            assert_eq!(c.value_at(x), 1.0);
        }
        assert_eq!(c.pieces.len(), 1);
    }

    #[test]
    fn clamp_splits_the_affine_density_at_the_band_edge() {
        let b2 = Density::beta(2.0).unwrap();
        let c = clamp(&b2, 4).unwrap();
        assert_eq!(c.pieces.len(), 2);
        for (x, want) in [(0.01, 0.25), (0.12, 0.25), (0.2, 0.4), (0.9, 1.8)] {
            assert!((c.value_at(x) - want).abs() < 1e-9, "clamp at {x}");
        }
        // The crossing 2x = 1/4 sits at x = 1/8.
        assert!((c.pieces[0].hi - 0.125).abs() < 1e-9);
    }

    #[test]
    fn clamp_value_saturates_near_singular_clusters() {
        let d = divergenza_density();
        // Just right of the second singular anchor the density exceeds 10.
        let x = 0.5 + 1e-4;
        assert!(d.value_at(x) > 10.0);
        assert_eq!(clamp_value(&d, 10, x).unwrap(), 10.0);
        // Mid-piece the density is inside the band and passes through.
        let x = 0.25;
        assert!((clamp_value(&d, 10, x).unwrap() - d.value_at(x)).abs() < 1e-12);
        // Near the outer edge of a deep piece the density dips below 1/10.
        let x = 5.0 / 6.0 - 1e-9;
        assert!(d.value_at(x) < 0.1);
        assert_eq!(clamp_value(&d, 10, x).unwrap(), 0.1);
    }

    #[test]
    fn clamp_validates_the_band_index_and_family_support() {
        let u = Density::uniform();
        assert!(matches!(clamp(&u, 0), Err(Error::InvalidParameter { .. })));
        assert!(matches!(
            clamp(&divergenza_density(), 10),
            Err(Error::TailUnsupported { .. })
        ));
    }

    #[test]
    fn closure_step_matches_the_halving_oracle() {
        let p = Density::uniform();
        let q = step_target();
        for n in [1u64, 10, 100] {
            let nf = n as f64;
            let step = closure_step(&p, &q, n).unwrap();
            let c_n = 1.0 + 0.5 / nf;
            assert!((step.c_n - c_n).abs() < 1e-12, "c_n at n={n}");
            assert!((step.iterate.value_at(0.25) - 2.0 / c_n).abs() < 1e-12);
            assert!((step.iterate.value_at(0.75) - (1.0 / nf) / c_n).abs() < 1e-12);
            let (c1, c2) = step.ratio_bounds;
            assert!((c1 - (1.0 / nf) / c_n).abs() < 1e-9);
            assert!((c2 - 2.0 / c_n).abs() < 1e-9);
        }
    }

    #[test]
    fn closure_step_without_null_region_has_unit_normalizer() {
        let p = Density::uniform();
        let q = Density::simple("two-level", &[(0.0, 0.5, 0.5), (0.5, 1.0, 1.5)]).unwrap();
        let step = closure_step(&p, &q, 2).unwrap();
        assert!((step.c_n - 1.0).abs() < 1e-12);
        for x in [0.2, 0.7] {
            assert!((step.iterate.value_at(x) - q.value_at(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn closure_step_clamps_the_center_where_it_undershoots() {
        // Center 2x dips below 1/4 on [0, 1/8): there the iterate carries
        // the scaled center instead of the flat target level.
        let p = Density::beta(2.0).unwrap();
        let q = Density::uniform();
        let step = closure_step(&p, &q, 4).unwrap();
        let c_n = 15.0 / 16.0;
        assert!((step.c_n - c_n).abs() < 1e-12);
        assert!((step.iterate.value_at(0.0625) - 8.0 * 0.0625 / c_n).abs() < 1e-12);
        assert!((step.iterate.value_at(0.5) - 1.0 / c_n).abs() < 1e-12);
        let (c1, c2) = step.ratio_bounds;
        assert!((c2 - 4.0 / c_n).abs() < 1e-6);
        assert!(c1 > 0.5 / c_n - 1e-9);
    }

    #[test]
    fn closure_step_rejects_non_simple_targets() {
        let p = Density::uniform();
        assert!(matches!(
            closure_step(&p, &Density::beta(2.0).unwrap(), 10),
            Err(Error::TargetNotSimple)
        ));
        assert!(matches!(
            closure_step(&p, &co419_density(), 10),
            Err(Error::TargetNotSimple)
        ));
    }

    #[test]
    fn closure_sequence_converges_in_total_variation() {
        let p = Density::uniform();
        let q = step_target();
        let seq = closure_sequence(&p, &q, &[10, 100, 1000]).unwrap();
        let mut last = f64::INFINITY;
        for it in &seq.iterates {
            let nf = it.n as f64;
            // Closed form: c_n = 1 + 1/(2n) and the L1 error is 1/(n + 1/2).
            assert!((it.c_n - (1.0 + 0.5 / nf)).abs() < 1e-9);
            assert!((it.l1_error - 1.0 / (nf + 0.5)).abs() < 1e-9);
            assert!(it.l1_error <= 2.0 / nf);
            assert!((it.c_n - 1.0).abs() <= 0.5 / nf + 1e-12);
            assert!(it.l1_error < last);
            last = it.l1_error;
        }
    }

    #[test]
    fn l1_distance_vanishes_on_identical_densities() {
        let u = Density::uniform();
        assert_eq!(l1_distance(&u, &u).unwrap().value(), Some(0.0));
        let d = divergenza_density();
        assert_eq!(l1_distance(&d, &d).unwrap().value(), Some(0.0));
    }

    #[test]
    fn l1_distance_matches_the_affine_oracle() {
        let u = Density::uniform();
        let b2 = Density::beta(2.0).unwrap();
        let v = l1_distance(&u, &b2).unwrap();
        assert!((v.expect_finite().unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn l1_distance_rejects_mismatched_families() {
        assert!(matches!(
            l1_distance(&divergenza_density(), &co419_density()),
            Err(Error::TailUnsupported { .. })
        ));
        assert!(matches!(
            l1_distance(&divergenza_density(), &Density::uniform()),
            Err(Error::TailUnsupported { .. })
        ));
    }

    #[test]
    fn exponential_blends_stay_connected() {
        let p = Density::uniform();
        let q = Density::beta(2.0).unwrap();
        let r = Density::beta(3.0).unwrap();
        let report =
            convexity_check(&p, &q, &r, &[0.0, 0.25, 0.5, 0.75, 1.0], ArcKind::Exponential)
                .unwrap();
        assert!(report.all_connected);
        assert_eq!(report.entries.len(), 5);
    }

    #[test]
    fn mixture_blends_of_bounded_ratios_stay_connected() {
        let p = Density::uniform();
        let q = Density::simple("step", &[(0.0, 0.5, 0.5), (0.5, 1.0, 1.5)]).unwrap();
        let r = Density::from_pieces("affine", alloc::vec![Piece::affine(0.0, 1.0, 0.8, 0.4)])
            .unwrap();
        let report =
            convexity_check(&p, &q, &r, &[0.0, 0.25, 0.5, 0.75, 1.0], ArcKind::Mixture).unwrap();
        assert!(report.all_connected);
    }

    #[test]
    fn convexity_check_requires_member_endpoints() {
        let p = Density::uniform();
        let q = Density::beta(2.0).unwrap();
        assert!(matches!(
            convexity_check(&p, &q, &divergenza_density(), &[0.5], ArcKind::Exponential),
            Err(Error::NotConnected)
        ));
    }

    #[test]
    fn entropy_weight_vanishes_on_equal_densities() {
        let u = Density::uniform();
        let v = phi_membership(&u, &u, &PhiSpec::XLogPlus).unwrap();
        assert_eq!(v.verdict, Verdict::Finite);
        assert_eq!(v.value(), Some(0.0));
        let d = divergenza_density();
        let v = phi_membership(&d, &d, &PhiSpec::XLogPlus).unwrap();
        assert_eq!(v.value(), Some(0.0));
    }

    #[test]
    fn entropy_weight_matches_the_affine_oracle() {
        let u = Density::uniform();
        let b2 = Density::beta(2.0).unwrap();
        let v = phi_membership(&u, &b2, &PhiSpec::XLogPlus).unwrap();
        // int_{1/2}^{1} 2x ln(2x) dx = ln 2 - 3/8.
        let want = core::f64::consts::LN_2 - 0.375;
        assert!((v.expect_finite().unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn entropy_weight_is_finite_on_every_iterate() {
        let p = Density::uniform();
        let q = step_target();
        for n in [2u64, 10, 100] {
            let step = closure_step(&p, &q, n).unwrap();
            let v = phi_membership(&p, &step.iterate, &PhiSpec::XLogPlus).unwrap();
            assert_eq!(v.verdict, Verdict::Finite);
            assert!(v.expect_finite().unwrap() >= 0.0);
        }
    }

    #[test]
    fn custom_weights_run_numerically() {
        let u = Density::uniform();
        let b2 = Density::beta(2.0).unwrap();
        let identity = PhiSpec::Custom {
            name: String::from("identity"),
            eval: Arc::new(|x| x),
        };
        // E_p[q/p] is the mass of q.
        let v = phi_membership(&u, &b2, &identity).unwrap();
        assert!((v.expect_finite().unwrap() - 1.0).abs() < 1e-6);
        // Identical families cancel to ratio one.
        let d = divergenza_density();
        let v = phi_membership(&d, &d, &identity).unwrap();
        assert!((v.expect_finite().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn phi_membership_rejects_one_sided_families() {
        assert!(matches!(
            phi_membership(&Density::uniform(), &divergenza_density(), &PhiSpec::XLogPlus),
            Err(Error::TailUnsupported { .. })
        ));
    }
}
