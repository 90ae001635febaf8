//! Integration of piecewise variables against Lebesgue measure or a finite
//! piecewise density. Closed forms are used whenever the product of the two
//! local forms reduces to power-log primitives; otherwise the engine falls
//! back to adaptive quadrature with endpoint-singularity annotations.
//! Divergence is decided analytically from endpoint exponents, never by
//! letting quadrature blow up.

use alloc::vec::Vec;

use super::powlog::{powlog_integral, PowlogIntegral};
use super::{
    eval_form, find_form, refine_breakpoints, Density, End, IntegralValue, LogAtom, Piece,
    PieceForm, PowerAtom, Provenance, QuadratureSpec, RandomVariable, Verdict,
};
use crate::kahan::KahanSum;
use crate::quad;
use crate::{Error, Result};

/// Reference measure for an integral: Lebesgue on [0,1] or a density.
#[derive(Clone, Copy)]
pub enum Weight<'a> {
    Lebesgue,
    Dens(&'a Density),
}

/// Relative slack granted to each closed-form part when accumulating the
/// reported error bound.
const CLOSED_FORM_ULPS: f64 = 8.0 * f64::EPSILON;

/// `int f d(weight)` over [0,1]. Regions not covered by `f` contribute 0.
/// Densities with infinite tails are rejected here; tail-aware operations
/// go through the series routines that know the tail families.
pub fn integrate(f: &RandomVariable, weight: Weight<'_>, spec: &QuadratureSpec) -> Result<IntegralValue> {
    let wpieces: &[Piece] = match weight {
        Weight::Lebesgue => &[],
        Weight::Dens(d) => {
            if d.has_tail() {
                return Err(Error::TailUnsupported { op: "integrate against tailed density" });
            }
            &d.pieces
        }
    };
    let mut sum = KahanSum::new();
    let mut err = 0.0;
    let mut provenance = Provenance::ClosedForm;
    let mut inconclusive = false;
    for fp in &f.pieces {
        let cuts = refine_breakpoints(&[wpieces], fp.lo, fp.hi);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let wform = match weight {
                Weight::Lebesgue => &PieceForm::Constant(1.0),
                Weight::Dens(_) => {
                    &find_form(wpieces, mid).ok_or(Error::BadCoverage { at: mid })?.form
                }
            };
            let part = integrate_product(&fp.form, wform, lo, hi, spec)?;
            match part.verdict {
                Verdict::Divergent => return Ok(IntegralValue::divergent(part.provenance)),
                Verdict::Inconclusive => inconclusive = true,
                Verdict::Finite => {}
            }
            sum += part.value().expect("non-divergent part has estimate");
            err += part.error_bound;
            if part.provenance == Provenance::Quadrature {
                provenance = Provenance::Quadrature;
            }
        }
    }
    if inconclusive {
        Ok(IntegralValue::inconclusive(sum.total(), err, provenance))
    } else {
        Ok(IntegralValue::finite(sum.total(), err, provenance))
    }
}

/// Expectation of `f` under the density `p`.
pub fn expectation(f: &RandomVariable, p: &Density, spec: &QuadratureSpec) -> Result<IntegralValue> {
    integrate(f, Weight::Dens(p), spec)
}

/// Mass of a density on `[a, b]`, including tail contributions.
pub fn mass_between(d: &Density, a: f64, b: f64, spec: &QuadratureSpec) -> Result<IntegralValue> {
    let a = crate::fm::max(a, 0.0);
    let b = crate::fm::min(b, 1.0);
    if !(a < b) {
        return Ok(IntegralValue::finite(0.0, 0.0, Provenance::ClosedForm));
    }
    let mut sum = KahanSum::new();
    let mut err = 0.0;
    let mut provenance = Provenance::ClosedForm;
    for p in &d.pieces {
        let lo = crate::fm::max(p.lo, a);
        let hi = crate::fm::min(p.hi, b);
        if lo >= hi {
            continue;
        }
        let part = form_mass(&p.form, lo, hi, spec)?;
        match part.verdict {
            Verdict::Divergent => return Ok(IntegralValue::divergent(part.provenance)),
            _ => {
                sum += part.value().expect("estimate present");
                err += part.error_bound;
                if part.provenance == Provenance::Quadrature {
                    provenance = Provenance::Quadrature;
                }
            }
        }
    }
    if let Some(tail) = &d.tail {
        let t = tail.mass_on(a, b);
        sum += t.partial_sum;
        err += t.tail_bound;
        provenance = Provenance::SeriesWithTail;
    }
    Ok(IntegralValue::finite(sum.total(), err, provenance))
}

/// `int form dx` over `[lo, hi]`.
pub(crate) fn form_mass(form: &PieceForm, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<IntegralValue> {
    integrate_product(form, &PieceForm::Constant(1.0), lo, hi, spec)
}

/// `int f * w dx` over `[lo, hi]` for two raw piece forms; used by series
/// modules that assemble their own pieces outside a full density.
pub(crate) fn integrate_forms(
    f: &PieceForm,
    w: &PieceForm,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<IntegralValue> {
    integrate_product(f, w, lo, hi, spec)
}

fn is_zero_form(form: &PieceForm) -> bool {
    match form {
        PieceForm::Constant(c) => *c == 0.0,
        PieceForm::PowerSum(atoms) => atoms.iter().all(|a| a.coeff == 0.0),
        _ => false,
    }
}

/// Integrates the product of two piece forms over `[lo, hi]`.
fn integrate_product(
    f: &PieceForm,
    w: &PieceForm,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<IntegralValue> {
    if is_zero_form(f) || is_zero_form(w) {
        return Ok(IntegralValue::finite(0.0, 0.0, Provenance::ClosedForm));
    }
    // Analytic divergence check: product behaves like d^e at each endpoint
    // with e the sum of the endpoint exponents; e <= -1 is not integrable
    // (logarithmic factors only make it worse at e = -1).
    let fp = Piece { lo, hi, form: f.clone() };
    let wp = Piece { lo, hi, form: w.clone() };
    for end in [End::Left, End::Right] {
        let e = combine_exponents(fp.endpoint_exponent(end), wp.endpoint_exponent(end));
        if e <= -1.0 {
            return Ok(IntegralValue::divergent(Provenance::ClosedForm));
        }
    }
    if let Some(value) = closed_form_product(f, w, lo, hi)? {
        return Ok(match value {
            PowlogIntegral::Finite(v) => {
                IntegralValue::finite(v, CLOSED_FORM_ULPS * v.abs().max(1.0), Provenance::ClosedForm)
            }
            PowlogIntegral::Divergent => IntegralValue::divergent(Provenance::ClosedForm),
        });
    }
    quadrature_product(&fp, &wp, spec)
}

fn combine_exponents(a: f64, b: f64) -> f64 {
    // +inf marks an identically-zero side, which was already
    // short-circuited; guard so it stays harmless. -inf marks values that
    // outgrow every power and must dominate the sum.
    if a == f64::INFINITY || b == f64::INFINITY {
        return 0.0;
    }
    a + b
}

/// Attempts a closed form for the product; `None` means irreducible.
fn closed_form_product(
    f: &PieceForm,
    w: &PieceForm,
    lo: f64,
    hi: f64,
) -> Result<Option<PowlogIntegral>> {
    use PieceForm::*;
    // Normalize constants into single-atom power sums and put any LogSum on
    // the left so each shape pair is handled once.
    let (a, b) = match (f, w) {
        (Expr(_), _) | (_, Expr(_)) => return Ok(None),
        (LogSum { .. }, LogSum { .. }) => return Ok(None),
        (LogSum { .. }, _) => (f, w),
        (_, LogSum { .. }) => (w, f),
        _ => (f, w),
    };
    let to_atoms = |form: &PieceForm| -> Option<Vec<PowerAtom>> {
        match form {
            Constant(c) => Some(alloc::vec![PowerAtom::new(*c, lo, 0.0)]),
            PowerSum(atoms) => Some(atoms.iter().copied().filter(|a| a.coeff != 0.0).collect()),
            _ => None,
        }
    };
    match a {
        LogSum { offset, atoms } => {
            let watoms = match to_atoms(b) {
                Some(v) => v,
                None => return Ok(None),
            };
            let mut total = 0.0;
            for wa in &watoms {
                match atom_integral(wa, lo, hi) {
                    PowlogIntegral::Finite(v) => total += offset * v,
                    PowlogIntegral::Divergent => return Ok(Some(PowlogIntegral::Divergent)),
                }
                for la in atoms {
                    match atom_log_integral(wa, la, lo, hi) {
                        Some(PowlogIntegral::Finite(v)) => total += v,
                        Some(PowlogIntegral::Divergent) => {
                            return Ok(Some(PowlogIntegral::Divergent))
                        }
                        None => return Ok(None),
                    }
                }
            }
            Ok(Some(PowlogIntegral::Finite(total)))
        }
        _ => {
            let fa = match to_atoms(a) {
                Some(v) => v,
                None => return Ok(None),
            };
            let wa = match to_atoms(b) {
                Some(v) => v,
                None => return Ok(None),
            };
            let mut total = 0.0;
            for x in &fa {
                for y in &wa {
                    let merged = merge_atoms(x, y);
                    let m = match merged {
                        Some(atom) => atom,
                        None => return Ok(None),
                    };
                    match atom_integral(&m, lo, hi) {
                        PowlogIntegral::Finite(v) => total += v,
                        PowlogIntegral::Divergent => return Ok(Some(PowlogIntegral::Divergent)),
                    }
                }
            }
            Ok(Some(PowlogIntegral::Finite(total)))
        }
    }
}

/// Product of two power atoms when it is again a power atom: one factor
/// constant, or both anchored at the same point.
fn merge_atoms(x: &PowerAtom, y: &PowerAtom) -> Option<PowerAtom> {
    if x.exponent == 0.0 {
        return Some(PowerAtom::new(x.coeff * y.coeff, y.anchor, y.exponent));
    }
    if y.exponent == 0.0 {
        return Some(PowerAtom::new(x.coeff * y.coeff, x.anchor, x.exponent));
    }
    if x.anchor == y.anchor {
        return Some(PowerAtom::new(x.coeff * y.coeff, x.anchor, x.exponent + y.exponent));
    }
    None
}

/// `int_lo^hi c |x-a|^r dx`, splitting at an interior anchor.
fn atom_integral(atom: &PowerAtom, lo: f64, hi: f64) -> PowlogIntegral {
    if atom.coeff == 0.0 {
        return PowlogIntegral::Finite(0.0);
    }
    if atom.exponent == 0.0 {
        return PowlogIntegral::Finite(atom.coeff * (hi - lo));
    }
    if atom.anchor > lo && atom.anchor < hi {
        let left = atom_integral(atom, lo, atom.anchor);
        let right = atom_integral(atom, atom.anchor, hi);
        return match (left, right) {
            (PowlogIntegral::Finite(a), PowlogIntegral::Finite(b)) => {
                PowlogIntegral::Finite(a + b)
            }
            _ => PowlogIntegral::Divergent,
        };
    }
    let (t1, t2) = anchor_distances(atom.anchor, lo, hi);
    match powlog_integral(atom.exponent, 0, t1, t2) {
        PowlogIntegral::Finite(v) => PowlogIntegral::Finite(atom.coeff * v),
        PowlogIntegral::Divergent => PowlogIntegral::Divergent,
    }
}

/// `int_lo^hi c_w |x-a_w|^r * c_l ln|x-a_l| dx` when it reduces to a
/// power-log primitive: shared anchor, or a constant power factor.
fn atom_log_integral(
    wa: &PowerAtom,
    la: &LogAtom,
    lo: f64,
    hi: f64,
) -> Option<PowlogIntegral> {
    if wa.coeff == 0.0 || la.coeff == 0.0 {
        return Some(PowlogIntegral::Finite(0.0));
    }
    let c = wa.coeff * la.coeff;
    if wa.exponent == 0.0 {
        // Pure log integral anchored at the log's anchor.
        if la.anchor > lo && la.anchor < hi {
            let l = atom_log_integral(wa, la, lo, la.anchor)?;
            let r = atom_log_integral(wa, la, la.anchor, hi)?;
            return match (l, r) {
                (PowlogIntegral::Finite(a), PowlogIntegral::Finite(b)) => {
                    Some(PowlogIntegral::Finite(a + b))
                }
                _ => Some(PowlogIntegral::Divergent),
            };
        }
        let (t1, t2) = anchor_distances(la.anchor, lo, hi);
        return match powlog_integral(0.0, 1, t1, t2) {
            PowlogIntegral::Finite(v) => Some(PowlogIntegral::Finite(c * v)),
            PowlogIntegral::Divergent => Some(PowlogIntegral::Divergent),
        };
    }
    if wa.anchor == la.anchor {
        let a = wa.anchor;
        if a > lo && a < hi {
            // Interior shared anchor: split.
            let l = atom_log_integral(wa, la, lo, a)?;
            let r = atom_log_integral(wa, la, a, hi)?;
            return match (l, r) {
                (PowlogIntegral::Finite(x), PowlogIntegral::Finite(y)) => {
                    Some(PowlogIntegral::Finite(x + y))
                }
                _ => Some(PowlogIntegral::Divergent),
            };
        }
        let (t1, t2) = anchor_distances(a, lo, hi);
        return match powlog_integral(wa.exponent, 1, t1, t2) {
            PowlogIntegral::Finite(v) => Some(PowlogIntegral::Finite(c * v)),
            PowlogIntegral::Divergent => Some(PowlogIntegral::Divergent),
        };
    }
    None
}

/// Distances from the anchor to the interval endpoints, ordered and clamped
/// so boundary-tolerance jitter cannot produce a negative lower distance.
fn anchor_distances(anchor: f64, lo: f64, hi: f64) -> (f64, f64) {
    if anchor <= lo {
        (crate::fm::max(lo - anchor, 0.0), hi - anchor)
    } else {
        (crate::fm::max(anchor - hi, 0.0), anchor - lo)
    }
}

fn quadrature_product(fp: &Piece, wp: &Piece, spec: &QuadratureSpec) -> Result<IntegralValue> {
    let left = combine_exponents(
        fp.endpoint_exponent(End::Left),
        wp.endpoint_exponent(End::Left),
    );
    let right = combine_exponents(
        fp.endpoint_exponent(End::Right),
        wp.endpoint_exponent(End::Right),
    );
    let ff = fp.form.clone();
    let wf = wp.form.clone();
    let mut eval = move |x: f64| eval_form(&ff, x) * eval_form(&wf, x);
    let q = quad::adaptive_annotated(
        &mut eval,
        fp.lo,
        fp.hi,
        crate::fm::min(left, 0.0),
        crate::fm::min(right, 0.0),
        spec.abs_tol,
        spec.max_segments,
    )?;
    if q.converged {
        Ok(IntegralValue::finite(q.value, q.error_bound, Provenance::Quadrature))
    } else {
        Ok(IntegralValue::inconclusive(q.value, q.error_bound, Provenance::Quadrature))
    }
}

/// Locates sign changes of `f` on `[lo, hi]` by scanning `grid` cells and
/// bisecting each bracketing cell to floating-point resolution. Returns the
/// refined crossing points in ascending order.
pub(crate) fn sign_change_points(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    grid: u32,
) -> Vec<f64> {
    let mut out = Vec::new();
    let n = grid.max(2);
    let h = (hi - lo) / n as f64;
    let mut x_prev = lo + 1e-15 * (hi - lo);
    let mut f_prev = f(x_prev);
    for i in 1..=n {
        let x = if i == n { hi - 1e-15 * (hi - lo) } else { lo + h * i as f64 };
        let fx = f(x);
        if f_prev == 0.0 {
            out.push(x_prev);
        } else if fx != 0.0 && (f_prev < 0.0) != (fx < 0.0) {
            let (mut a, mut b) = (x_prev, x);
            let (mut fa, _) = (f_prev, fx);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let fmv = f(m);
                if fmv == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if (fa < 0.0) == (fmv < 0.0) {
                    a = m;
                    fa = fmv;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        x_prev = x;
        f_prev = fx;
    }
    out
}
