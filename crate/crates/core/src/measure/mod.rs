//! Piecewise-analytic descriptors for densities and random variables on
//! `[0,1]`, together with exact and adaptive integration.
//!
//! A piece lives on a half-open interval `(lo, hi]` and carries one of four
//! forms: a constant, a finite sum of power atoms `c*|x-a|^r` with anchors
//! on or outside the interval, a logarithmic sum `c0 + sum c_i*ln|x-a_i|`,
//! or an annotated expression. Densities may append an infinite tail of
//! power pieces accumulating at a cluster point; those are handled by the
//! series machinery in [`crate::counterexamples`].

mod integrate;
mod powlog;

pub use integrate::{expectation, integrate, mass_between, Weight};
pub(crate) use integrate::{integrate_forms, sign_change_points};
pub use powlog::{powlog_antiderivative, powlog_integral, PowlogIntegral};

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::counterexamples::Tail;
use crate::fm;
use crate::{Error, Result};

/// Finiteness classification of an integral or series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Finite,
    Divergent,
    Inconclusive,
}

/// How a numeric value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    SeriesWithTail,
}

/// Value of an integral together with a rigorous error bound and a
/// finiteness verdict. Divergent results carry no value.
#[derive(Clone, Copy, Debug)]
pub struct IntegralValue {
    value: Option<f64>,
    pub error_bound: f64,
    pub verdict: Verdict,
    pub provenance: Provenance,
}

impl IntegralValue {
    pub fn finite(value: f64, error_bound: f64, provenance: Provenance) -> Self {
        Self { value: Some(value), error_bound, verdict: Verdict::Finite, provenance }
    }

    pub fn divergent(provenance: Provenance) -> Self {
        Self { value: None, error_bound: f64::INFINITY, verdict: Verdict::Divergent, provenance }
    }

    pub fn inconclusive(estimate: f64, error_bound: f64, provenance: Provenance) -> Self {
        Self { value: Some(estimate), error_bound, verdict: Verdict::Inconclusive, provenance }
    }

    /// The value when the verdict is Finite; Inconclusive estimates are
    /// also exposed here so reports can show them, guarded by the verdict.
    pub fn value(&self) -> Option<f64> {
        self.value
    }

    pub fn expect_finite(&self) -> Result<f64> {
        match self.verdict {
            Verdict::Finite => Ok(self.value.expect("finite integral carries a value")),
            _ => Err(Error::VerdictMismatch {
                context: alloc::format!("expected finite integral, got {:?}", self.verdict),
            }),
        }
    }
}

/// Budget and tolerance for adaptive quadrature fallbacks.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub max_segments: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-11, max_segments: 4000 }
    }
}

/// Convergence of `int_0^w t^r dt` near the anchor: finite iff r > -1.
pub fn classify_power_convergence(exponent: f64) -> Verdict {
    if exponent > -1.0 {
        Verdict::Finite
    } else {
        Verdict::Divergent
    }
}

/// `coeff * |x - anchor|^exponent`. The anchor never lies strictly inside
/// the piece that carries the atom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerAtom {
    pub coeff: f64,
    pub anchor: f64,
    pub exponent: f64,
}

impl PowerAtom {
    pub fn new(coeff: f64, anchor: f64, exponent: f64) -> Self {
        Self { coeff, anchor, exponent }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.exponent == 0.0 {
            return self.coeff;
        }
        let t = fm::abs(x - self.anchor);
        if t == 0.0 {
            return if self.exponent > 0.0 {
                0.0
            } else if self.coeff >= 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
        }
        self.coeff * fm::powf(t, self.exponent)
    }
}

/// `coeff * ln|x - anchor|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogAtom {
    pub coeff: f64,
    pub anchor: f64,
}

/// Closed-form evaluator with declared endpoint behavior. `left_exponent`
/// and `right_exponent` annotate power singularities of the values at the
/// piece endpoints (0 for a regular endpoint); `range` declares exact value
/// bounds when the caller knows them analytically.
#[derive(Clone)]
pub struct Expression {
    pub eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub left_exponent: f64,
    pub right_exponent: f64,
    pub range: Option<(f64, f64)>,
}

impl core::fmt::Debug for Expression {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Expression")
            .field("left_exponent", &self.left_exponent)
            .field("right_exponent", &self.right_exponent)
            .field("range", &self.range)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum PieceForm {
    Constant(f64),
    PowerSum(Vec<PowerAtom>),
    LogSum { offset: f64, atoms: Vec<LogAtom> },
    Expr(Expression),
}

/// One piece of a piecewise descriptor on the interval `(lo, hi]`.
#[derive(Clone, Debug)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub form: PieceForm,
}

/// Which endpoint of a piece.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum End {
    Left,
    Right,
}

impl Piece {
    pub fn constant(lo: f64, hi: f64, c: f64) -> Self {
        Self { lo, hi, form: PieceForm::Constant(c) }
    }

    /// `c * (x - lo)^r`, singular or vanishing at the left endpoint.
    pub fn power_left(lo: f64, hi: f64, coeff: f64, exponent: f64) -> Self {
        Self { lo, hi, form: PieceForm::PowerSum(alloc::vec![PowerAtom::new(coeff, lo, exponent)]) }
    }

    /// `c * (hi - x)^r`, singular or vanishing at the right endpoint.
    pub fn power_right(lo: f64, hi: f64, coeff: f64, exponent: f64) -> Self {
        Self { lo, hi, form: PieceForm::PowerSum(alloc::vec![PowerAtom::new(coeff, hi, exponent)]) }
    }

    /// `c * x^r` anchored at the origin regardless of the interval.
    pub fn beta_power(lo: f64, hi: f64, coeff: f64, exponent: f64) -> Self {
        Self { lo, hi, form: PieceForm::PowerSum(alloc::vec![PowerAtom::new(coeff, 0.0, exponent)]) }
    }

    /// `a + b*x`.
    pub fn affine(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        Self {
            lo,
            hi,
            form: PieceForm::PowerSum(alloc::vec![
                PowerAtom::new(a, 0.0, 0.0),
                PowerAtom::new(b, 0.0, 1.0),
            ]),
        }
    }

    pub fn log_ratio(lo: f64, hi: f64, offset: f64, atoms: Vec<LogAtom>) -> Self {
        Self { lo, hi, form: PieceForm::LogSum { offset, atoms } }
    }

    pub fn expr(lo: f64, hi: f64, e: Expression) -> Self {
        Self { lo, hi, form: PieceForm::Expr(e) }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo < x && x <= self.hi) || (x == 0.0 && self.lo == 0.0)
    }

    pub fn value_at(&self, x: f64) -> f64 {
        eval_form(&self.form, x)
    }

    /// Restriction of the piece to a subinterval of its own interval.
    /// Forms restrict verbatim; anchors stay valid because intervals only
    /// shrink.
    pub fn restricted(&self, lo: f64, hi: f64) -> Piece {
        Piece { lo, hi, form: self.form.clone() }
    }

    /// Effective power exponent of the values at one endpoint: the rate e
    /// such that the form behaves like `c * d(x)^e` with d the distance to
    /// the endpoint (0 means a finite nonzero limit; a logarithmic factor
    /// is ignored, callers that care use `has_log_factor`).
    pub fn endpoint_exponent(&self, end: End) -> f64 {
        let at = match end {
            End::Left => self.lo,
            End::Right => self.hi,
        };
        match &self.form {
            PieceForm::Constant(c) => {
                if *c == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            PieceForm::PowerSum(atoms) => {
                let mut best = f64::INFINITY;
                let mut any = false;
                for a in atoms {
                    if a.coeff == 0.0 {
                        continue;
                    }
                    any = true;
                    let e = if a.anchor == at { a.exponent } else { 0.0 };
                    if e < best {
                        best = e;
                    }
                }
                if any {
                    best
                } else {
                    f64::INFINITY
                }
            }
            // Log divergence is slower than any power: rate 0 with respect
            // to power comparison scales.
            PieceForm::LogSum { .. } => 0.0,
            PieceForm::Expr(e) => match end {
                End::Left => e.left_exponent,
                End::Right => e.right_exponent,
            },
        }
    }

    pub fn has_log_factor(&self) -> bool {
        matches!(&self.form, PieceForm::LogSum { atoms, .. } if !atoms.is_empty())
    }
}

pub fn eval_form(form: &PieceForm, x: f64) -> f64 {
    match form {
        PieceForm::Constant(c) => *c,
        PieceForm::PowerSum(atoms) => {
            let mut s = 0.0;
            for a in atoms {
                s += a.eval(x);
            }
            s
        }
        PieceForm::LogSum { offset, atoms } => {
            let mut s = *offset;
            for a in atoms {
                let t = fm::abs(x - a.anchor);
                if t == 0.0 {
                    return if a.coeff >= 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
                }
                s += a.coeff * fm::ln(t);
            }
            s
        }
        PieceForm::Expr(e) => (e.eval)(x),
    }
}

/// Essential bounds of the values of a form on `(lo, hi)`. `exact` is true
/// when the bounds come from monotonicity or declared ranges rather than
/// interval arithmetic or sampling.
#[derive(Clone, Copy, Debug)]
pub struct RangeBound {
    pub lo: f64,
    pub hi: f64,
    pub exact: bool,
}

fn atom_direction(a: &PowerAtom, lo: f64) -> i8 {
    // Sign of d/dx of the atom on the piece: anchors left of the piece make
    // |x-a| increase with x, anchors right of it make it decrease.
    if a.coeff == 0.0 || a.exponent == 0.0 {
        return 0;
    }
    let increasing_dist = a.anchor <= lo;
    let up = (a.coeff > 0.0) == (a.exponent > 0.0);
    match (increasing_dist, up) {
        (true, true) | (false, false) => 1,
        _ => -1,
    }
}

fn limit_value(form: &PieceForm, piece_lo: f64, piece_hi: f64, end: End) -> f64 {
    // One-sided limit of the values at an endpoint, resolving anchored
    // atoms to 0 or +-inf by exponent sign.
    let at = match end {
        End::Left => piece_lo,
        End::Right => piece_hi,
    };
    match form {
        PieceForm::Constant(c) => *c,
        PieceForm::PowerSum(atoms) => {
            let mut s = 0.0;
            for a in atoms {
                let v = a.eval(at);
                if v.is_infinite() {
                    return v;
                }
                s += v;
            }
            s
        }
        PieceForm::LogSum { .. } => eval_form(form, at),
        PieceForm::Expr(e) => {
            let exp = match end {
                End::Left => e.left_exponent,
                End::Right => e.right_exponent,
            };
            if exp < 0.0 {
                f64::INFINITY
            } else {
                (e.eval)(at)
            }
        }
    }
}

pub fn form_bounds(form: &PieceForm, lo: f64, hi: f64) -> RangeBound {
    match form {
        PieceForm::Constant(c) => RangeBound { lo: *c, hi: *c, exact: true },
        PieceForm::PowerSum(atoms) => {
            let mut dir = 0i8;
            let mut monotone = true;
            for a in atoms {
                let d = atom_direction(a, lo);
                if d == 0 {
                    continue;
                }
                if dir == 0 {
                    dir = d;
                } else if dir != d {
                    monotone = false;
                }
            }
            if monotone {
                let a = limit_value(form, lo, hi, End::Left);
                let b = limit_value(form, lo, hi, End::Right);
                RangeBound { lo: fm::min(a, b), hi: fm::max(a, b), exact: true }
            } else {
                // Interval arithmetic over atoms: sound but possibly loose.
                let mut sum_lo = 0.0;
                let mut sum_hi = 0.0;
                for a in atoms {
                    let e1 = a.eval(lo);
                    let e2 = a.eval(hi);
                    sum_lo += fm::min(e1, e2);
                    sum_hi += fm::max(e1, e2);
                }
                RangeBound { lo: sum_lo, hi: sum_hi, exact: false }
            }
        }
        PieceForm::LogSum { atoms, .. } => {
            let mut dir = 0i8;
            let mut monotone = true;
            for a in atoms {
                if a.coeff == 0.0 {
                    continue;
                }
                let increasing_dist = a.anchor <= lo;
                let d = if (a.coeff > 0.0) == increasing_dist { 1i8 } else { -1 };
                if dir == 0 {
                    dir = d;
                } else if dir != d {
                    monotone = false;
                }
            }
            let a = eval_form(form, lo);
            let b = eval_form(form, hi);
            RangeBound { lo: fm::min(a, b), hi: fm::max(a, b), exact: monotone }
        }
        PieceForm::Expr(e) => match e.range {
            Some((a, b)) => RangeBound { lo: a, hi: b, exact: true },
            None => {
                let mut best_lo = f64::INFINITY;
                let mut best_hi = f64::NEG_INFINITY;
                let n = 64;
                for i in 1..n {
                    let x = lo + (hi - lo) * (i as f64) / (n as f64);
                    let v = (e.eval)(x);
                    best_lo = fm::min(best_lo, v);
                    best_hi = fm::max(best_hi, v);
                }
                RangeBound { lo: best_lo, hi: best_hi, exact: false }
            }
        },
    }
}

const BOUNDARY_TOL: f64 = 1e-12;

fn same_boundary(a: f64, b: f64) -> bool {
    fm::abs(a - b) <= BOUNDARY_TOL
}

/// A probability density on [0,1]. Pieces are ordered and contiguous; an
/// optional tail of infinitely many power pieces continues after them.
#[derive(Clone, Debug)]
pub struct Density {
    pub name: String,
    pub pieces: Vec<Piece>,
    pub tail: Option<Tail>,
    pub strictly_positive: bool,
    pub normalized: bool,
}

impl Density {
    /// Builds and validates a finite piecewise density: ordered contiguous
    /// pieces covering [0,1], nonnegative values, total mass 1 within the
    /// closed-form tolerance.
    pub fn from_pieces(name: &str, mut pieces: Vec<Piece>) -> Result<Density> {
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        validate_cover(&pieces, 0.0, 1.0)?;
        let strictly_positive = validate_nonnegative(&pieces)?;
        let mut d = Density {
            name: String::from(name),
            pieces,
            tail: None,
            strictly_positive,
            normalized: false,
        };
        let mass = d.total_mass(&QuadratureSpec::default())?;
        let m = mass.expect_finite()?;
        let tol = match mass.provenance {
            Provenance::ClosedForm => 1e-9,
            _ => 1e-6,
        };
        if fm::abs(m - 1.0) > tol + mass.error_bound {
            return Err(Error::NotNormalized { mass: m });
        }
        d.normalized = true;
        Ok(d)
    }

    /// Builds a tailed density; validation of mass uses the tail series.
    /// Used by the counterexample and filtration constructors, which
    /// guarantee coverage structurally.
    pub(crate) fn with_tail(
        name: &str,
        pieces: Vec<Piece>,
        tail: Tail,
        strictly_positive: bool,
    ) -> Density {
        Density {
            name: String::from(name),
            pieces,
            tail: Some(tail),
            strictly_positive,
            normalized: true,
        }
    }

    pub fn uniform() -> Density {
        Density {
            name: String::from("uniform"),
            pieces: alloc::vec![Piece::constant(0.0, 1.0, 1.0)],
            tail: None,
            strictly_positive: true,
            normalized: true,
        }
    }

    /// `beta (r) x^{r-1}` on (0,1], normalized for every r > 0.
    pub fn beta(r: f64) -> Result<Density> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter { what: "beta exponent", value: r });
        }
        Ok(Density {
            name: alloc::format!("beta({r})"),
            pieces: alloc::vec![Piece::beta_power(0.0, 1.0, r, r - 1.0)],
            tail: None,
            strictly_positive: true,
            normalized: true,
        })
    }

    /// Piecewise-constant density from `(lo, hi, value)` steps.
    pub fn simple(name: &str, steps: &[(f64, f64, f64)]) -> Result<Density> {
        let pieces = steps.iter().map(|&(lo, hi, v)| Piece::constant(lo, hi, v)).collect();
        Density::from_pieces(name, pieces)
    }

    pub fn has_tail(&self) -> bool {
        self.tail.is_some()
    }

    pub fn value_at(&self, x: f64) -> f64 {
        for p in &self.pieces {
            if p.contains(x) {
                return p.value_at(x);
            }
        }
        if let Some(tail) = &self.tail {
            if let Some(piece) = tail.piece_containing(x) {
                return piece.value_at(x);
            }
        }
        0.0
    }

    /// Total mass including the tail series.
    pub fn total_mass(&self, spec: &QuadratureSpec) -> Result<IntegralValue> {
        let mut sum = crate::kahan::KahanSum::new();
        let mut err = 0.0;
        let mut provenance = Provenance::ClosedForm;
        for p in &self.pieces {
            let m = integrate::form_mass(&p.form, p.lo, p.hi, spec)?;
            match m.verdict {
                Verdict::Finite | Verdict::Inconclusive => {
                    sum += m.value().expect("mass estimate present");
                    err += m.error_bound;
                    if m.provenance == Provenance::Quadrature {
                        provenance = Provenance::Quadrature;
                    }
                    if m.verdict == Verdict::Inconclusive {
                        return Ok(IntegralValue::inconclusive(sum.total(), err, m.provenance));
                    }
                }
                Verdict::Divergent => return Ok(IntegralValue::divergent(m.provenance)),
            }
        }
        if let Some(tail) = &self.tail {
            let t = tail.mass();
            sum += t.partial_sum;
            err += t.tail_bound;
            provenance = Provenance::SeriesWithTail;
        }
        Ok(IntegralValue::finite(sum.total(), err, provenance))
    }

    /// Essential bounds of the density values over (0,1).
    pub fn essential_bounds(&self) -> RangeBound {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut exact = true;
        for p in &self.pieces {
            let b = form_bounds(&p.form, p.lo, p.hi);
            lo = fm::min(lo, b.lo);
            hi = fm::max(hi, b.hi);
            exact &= b.exact;
        }
        if let Some(tail) = &self.tail {
            let b = tail.value_bounds();
            lo = fm::min(lo, b.0);
            hi = fm::max(hi, b.1);
        }
        RangeBound { lo, hi, exact }
    }

    /// True when the two descriptors are structurally identical (same piece
    /// lattice, forms, and tail description).
    pub fn same_descriptor(&self, other: &Density) -> bool {
        if self.pieces.len() != other.pieces.len() {
            return false;
        }
        for (a, b) in self.pieces.iter().zip(&other.pieces) {
            if !same_boundary(a.lo, b.lo) || !same_boundary(a.hi, b.hi) {
                return false;
            }
            if !forms_equal(&a.form, &b.form) {
                return false;
            }
        }
        match (&self.tail, &other.tail) {
            (None, None) => true,
            (Some(a), Some(b)) => a.same_descriptor(b),
            _ => false,
        }
    }
}

fn forms_equal(a: &PieceForm, b: &PieceForm) -> bool {
    match (a, b) {
        (PieceForm::Constant(x), PieceForm::Constant(y)) => x == y,
        (PieceForm::PowerSum(x), PieceForm::PowerSum(y)) => x == y,
        (
            PieceForm::LogSum { offset: o1, atoms: a1 },
            PieceForm::LogSum { offset: o2, atoms: a2 },
        ) => o1 == o2 && a1 == a2,
        _ => false,
    }
}

fn validate_cover(pieces: &[Piece], lo: f64, hi: f64) -> Result<()> {
    if pieces.is_empty() {
        return Err(Error::BadCoverage { at: lo });
    }
    if !same_boundary(pieces[0].lo, lo) {
        return Err(Error::BadCoverage { at: lo });
    }
    for w in pieces.windows(2) {
        if !same_boundary(w[0].hi, w[1].lo) {
            return Err(Error::BadCoverage { at: w[0].hi });
        }
    }
    let last = pieces.last().expect("non-empty");
    if !same_boundary(last.hi, hi) {
        return Err(Error::BadCoverage { at: last.hi });
    }
    for p in pieces {
        if !(p.lo < p.hi) {
            return Err(Error::BadCoverage { at: p.lo });
        }
    }
    Ok(())
}

/// Checks values are nonnegative; returns whether the density is strictly
/// positive up to a null set.
fn validate_nonnegative(pieces: &[Piece]) -> Result<bool> {
    let mut strictly = true;
    for p in pieces {
        let b = form_bounds(&p.form, p.lo, p.hi);
        if b.lo < 0.0 {
            if b.exact {
                return Err(Error::NotPositive { at: p.lo });
            }
            // Loose bounds: verify on a grid before giving up.
            let n = 257;
            for i in 0..=n {
                let x = p.lo + (p.hi - p.lo) * (i as f64) / (n as f64);
                let v = p.value_at(x);
                if v < 0.0 {
                    return Err(Error::NotPositive { at: x });
                }
            }
        }
        match &p.form {
            PieceForm::Constant(c) if *c == 0.0 => strictly = false,
            _ => {
                if b.hi <= 0.0 {
                    strictly = false;
                }
            }
        }
    }
    Ok(strictly)
}

/// A signed piecewise random variable. Intervals not covered by any piece
/// take the value 0, so indicator-truncated variables need no explicit
/// zero pieces.
#[derive(Clone, Debug)]
pub struct RandomVariable {
    pub name: String,
    pub pieces: Vec<Piece>,
}

impl RandomVariable {
    pub fn from_pieces(name: &str, mut pieces: Vec<Piece>) -> RandomVariable {
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        RandomVariable { name: String::from(name), pieces }
    }

    pub fn constant(c: f64) -> RandomVariable {
        RandomVariable {
            name: alloc::format!("const({c})"),
            pieces: alloc::vec![Piece::constant(0.0, 1.0, c)],
        }
    }

    pub fn zero() -> RandomVariable {
        RandomVariable { name: String::from("zero"), pieces: Vec::new() }
    }

    pub fn simple(name: &str, steps: &[(f64, f64, f64)]) -> RandomVariable {
        let pieces = steps.iter().map(|&(lo, hi, v)| Piece::constant(lo, hi, v)).collect();
        RandomVariable::from_pieces(name, pieces)
    }

    pub fn value_at(&self, x: f64) -> f64 {
        for p in &self.pieces {
            if p.contains(x) {
                return p.value_at(x);
            }
        }
        0.0
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| match &p.form {
            PieceForm::Constant(c) => *c == 0.0,
            PieceForm::PowerSum(atoms) => atoms.iter().all(|a| a.coeff == 0.0),
            _ => false,
        })
    }

    /// Rescales the variable by a constant factor.
    pub fn scaled(&self, factor: f64) -> RandomVariable {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece { lo: p.lo, hi: p.hi, form: scale_form(&p.form, factor) })
            .collect();
        RandomVariable { name: alloc::format!("{}*{factor}", self.name), pieces }
    }

    /// Shifts the variable by a constant.
    pub fn shifted(&self, offset: f64) -> RandomVariable {
        let mut pieces: Vec<Piece> = self
            .pieces
            .iter()
            .map(|p| Piece { lo: p.lo, hi: p.hi, form: shift_form(&p.form, offset) })
            .collect();
        // Uncovered regions hold the value 0, which shifts too.
        let covered: Vec<(f64, f64)> = pieces.iter().map(|p| (p.lo, p.hi)).collect();
        let mut cursor = 0.0;
        let mut fills = Vec::new();
        for &(lo, hi) in &covered {
            if lo > cursor + BOUNDARY_TOL {
                fills.push(Piece::constant(cursor, lo, offset));
            }
            cursor = hi;
        }
        if cursor < 1.0 - BOUNDARY_TOL {
            fills.push(Piece::constant(cursor, 1.0, offset));
        }
        pieces.extend(fills);
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        RandomVariable { name: alloc::format!("{}{offset:+}", self.name), pieces }
    }

    /// True when some piece is unbounded at a power rate (the variable then
    /// escapes every exponential Orlicz ball).
    pub fn has_power_singularity(&self) -> Option<(f64, f64)> {
        for p in &self.pieces {
            for end in [End::Left, End::Right] {
                let e = p.endpoint_exponent(end);
                if e < 0.0 {
                    let at = if end == End::Left { p.lo } else { p.hi };
                    return Some((at, e));
                }
            }
        }
        None
    }
}

pub(crate) fn scale_form(form: &PieceForm, factor: f64) -> PieceForm {
    match form {
        PieceForm::Constant(c) => PieceForm::Constant(c * factor),
        PieceForm::PowerSum(atoms) => PieceForm::PowerSum(
            atoms.iter().map(|a| PowerAtom::new(a.coeff * factor, a.anchor, a.exponent)).collect(),
        ),
        PieceForm::LogSum { offset, atoms } => PieceForm::LogSum {
            offset: offset * factor,
            atoms: atoms
                .iter()
                .map(|a| LogAtom { coeff: a.coeff * factor, anchor: a.anchor })
                .collect(),
        },
        PieceForm::Expr(e) => {
            let inner = e.eval.clone();
            PieceForm::Expr(Expression {
                eval: Arc::new(move |x| factor * inner(x)),
                left_exponent: e.left_exponent,
                right_exponent: e.right_exponent,
                range: e.range.map(|(a, b)| {
                    if factor >= 0.0 {
                        (a * factor, b * factor)
                    } else {
                        (b * factor, a * factor)
                    }
                }),
            })
        }
    }
}

fn shift_form(form: &PieceForm, offset: f64) -> PieceForm {
    match form {
        PieceForm::Constant(c) => PieceForm::Constant(c + offset),
        PieceForm::PowerSum(atoms) => {
            let mut out = atoms.clone();
            out.push(PowerAtom::new(offset, 0.0, 0.0));
            PieceForm::PowerSum(out)
        }
        PieceForm::LogSum { offset: o, atoms } => {
            PieceForm::LogSum { offset: o + offset, atoms: atoms.clone() }
        }
        PieceForm::Expr(e) => {
            let inner = e.eval.clone();
            PieceForm::Expr(Expression {
                eval: Arc::new(move |x| inner(x) + offset),
                left_exponent: fm::min(e.left_exponent, 0.0),
                right_exponent: fm::min(e.right_exponent, 0.0),
                range: e.range.map(|(a, b)| (a + offset, b + offset)),
            })
        }
    }
}

/// Sorted union of piece breakpoints of several descriptors, restricted to
/// [lo, hi]; nearby points (within 1e-12) are merged.
pub fn refine_breakpoints(lists: &[&[Piece]], lo: f64, hi: f64) -> Vec<f64> {
    let mut points = alloc::vec![lo, hi];
    for list in lists {
        for p in *list {
            for b in [p.lo, p.hi] {
                if b > lo + BOUNDARY_TOL && b < hi - BOUNDARY_TOL {
                    points.push(b);
                }
            }
        }
    }
    points.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(points.len());
    for x in points {
        if out.last().map(|l| !same_boundary(*l, x)).unwrap_or(true) {
            out.push(x);
        }
    }
    out
}

pub(crate) fn find_form<'a>(pieces: &'a [Piece], mid: f64) -> Option<&'a Piece> {
    pieces.iter().find(|p| p.lo < mid && mid <= p.hi)
}

/// Piecewise description of the ratio q/p on a common refinement.
#[derive(Clone, Debug)]
pub struct RatioPiece {
    pub lo: f64,
    pub hi: f64,
    pub form: RatioForm,
}

#[derive(Clone)]
pub enum RatioForm {
    /// Exact power atom `c*|x-a|^r` (constant when r = 0).
    Atom(PowerAtom),
    /// Quotient evaluator with endpoint exponents and optional exact range.
    General { eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>, left_exponent: f64, right_exponent: f64, range: Option<(f64, f64)> },
}

impl core::fmt::Debug for RatioForm {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RatioForm::Atom(a) => f.debug_tuple("Atom").field(a).finish(),
            RatioForm::General { left_exponent, right_exponent, .. } => f
                .debug_struct("General")
                .field("left_exponent", left_exponent)
                .field("right_exponent", right_exponent)
                .finish(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ratio {
    pub pieces: Vec<RatioPiece>,
    /// Present when at least one input carries an infinite tail. The other
    /// input must be constant on each tail region (or share the identical
    /// lattice); anything else is an incompatible-lattice error.
    pub tail: Option<crate::counterexamples::RatioTail>,
}

/// Builds the pointwise ratio q/p on a common refinement. Errors when the
/// piece lattices cannot be merged (incompatible infinite tails).
pub fn pointwise_ratio(q: &Density, p: &Density) -> Result<Ratio> {
    let tail = crate::counterexamples::ratio_tail(q, p)?;
    // Finite-piece segments are the complement of the tail regions.
    let mut segments = alloc::vec![(0.0f64, 1.0f64)];
    if let Some(t) = &tail {
        for &(rlo, rhi) in &t.regions {
            let mut next = Vec::new();
            for (slo, shi) in segments {
                if rhi <= slo + BOUNDARY_TOL || rlo >= shi - BOUNDARY_TOL {
                    next.push((slo, shi));
                    continue;
                }
                if rlo > slo + BOUNDARY_TOL {
                    next.push((slo, rlo));
                }
                if rhi < shi - BOUNDARY_TOL {
                    next.push((rhi, shi));
                }
            }
            segments = next;
        }
    }
    let mut pieces = Vec::new();
    for (seg_lo, seg_hi) in segments {
        let cuts = refine_breakpoints(&[&q.pieces, &p.pieces], seg_lo, seg_hi);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let qf = find_form(&q.pieces, mid).ok_or(Error::BadCoverage { at: mid })?;
            let pf = find_form(&p.pieces, mid).ok_or(Error::BadCoverage { at: mid })?;
            pieces.push(RatioPiece { lo, hi, form: ratio_form(&qf.form, &pf.form, lo, hi)? });
        }
    }
    Ok(Ratio { pieces, tail })
}

fn single_atom(form: &PieceForm) -> Option<PowerAtom> {
    match form {
        PieceForm::Constant(c) => Some(PowerAtom::new(*c, 0.0, 0.0)),
        PieceForm::PowerSum(atoms) => {
            let live: Vec<&PowerAtom> = atoms.iter().filter(|a| a.coeff != 0.0).collect();
            match live.len() {
                0 => Some(PowerAtom::new(0.0, 0.0, 0.0)),
                1 => Some(*live[0]),
                _ => None,
            }
        }
        _ => None,
    }
}

fn ratio_form(qf: &PieceForm, pf: &PieceForm, lo: f64, hi: f64) -> Result<RatioForm> {
    if let (Some(qa), Some(pa)) = (single_atom(qf), single_atom(pf)) {
        if pa.coeff == 0.0 {
            return Err(Error::NotPositive { at: lo });
        }
        if qa.exponent == 0.0 || pa.exponent == 0.0 || qa.anchor == pa.anchor {
            // Shared anchor (or one side constant): exponents subtract.
            let anchor = if qa.exponent != 0.0 { qa.anchor } else { pa.anchor };
            return Ok(RatioForm::Atom(PowerAtom::new(
                qa.coeff / pa.coeff,
                anchor,
                qa.exponent - pa.exponent,
            )));
        }
    }
    let qb = form_bounds(qf, lo, hi);
    let pb = form_bounds(pf, lo, hi);
    let range = if qb.exact && pb.exact && pb.lo > 0.0 && qb.lo >= 0.0 && pb.hi.is_finite() {
        // Quotient of exact ranges is a sound (not necessarily tight) range.
        Some((qb.lo / pb.hi, if pb.lo > 0.0 { qb.hi / pb.lo } else { f64::INFINITY }))
    } else {
        None
    };
    let qe = qf.clone();
    let pe = pf.clone();
    let lq = Piece { lo, hi, form: qe.clone() };
    let lp = Piece { lo, hi, form: pe.clone() };
    let left_exponent = lq.endpoint_exponent(End::Left) - lp.endpoint_exponent(End::Left);
    let right_exponent = lq.endpoint_exponent(End::Right) - lp.endpoint_exponent(End::Right);
    Ok(RatioForm::General {
        eval: Arc::new(move |x| eval_form(&qe, x) / eval_form(&pe, x)),
        left_exponent,
        right_exponent,
        range,
    })
}

impl RatioPiece {
    pub fn bounds(&self) -> RangeBound {
        match &self.form {
            RatioForm::Atom(a) => {
                let form = PieceForm::PowerSum(alloc::vec![*a]);
                form_bounds(&form, self.lo, self.hi)
            }
            RatioForm::General { eval, left_exponent, right_exponent, range } => {
                if let Some((a, b)) = range {
                    return RangeBound { lo: *a, hi: *b, exact: true };
                }
                let mut lo_v = f64::INFINITY;
                let mut hi_v = f64::NEG_INFINITY;
                let n = 128;
                for i in 1..n {
                    let x = self.lo + (self.hi - self.lo) * (i as f64) / (n as f64);
                    let v = eval(x);
                    lo_v = fm::min(lo_v, v);
                    hi_v = fm::max(hi_v, v);
                }
                if *left_exponent < 0.0 || *right_exponent < 0.0 {
                    hi_v = f64::INFINITY;
                }
                if *left_exponent > 0.0 || *right_exponent > 0.0 {
                    lo_v = 0.0;
                }
                RangeBound { lo: lo_v, hi: hi_v, exact: false }
            }
        }
    }

    pub fn endpoint_exponent(&self, end: End) -> f64 {
        match &self.form {
            RatioForm::Atom(a) => {
                let at = match end {
                    End::Left => self.lo,
                    End::Right => self.hi,
                };
                if a.anchor == at {
                    a.exponent
                } else {
                    0.0
                }
            }
            RatioForm::General { left_exponent, right_exponent, .. } => match end {
                End::Left => *left_exponent,
                End::Right => *right_exponent,
            },
        }
    }
}
