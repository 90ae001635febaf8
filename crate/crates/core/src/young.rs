//! Young functions: even convex functions vanishing at the origin, used to
//! weigh integrability. Four built-ins come in two conjugate pairs, one of
//! exponential growth and one of linear-times-log growth, plus generic
//! inversion, Legendre conjugation, and axiom checks for custom functions.

use crate::fm;
use crate::{Error, Result};

/// Asymptotic growth family of a Young function; drives which membership
/// classifier applies to the associated function space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthClass {
    /// Grows like an exponential; the conjugate pair's slow partner is
    /// below. No doubling bound holds for this class.
    Exponential,
    /// Grows like y ln y; satisfies the doubling bound
    /// `N(by) <= max(b^2, 1) N(y)`.
    LinearLog,
}

/// A Young function with a stable evaluator and, for the built-ins, an
/// increasing derivative and a closed-form conjugate partner.
#[derive(Clone, Copy)]
pub struct YoungFunction {
    pub name: &'static str,
    pub growth: GrowthClass,
    eval_fn: fn(f64) -> f64,
    deriv_fn: Option<fn(f64) -> f64>,
    conjugate_name: Option<&'static str>,
}

impl core::fmt::Debug for YoungFunction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("YoungFunction").field("name", &self.name).finish()
    }
}

fn cosh_minus_one_eval(x: f64) -> f64 {
    // cosh x - 1 = 2 sinh^2(x/2), exact near 0.
    let s = fm::sinh(0.5 * x);
    2.0 * s * s
}

fn cosh_minus_one_deriv(x: f64) -> f64 {
    fm::sinh(fm::abs(x))
}

fn exp_minus_linear_eval(x: f64) -> f64 {
    let a = fm::abs(x);
    if a < 1e-4 {
        // e^a - a - 1 via its series, avoiding cancellation.
        let a2 = a * a;
        return a2 * (0.5 + a * (1.0 / 6.0 + a * (1.0 / 24.0 + a / 120.0)));
    }
    fm::exp_m1(a) - a
}

fn exp_minus_linear_deriv(x: f64) -> f64 {
    fm::exp_m1(fm::abs(x))
}

fn asinh_primitive_eval(y: f64) -> f64 {
    let a = fm::abs(y);
    // y asinh y - (sqrt(1+y^2) - 1); the second term written to avoid
    // cancellation for small y.
    let root = fm::sqrt(1.0 + a * a);
    a * fm::asinh(a) - a * a / (1.0 + root)
}

fn asinh_primitive_deriv(y: f64) -> f64 {
    fm::asinh(fm::abs(y))
}

fn log1p_primitive_eval(y: f64) -> f64 {
    let a = fm::abs(y);
    // (1+a) ln(1+a) - a = a ln1p(a) + (ln1p(a) - a).
    let l = fm::ln_1p(a);
    a * l + (l - a)
}

fn log1p_primitive_deriv(y: f64) -> f64 {
    fm::ln_1p(fm::abs(y))
}

/// cosh x - 1; exponential growth.
pub const COSH_MINUS_ONE: YoungFunction = YoungFunction {
    name: "cosh_minus_one",
    growth: GrowthClass::Exponential,
    eval_fn: cosh_minus_one_eval,
    deriv_fn: Some(cosh_minus_one_deriv),
    conjugate_name: Some("asinh_primitive"),
};

/// e^{|x|} - |x| - 1; exponential growth, equivalent to `COSH_MINUS_ONE`.
pub const EXP_MINUS_LINEAR: YoungFunction = YoungFunction {
    name: "exp_minus_linear",
    growth: GrowthClass::Exponential,
    eval_fn: exp_minus_linear_eval,
    deriv_fn: Some(exp_minus_linear_deriv),
    conjugate_name: Some("log1p_primitive"),
};

/// y asinh y - sqrt(1+y^2) + 1; conjugate of `COSH_MINUS_ONE`.
pub const ASINH_PRIMITIVE: YoungFunction = YoungFunction {
    name: "asinh_primitive",
    growth: GrowthClass::LinearLog,
    eval_fn: asinh_primitive_eval,
    deriv_fn: Some(asinh_primitive_deriv),
    conjugate_name: Some("cosh_minus_one"),
};

/// (1+|y|) ln(1+|y|) - |y|; conjugate of `EXP_MINUS_LINEAR`.
pub const LOG1P_PRIMITIVE: YoungFunction = YoungFunction {
    name: "log1p_primitive",
    growth: GrowthClass::LinearLog,
    eval_fn: log1p_primitive_eval,
    deriv_fn: Some(log1p_primitive_deriv),
    conjugate_name: Some("exp_minus_linear"),
};

pub const BUILTINS: [&YoungFunction; 4] =
    [&COSH_MINUS_ONE, &EXP_MINUS_LINEAR, &ASINH_PRIMITIVE, &LOG1P_PRIMITIVE];

pub fn by_name(name: &str) -> Option<&'static YoungFunction> {
    BUILTINS.iter().copied().find(|f| f.name == name)
}

/// How a conjugate value was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConjugateMethod {
    /// Closed form of the known partner function.
    Paired,
    /// Root of the derivative equation by bisection.
    DerivativeBisection,
}

#[derive(Clone, Copy, Debug)]
pub struct ConjugateValue {
    pub value: f64,
    pub method: ConjugateMethod,
}

impl YoungFunction {
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval_fn)(x)
    }

    /// Derivative in |x|, extended oddly; defined for all built-ins.
    pub fn derivative(&self, x: f64) -> f64 {
        let d = self.deriv_fn.expect("built-in Young functions carry derivatives");
        let v = d(x);
        if x < 0.0 {
            -v
        } else {
            v
        }
    }

    pub fn conjugate(&self) -> Option<&'static YoungFunction> {
        self.conjugate_name.and_then(by_name)
    }

    /// Inverse on [0, inf): the unique t >= 0 with eval(t) = y.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Err(Error::InvalidParameter { what: "inverse argument", value: y });
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0f64;
        let mut grow = 0;
        while self.eval(hi) < y {
            hi *= 2.0;
            grow += 1;
            if grow > 1100 {
                return Err(Error::InvalidParameter { what: "inverse target unreachable", value: y });
            }
        }
        let mut lo = 0.0f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Legendre conjugate value `sup_x (x|y| - eval(x))`. Uses the partner
    /// in closed form when linked, otherwise solves `eval'(x) = |y|`.
    pub fn conjugate_value(&self, y: f64) -> Result<ConjugateValue> {
        if let Some(partner) = self.conjugate() {
            return Ok(ConjugateValue { value: partner.eval(y), method: ConjugateMethod::Paired });
        }
        let a = fm::abs(y);
        if a == 0.0 {
            return Ok(ConjugateValue { value: 0.0, method: ConjugateMethod::DerivativeBisection });
        }
        let deriv = self.deriv_fn.ok_or(Error::InvalidParameter {
            what: "conjugate of a function without derivative",
            value: y,
        })?;
        let mut hi = 1.0f64;
        let mut grow = 0;
        while deriv(hi) < a {
            hi *= 2.0;
            grow += 1;
            if grow > 1100 {
                return Err(Error::InvalidParameter { what: "conjugate slope unreachable", value: y });
            }
        }
        let mut lo = 0.0f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if deriv(mid) < a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        Ok(ConjugateValue {
            value: x * a - self.eval(x),
            method: ConjugateMethod::DerivativeBisection,
        })
    }
}

/// Largest violation of `xy <= phi(x) + psi(y)` over the grid product; a
/// true conjugate pair keeps this at rounding level.
pub fn fenchel_young_violation(
    phi: &YoungFunction,
    psi: &YoungFunction,
    xs: &[f64],
    ys: &[f64],
) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for &x in xs {
        for &y in ys {
            let v = fm::abs(x * y) - phi.eval(x) - psi.eval(y);
            worst = fm::max(worst, v);
        }
    }
    worst
}

/// Largest residual between the numeric Legendre transform of `phi` and
/// the claimed partner `psi` over the probe points, measured relative to
/// the magnitude of the bilinear term at the optimizer (the transform
/// subtracts quantities of that size, so absolute noise scales with it).
pub fn conjugate_pair_residual(phi: &YoungFunction, psi: &YoungFunction, ys: &[f64]) -> Result<f64> {
    let deriv = phi.deriv_fn.ok_or(Error::InvalidParameter {
        what: "conjugate residual needs derivative",
        value: f64::NAN,
    })?;
    let mut worst: f64 = 0.0;
    for &y in ys {
        let a = fm::abs(y);
        let mut hi = 1.0f64;
        while deriv(hi) < a {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::InvalidParameter { what: "slope unreachable", value: y });
            }
        }
        let mut lo = 0.0f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if deriv(mid) < a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        let numeric = x * a - phi.eval(x);
        let scale = fm::max(1.0, x * a);
        worst = fm::max(worst, fm::abs(numeric - psi.eval(y)) / scale);
    }
    Ok(worst)
}

/// Checks the doubling bound `N(by) <= max(b^2, 1) N(y)` for a linear-log
/// function over the probe points; returns the worst ratio (<= 1 passes).
pub fn doubling_ratio(psi: &YoungFunction, b: f64, ys: &[f64]) -> f64 {
    let cap = fm::max(b * b, 1.0);
    let mut worst: f64 = 0.0;
    for &y in ys {
        let denom = cap * psi.eval(y);
        if denom > 0.0 {
            worst = fm::max(worst, psi.eval(b * y) / denom);
        }
    }
    worst
}

/// Report of a two-sided growth comparison between equivalent functions:
/// `a(x) <= b(scale_up * x)` and `b(x) <= a(scale_down * x)` for x past
/// `threshold`, verified on a geometric probe grid.
#[derive(Clone, Copy, Debug)]
pub struct EquivalenceReport {
    pub scale_up: f64,
    pub scale_down: f64,
    pub threshold: f64,
    pub holds: bool,
}

/// Finds small integer scalings witnessing two-sided domination past the
/// threshold, probing geometrically up to x = 50.
pub fn equivalence_check(a: &YoungFunction, b: &YoungFunction, threshold: f64) -> EquivalenceReport {
    let dominated = |f: &YoungFunction, g: &YoungFunction, c: f64| -> bool {
        let mut x = fm::max(threshold, 1e-3);
        while x <= 50.0 {
            if f.eval(x) > g.eval(c * x) * (1.0 + 1e-12) {
                return false;
            }
            x *= 1.07;
        }
        true
    };
    let find = |f: &YoungFunction, g: &YoungFunction| -> Option<f64> {
        for c in [1.0, 2.0, 3.0, 4.0] {
            if dominated(f, g, c) {
                return Some(c);
            }
        }
        None
    };
    let up = find(a, b);
    let down = find(b, a);
    EquivalenceReport {
        scale_up: up.unwrap_or(f64::NAN),
        scale_down: down.unwrap_or(f64::NAN),
        threshold,
        holds: up.is_some() && down.is_some(),
    }
}

/// Grid check of the Young-function axioms for a custom evaluator:
/// vanishing at 0, evenness, monotonicity and midpoint convexity on the
/// positive half-line.
pub fn validate_young(eval: &dyn Fn(f64) -> f64, probe_hi: f64) -> Result<()> {
    if eval(0.0) != 0.0 {
        return Err(Error::InvalidParameter { what: "value at zero", value: eval(0.0) });
    }
    let n = 400;
    let mut prev = 0.0;
    for i in 1..=n {
        let x = probe_hi * (i as f64) / (n as f64);
        let v = eval(x);
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameter { what: "nonnegative finite values", value: v });
        }
        if fm::abs(eval(-x) - v) > 1e-12 * fm::max(v, 1.0) {
            return Err(Error::InvalidParameter { what: "evenness", value: x });
        }
        if v + 1e-15 < prev {
            return Err(Error::InvalidParameter { what: "monotonicity", value: x });
        }
        prev = v;
    }
    for i in 1..n {
        let x = probe_hi * (i as f64) / (n as f64);
        let y = probe_hi * ((i + 1) as f64) / (n as f64);
        let mid = eval(0.5 * (x + y));
        let chord = 0.5 * (eval(x) + eval(y));
        if mid > chord + 1e-12 * fm::max(chord, 1.0) {
            return Err(Error::InvalidParameter { what: "midpoint convexity", value: x });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn values_at_one() {
        // cosh 1 - 1, e - 2, asinh-primitive and log1p-primitive at 1.
        assert!((COSH_MINUS_ONE.eval(1.0) - (1.0f64.cosh() - 1.0)).abs() < 1e-15);
        assert!((EXP_MINUS_LINEAR.eval(1.0) - (core::f64::consts::E - 2.0)).abs() < 1e-15);
        let asinh1 = 1.0f64.asinh();
        assert!((ASINH_PRIMITIVE.eval(1.0) - (asinh1 - 2.0f64.sqrt() + 1.0)).abs() < 1e-15);
        let expect = 2.0 * core::f64::consts::LN_2 - 1.0;
        assert!((LOG1P_PRIMITIVE.eval(1.0) - expect).abs() < 1e-15);
    }

    #[test]
    fn small_argument_stability() {
        let x = 1e-9;
        // Leading terms: x^2/2 for both exponential built-ins and for the
        // asinh primitive; the log1p primitive also starts at x^2/2.
        for f in BUILTINS {
            let v = f.eval(x);
            let rel = (v - 0.5 * x * x).abs() / (0.5 * x * x);
            assert!(rel < 1e-6, "{} unstable near zero: {v:e}", f.name);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let x = COSH_MINUS_ONE.inverse(1.0).unwrap();
        // cosh x = 2 at x = ln(2 + sqrt 3).
        assert!((x - (2.0 + 3.0f64.sqrt()).ln()).abs() < 1e-12);
        for f in BUILTINS {
            for y in [1e-6, 0.3, 1.0, 7.5, 120.0] {
                let t = f.inverse(y).unwrap();
                assert!((f.eval(t) - y).abs() < 1e-9 * y.max(1.0));
            }
        }
    }

    #[test]
    fn conjugate_pairs_agree_with_numeric_transform() {
        let ys: Vec<f64> = (1..60).map(|i| 0.25 * i as f64).collect();
        let r1 = conjugate_pair_residual(&COSH_MINUS_ONE, &ASINH_PRIMITIVE, &ys).unwrap();
        let r2 = conjugate_pair_residual(&EXP_MINUS_LINEAR, &LOG1P_PRIMITIVE, &ys).unwrap();
        assert!(r1 < 1e-10, "residual {r1:e}");
        assert!(r2 < 1e-10, "residual {r2:e}");
        // And in the reverse direction.
        let r3 = conjugate_pair_residual(&ASINH_PRIMITIVE, &COSH_MINUS_ONE, &ys).unwrap();
        assert!(r3 < 1e-10, "residual {r3:e}");
    }

    #[test]
    fn fenchel_young_touch_points() {
        // Equality holds at y = phi'(x); elsewhere the inequality is strict.
        for (phi, psi) in [(&COSH_MINUS_ONE, &ASINH_PRIMITIVE), (&EXP_MINUS_LINEAR, &LOG1P_PRIMITIVE)]
        {
            for x in [0.1, 0.9, 2.0, 4.0] {
                let y = phi.derivative(x);
                let gap = x * y - phi.eval(x) - psi.eval(y);
                assert!(gap.abs() < 1e-11, "touch gap {gap:e}");
            }
            let xs: Vec<f64> = (0..50).map(|i| 0.13 * i as f64).collect();
            let v = fenchel_young_violation(phi, psi, &xs, &xs);
            assert!(v <= 1e-12, "violation {v:e}");
        }
    }

    #[test]
    fn doubling_holds_only_for_slow_growth() {
        let ys: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        for b in [0.5, 1.0, 3.0] {
            assert!(doubling_ratio(&LOG1P_PRIMITIVE, b, &ys) <= 1.0 + 1e-12);
            assert!(doubling_ratio(&ASINH_PRIMITIVE, b, &ys) <= 1.0 + 1e-12);
        }
        // The exponential class has no doubling constant: the ratio at
        // moderate arguments already dwarfs the quadratic cap.
        let ratio = COSH_MINUS_ONE.eval(40.0) / (4.0 * COSH_MINUS_ONE.eval(20.0));
        assert!(ratio > 1e6);
    }

    #[test]
    fn exponential_builtins_are_equivalent() {
        let r = equivalence_check(&COSH_MINUS_ONE, &EXP_MINUS_LINEAR, 0.0);
        assert!(r.holds, "expected two-sided domination: {r:?}");
        assert!(r.scale_up <= 2.0 && r.scale_down <= 2.0);
    }

    #[test]
    fn axiom_checker_accepts_builtins_and_rejects_sine() {
        for f in BUILTINS {
            validate_young(&|x| f.eval(x), 10.0).unwrap();
        }
        assert!(validate_young(&|x: f64| x.sin().abs(), 10.0).is_err());
    }
}
