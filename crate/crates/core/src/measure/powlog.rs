//! Closed forms for `int t^r (ln t)^m dt` on `[t1, t2]` with `0 <= t1 < t2`
//! and `m` in `{0, 1, 2}`. These are the only primitive integrals the piece
//! algebra needs; everything else reduces to them or falls back to
//! quadrature.

use crate::fm;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PowlogIntegral {
    Finite(f64),
    Divergent,
}

/// Antiderivative F with F' = t^r (ln t)^m, normalized so that F -> 0 as
/// t -> 0 when r > -1 (for r = -1 the antiderivative is ln^{m+1} t/(m+1)).
/// Caller guarantees t > 0.
pub fn powlog_antiderivative(r: f64, m: u32, t: f64) -> f64 {
    debug_assert!(t > 0.0);
    let l = fm::ln(t);
    if r == -1.0 {
        return match m {
            0 => l,
            1 => 0.5 * l * l,
            2 => l * l * l / 3.0,
            _ => unreachable!("log power out of supported range"),
        };
    }
    let s = r + 1.0;
    let p = fm::powf(t, s);
    match m {
        0 => p / s,
        1 => p * (l / s - 1.0 / (s * s)),
        2 => p * (l * l / s - 2.0 * l / (s * s) + 2.0 / (s * s * s)),
        _ => unreachable!("log power out of supported range"),
    }
}

/// `int_{t1}^{t2} t^r (ln t)^m dt` with divergence detection at t1 = 0.
pub fn powlog_integral(r: f64, m: u32, t1: f64, t2: f64) -> PowlogIntegral {
    debug_assert!(t1 >= 0.0 && t1 < t2);
    if t1 == 0.0 {
        if r <= -1.0 {
            return PowlogIntegral::Divergent;
        }
        // F(0+) = 0 for r > -1 even with logarithmic factors.
        return PowlogIntegral::Finite(powlog_antiderivative(r, m, t2));
    }
    PowlogIntegral::Finite(powlog_antiderivative(r, m, t2) - powlog_antiderivative(r, m, t1))
}
