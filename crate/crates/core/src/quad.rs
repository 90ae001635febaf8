//! Adaptive Gauss-Kronrod quadrature.
//!
//! The 15-point Kronrod rule with embedded 7-point Gauss rule drives a
//! worst-interval-first refinement. Endpoint power singularities with
//! exponent in (-1, 0) are removed by the substitution `x = a + u^{1/(1+e)}`
//! before the adaptive pass, so the transformed integrand is bounded.
//! Nodes are interior, endpoints are never evaluated.

use alloc::collections::BinaryHeap;

use crate::fm;
use crate::{Error, Result};

/// Kronrod nodes on [0, 1] half-interval (positive abscissae, descending).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828812294916156109,
];

/// Gauss weights for nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug)]
pub struct Quad {
    pub value: f64,
    pub error_bound: f64,
    pub converged: bool,
    pub evaluations: u32,
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk15(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut resk = 0.0;
    let mut resg = 0.0;
    let mut resabs = 0.0;
    let mut samples = [0.0f64; 15];
    let mut idx = 0;
    for (j, &x) in XGK.iter().enumerate() {
        let points: &[f64] = if x == 0.0 {
            &[0.0]
        } else {
            &[-x, x]
        };
        for &s in points {
            let at = center + half * s;
            let v = f(at);
            if !v.is_finite() {
                return Err(Error::UnannotatedSingularity { at });
            }
            samples[idx] = v;
            idx += 1;
            resk += WGK[j] * v;
            resabs += WGK[j] * fm::abs(v);
            if j % 2 == 1 {
                resg += WG[j / 2] * v;
            }
        }
    }
    let mean = resk * 0.5;
    let mut resasc = 0.0;
    idx = 0;
    for (j, &x) in XGK.iter().enumerate() {
        let count = if x == 0.0 { 1 } else { 2 };
        for _ in 0..count {
            resasc += WGK[j] * fm::abs(samples[idx] - mean);
            idx += 1;
        }
    }
    let value = resk * half;
    let resasc = resasc * fm::abs(half);
    let resabs = resabs * fm::abs(half);
    let mut err = fm::abs((resk - resg) * half);
    if resasc != 0.0 && err != 0.0 {
        err = resasc * fm::min(1.0, fm::powf(200.0 * err / resasc, 1.5));
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if floor > err {
        err = floor;
    }
    Ok((value, err))
}

/// Adaptive integration of a bounded integrand over [lo, hi].
pub fn adaptive(
    f: &mut dyn FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    max_segments: u32,
) -> Result<Quad> {
    if !(lo < hi) {
        return Ok(Quad { value: 0.0, error_bound: 0.0, converged: true, evaluations: 0 });
    }
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(f, lo, hi)?;
    heap.push(Segment { lo, hi, value: v, err: e });
    let mut evaluations = 15u32;
    let mut segments = 1u32;
    loop {
        let total_err: f64 = heap.iter().map(|s| s.err).sum();
        if total_err <= abs_tol || segments >= max_segments {
            let mut sum = crate::kahan::KahanSum::new();
            let mut ordered: alloc::vec::Vec<&Segment> = heap.iter().collect();
            ordered.sort_by(|a, b| a.lo.total_cmp(&b.lo));
            for s in &ordered {
                sum += s.value;
            }
            return Ok(Quad {
                value: sum.total(),
                error_bound: total_err,
                converged: total_err <= abs_tol,
                evaluations,
            });
        }
        let worst = heap.pop().expect("heap non-empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval at floating point resolution; keep its estimate.
            let mut pinned = worst;
            pinned.err = 0.0;
            heap.push(pinned);
            continue;
        }
        let (v1, e1) = gk15(f, worst.lo, mid)?;
        let (v2, e2) = gk15(f, mid, worst.hi)?;
        evaluations += 30;
        segments += 1;
        heap.push(Segment { lo: worst.lo, hi: mid, value: v1, err: e1 });
        heap.push(Segment { lo: mid, hi: worst.hi, value: v2, err: e2 });
    }
}

/// Integration of `f` over [lo, hi] where `f` may carry power singularities
/// at the endpoints: `f(x) ~ c (x-lo)^{left_exp}` as `x -> lo` and
/// `f(x) ~ c (hi-x)^{right_exp}` as `x -> hi`. Exponents must be > -1;
/// non-negative exponents need no treatment.
pub fn adaptive_annotated(
    f: &mut dyn FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    left_exp: f64,
    right_exp: f64,
    abs_tol: f64,
    max_segments: u32,
) -> Result<Quad> {
    if !(lo < hi) {
        return Ok(Quad { value: 0.0, error_bound: 0.0, converged: true, evaluations: 0 });
    }
    if left_exp <= -1.0 || right_exp <= -1.0 {
        return Err(Error::InvalidParameter {
            what: "endpoint exponent",
            value: fm::min(left_exp, right_exp),
        });
    }
    let mid = 0.5 * (lo + hi);
    let half_tol = 0.5 * abs_tol;
    let half_seg = max_segments / 2 + 1;
    let left = if left_exp < 0.0 {
        let s = 1.0 + left_exp;
        let top = fm::powf(mid - lo, s);
        let mut g = |u: f64| {
            let x = lo + fm::powf(u, 1.0 / s);
            f(x) * fm::powf(u, 1.0 / s - 1.0) / s
        };
        adaptive(&mut g, 0.0, top, half_tol, half_seg)?
    } else {
        adaptive(f, lo, mid, half_tol, half_seg)?
    };
    let right = if right_exp < 0.0 {
        let s = 1.0 + right_exp;
        let top = fm::powf(hi - mid, s);
        let mut g = |u: f64| {
            let x = hi - fm::powf(u, 1.0 / s);
            f(x) * fm::powf(u, 1.0 / s - 1.0) / s
        };
        adaptive(&mut g, 0.0, top, half_tol, half_seg)?
    } else {
        adaptive(f, mid, hi, half_tol, half_seg)?
    };
    Ok(Quad {
        value: left.value + right.value,
        error_bound: left.error_bound + right.error_bound,
        converged: left.converged && right.converged,
        evaluations: left.evaluations + right.evaluations,
    })
}
