//! Property tests for the Luxemburg norm on step variables: homogeneity,
//! the triangle inequality, monotonicity in the pointwise order, and the
//! unit-modular characterization, plus the conjugate-pair inequality.

use expmix_core::measure::{Density, RandomVariable};
use expmix_core::orlicz::{luxemburg_norm, modular, NormVerdict};
use expmix_core::young::{ASINH_PRIMITIVE, BUILTINS, COSH_MINUS_ONE};
use proptest::prelude::*;

const CELLS: [(f64, f64); 4] = [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)];
const NORM_TOL: f64 = 1e-9;

fn step(name: &str, vals: &[f64; 4]) -> RandomVariable {
    let steps: Vec<(f64, f64, f64)> =
        CELLS.iter().zip(vals).map(|(&(lo, hi), &v)| (lo, hi, v)).collect();
    RandomVariable::simple(name, &steps)
}

fn finite_norm(u: &RandomVariable, phi_idx: usize) -> f64 {
    let p = Density::uniform();
    let phi = BUILTINS[phi_idx % BUILTINS.len()];
    let result = luxemburg_norm(u, &p, phi, NORM_TOL).unwrap();
    assert_eq!(result.verdict, NormVerdict::Finite);
    result.value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_absolutely_homogeneous(
        vals in prop::array::uniform4(-3.0..3.0f64),
        c in prop_oneof![-4.0..-0.05f64, 0.05..4.0f64],
        phi_idx in 0..4usize,
    ) {
        let u = step("u", &vals);
        let scaled_vals = [vals[0] * c, vals[1] * c, vals[2] * c, vals[3] * c];
        let cu = step("cu", &scaled_vals);
        let n_u = finite_norm(&u, phi_idx);
        let n_cu = finite_norm(&cu, phi_idx);
        let want = c.abs() * n_u;
        prop_assert!(
            (n_cu - want).abs() <= 1e-6 * (1.0 + want),
            "|c|*‖u‖ = {want}, ‖cu‖ = {n_cu}"
        );
    }

    #[test]
    fn norm_satisfies_the_triangle_inequality(
        a in prop::array::uniform4(-3.0..3.0f64),
        b in prop::array::uniform4(-3.0..3.0f64),
        phi_idx in 0..4usize,
    ) {
        let sum = [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];
        let n_sum = finite_norm(&step("a+b", &sum), phi_idx);
        let bound = finite_norm(&step("a", &a), phi_idx) + finite_norm(&step("b", &b), phi_idx);
        prop_assert!(n_sum <= bound + 1e-6 * (1.0 + bound));
    }

    #[test]
    fn norm_is_monotone_in_the_pointwise_order(
        vals in prop::array::uniform4(-3.0..3.0f64),
        extra in prop::array::uniform4(0.0..2.0f64),
        phi_idx in 0..4usize,
    ) {
        let bigger = [
            vals[0].abs() + extra[0],
            vals[1].abs() + extra[1],
            vals[2].abs() + extra[2],
            vals[3].abs() + extra[3],
        ];
        let n_small = finite_norm(&step("small", &vals), phi_idx);
        let n_big = finite_norm(&step("big", &bigger), phi_idx);
        prop_assert!(n_small <= n_big + 1e-6 * (1.0 + n_big));
    }

    #[test]
    fn modular_attains_one_at_the_norm(
        vals in prop::array::uniform4(0.1..3.0f64),
        phi_idx in 0..4usize,
    ) {
        let u = step("u", &vals);
        let p = Density::uniform();
        let phi = BUILTINS[phi_idx % BUILTINS.len()];
        let result = luxemburg_norm(&u, &p, phi, NORM_TOL).unwrap();
        prop_assert_eq!(result.verdict, NormVerdict::Finite);
        let m = modular(&u, &p, phi, result.value).unwrap().expect_finite().unwrap();
        prop_assert!((m - 1.0).abs() < 1e-6, "modular at the norm = {m}");
    }

    #[test]
    fn conjugate_pair_satisfies_the_product_inequality(
        x in 0.0..4.0f64,
        y in 0.0..4.0f64,
    ) {
        let lhs = x * y;
        let rhs = COSH_MINUS_ONE.eval(x) + ASINH_PRIMITIVE.eval(y);
        prop_assert!(lhs <= rhs + 1e-10);
        // Equality at the derivative pairing y = sinh x.
        let y_star = x.sinh();
        let sharp = COSH_MINUS_ONE.eval(x) + ASINH_PRIMITIVE.eval(y_star);
        prop_assert!((x * y_star - sharp).abs() <= 1e-9 * (1.0 + sharp));
    }
}
