//! The full verification suite behind `verify-all`: eight check bundles
//! covering the singular family, the power family, norm axioms, conjugate
//! growth, the cumulant functional, the divergence equivalence grid, the
//! restriction filtration, and the constructive closure. Every bundle is
//! deterministic; randomized checks draw from a fixed-seed generator.

use crate::report::{entry, fmt_num, Report, ReportEntry, PLUMBING};
use expmix_core::arcs::{cumulant, exp_connected, mix_connected, ArcVerdict};
use expmix_core::closure::closure_sequence;
use expmix_core::counterexamples::{
    co419_density, divergenza_density, divergenza_kl_direct, divergenza_kl_series,
    divergenza_moment_verdict, KlDirection,
};
use expmix_core::divergence::finitediv_equivalence;
use expmix_core::filtration::{co419_agreement_check, restrict, stability_scan};
use expmix_core::measure::{Density, Piece, QuadratureSpec, RandomVariable, Verdict};
use expmix_core::orlicz::{luxemburg_norm, modular, NormVerdict};
use expmix_core::young::{
    doubling_ratio, fenchel_young_violation, ASINH_PRIMITIVE, BUILTINS, COSH_MINUS_ONE,
    LOG1P_PRIMITIVE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NORM_TOL: f64 = 1e-9;
const RNG_SEED: u64 = 0x0419_2026;

const A_MOMENTS: &str = "one-sided family power moments";
const A_KL_SERIES: &str = "one-sided family relative entropy";
const A_EXP_EXCLUSION: &str = "finite divergence without arc membership";
const A_BETA: &str = "power family exponential membership";
const A_BETA_WITNESS: &str = "power pair witness interval";
const A_MIX_EXCLUSION: &str = "unbounded ratio mixture exclusion";
const A_NORM: &str = "Luxemburg norm axioms";
const A_NORM_CONST: &str = "constant variable norm value";
const A_UNIT_BALL: &str = "unit ball modular residual";
const A_FENCHEL: &str = "conjugate pair product inequality";
const A_DOUBLING: &str = "quadratic doubling growth bound";
const A_CUMULANT: &str = "cumulant functional geometry";
const A_DIV_EQUIV: &str = "divergence finiteness equivalence";
const A_MIX_IMPLIES_EXP: &str = "mixture membership implies exponential membership";
const A_TOWER: &str = "restriction tower property";
const A_THRESHOLD: &str = "two-sided family connectivity threshold";
const A_AGREEMENT: &str = "shared restriction below the cut";
const A_CLOSURE: &str = "constructive total-variation closure";

pub fn verdict_str(v: ArcVerdict) -> &'static str {
    match v {
        ArcVerdict::Connected => "Connected",
        ArcVerdict::NotConnected => "NotConnected",
        ArcVerdict::Inconclusive => "Inconclusive",
    }
}

pub fn finiteness_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Finite => "Finite",
        Verdict::Divergent => "Divergent",
        Verdict::Inconclusive => "Inconclusive",
    }
}

fn error_entry(id: &str, inputs: String, anchor: &str, err: impl core::fmt::Debug) -> ReportEntry {
    entry(id, inputs, format!("error: {err:?}"), None, anchor, false)
}

/// Named criterion bundles in suite order.
pub const CRITERIA: [(&str, fn() -> Vec<ReportEntry>); 8] = [
    ("one-sided singular family", singular_family_checks),
    ("power family connectivity", power_family_checks),
    ("Luxemburg norm axioms", norm_axiom_checks),
    ("conjugate pair and growth bounds", conjugate_growth_checks),
    ("cumulant functional", cumulant_checks),
    ("divergence equivalence grid", divergence_grid_checks),
    ("restriction filtration", filtration_checks),
    ("closure construction", closure_checks),
];

pub fn verify_all_report() -> Report {
    let mut entries = vec![entry(
        "suite-configuration",
        format!("seed={RNG_SEED}, norm tolerance={NORM_TOL:e}"),
        "deterministic".to_string(),
        None,
        PLUMBING,
        true,
    )];
    for (_, checks) in CRITERIA {
        entries.extend(checks());
    }
    Report::new("verify-all", entries)
}

/// Moment divergence for every probed exponent, relative entropy both
/// ways via series against independent integration, and exclusion from
/// the exponential family of the uniform center.
pub fn singular_family_checks() -> Vec<ReportEntry> {
    let mut entries = Vec::new();

    let mut witnessed = 0u32;
    let total = 21u32;
    for j in 0..total {
        let eps = 0.5_f64.powi(j as i32);
        match divergenza_moment_verdict(eps) {
            Ok(r)
                if r.verdict == Verdict::Divergent
                    && r.witness_piece.is_some_and(|w| w as f64 * eps >= 1.0) =>
            {
                witnessed += 1;
            }
            _ => {}
        }
    }
    entries.push(entry(
        "singular-moments-divergent",
        "q=divergenza, eps=2^0..2^-20".to_string(),
        format!("Divergent with witness piece, {witnessed}/{total} exponents"),
        Some((0.5_f64.powi(20), 1.0)),
        A_MOMENTS,
        witnessed == total,
    ));

    for (dir, id, label) in [
        (KlDirection::DensityFromUniform, "singular-kl-qp", "D(q||1)"),
        (KlDirection::UniformFromDensity, "singular-kl-pq", "D(1||q)"),
    ] {
        let series = divergenza_kl_series(dir, 10_000);
        let inputs = format!("q=divergenza, terms=10000, direction={label}");
        match divergenza_kl_direct(dir, 10_000, &QuadratureSpec::default()) {
            Ok(direct) => {
                let dv = direct.value().unwrap_or(f64::NAN);
                let diff = (series.partial_sum - dv).abs();
                let pass = series.partial_sum.is_finite()
                    && diff <= direct.error_bound + 1e-9
                    && diff <= 1e-4;
                entries.push(entry(
                    id,
                    inputs,
                    format!(
                        "Finite, {label} = {} (series vs direct gap {})",
                        fmt_num(series.partial_sum),
                        fmt_num(diff)
                    ),
                    Some(series.value_interval()),
                    A_KL_SERIES,
                    pass,
                ));
            }
            Err(e) => entries.push(error_entry(id, inputs, A_KL_SERIES, e)),
        }
    }

    let inputs = "p=uniform, q=divergenza".to_string();
    match exp_connected(&Density::uniform(), &divergenza_density()) {
        Ok(report) => entries.push(entry(
            "singular-not-exp-connected",
            inputs,
            verdict_str(report.verdict).to_string(),
            report.witness_interval,
            A_EXP_EXCLUSION,
            report.verdict == ArcVerdict::NotConnected,
        )),
        Err(e) => entries.push(error_entry("singular-not-exp-connected", inputs, A_EXP_EXCLUSION, e)),
    }
    entries
}

/// Exponential membership across the power family, the exact witness
/// endpoint for the (1, 2) pair, and mixture exclusion.
pub fn power_family_checks() -> Vec<ReportEntry> {
    let mut entries = Vec::new();
    let u = Density::uniform();
    let mut connected = 0u32;
    for beta in [0.5, 1.0, 2.0, 5.0] {
        if let Ok(q) = Density::beta(beta) {
            if let Ok(r) = exp_connected(&u, &q) {
                if r.verdict == ArcVerdict::Connected {
                    connected += 1;
                }
            }
        }
    }
    entries.push(entry(
        "beta-family-connected",
        "p=uniform, q=beta beta in {0.5, 1, 2, 5}".to_string(),
        format!("Connected for {connected}/4 exponents"),
        None,
        A_BETA,
        connected == 4,
    ));

    let inputs = "p=beta beta=1, q=beta beta=2".to_string();
    match exp_connected(&Density::beta(1.0).unwrap(), &Density::beta(2.0).unwrap()) {
        Ok(r) => {
            let witness = r.witness_interval;
            let lo = witness.map_or(f64::NAN, |w| w.0);
            entries.push(entry(
                "beta-pair-witness",
                inputs,
                format!("{}, lower endpoint {}", verdict_str(r.verdict), fmt_num(lo)),
                witness,
                A_BETA_WITNESS,
                r.verdict == ArcVerdict::Connected && (lo + 1.0).abs() <= 1e-6,
            ));
        }
        Err(e) => entries.push(error_entry("beta-pair-witness", inputs, A_BETA_WITNESS, e)),
    }

    let inputs = "p=uniform, q=beta beta=2".to_string();
    match mix_connected(&u, &Density::beta(2.0).unwrap()) {
        Ok(r) => entries.push(entry(
            "beta-mixture-excluded",
            inputs,
            verdict_str(r.verdict).to_string(),
            r.ratio_bounds,
            A_MIX_EXCLUSION,
            r.verdict == ArcVerdict::NotConnected,
        )),
        Err(e) => entries.push(error_entry("beta-mixture-excluded", inputs, A_MIX_EXCLUSION, e)),
    }
    entries
}

fn step_variable(cells: &[(f64, f64); 4], vals: &[f64; 4]) -> RandomVariable {
    let steps: Vec<(f64, f64, f64)> =
        cells.iter().zip(vals).map(|(&(lo, hi), &v)| (lo, hi, v)).collect();
    RandomVariable::simple("random-step", &steps)
}

/// Homogeneity, triangle inequality, the constant-variable closed form,
/// and the unit-ball modular residual over 200 seeded random variables.
pub fn norm_axiom_checks() -> Vec<ReportEntry> {
    let mut entries = Vec::new();
    let p = Density::uniform();
    let mut rng = ChaCha8Rng::seed_from_u64(RNG_SEED);

    let mut homo_ok = 0u32;
    let mut tri_ok = 0u32;
    let mut unit_worst: f64 = 0.0;
    let mut unit_ok = true;
    let mut failed = None;
    let pairs = 100u32;
    for i in 0..pairs {
        let b1 = (1.0 + rng.gen_range(0.05..0.95)) / 4.0;
        let b2 = (2.0 + rng.gen_range(0.05..0.95)) / 4.0;
        let b3 = (3.0 + rng.gen_range(0.05..0.95)) / 4.0;
        let cells = [(0.0, b1), (b1, b2), (b2, b3), (b3, 1.0)];
        let draw = |rng: &mut ChaCha8Rng| {
            let mut v = [0.0; 4];
            v[0] = rng.gen_range(0.5..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            for slot in v.iter_mut().skip(1) {
                *slot = rng.gen_range(-3.0..3.0);
            }
            v
        };
        let va = draw(&mut rng);
        let vb = draw(&mut rng);
        let c = rng.gen_range(0.1..4.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let phi = BUILTINS[(i % 4) as usize];

        let norm_of = |vals: &[f64; 4], phi| -> Result<f64, expmix_core::Error> {
            Ok(luxemburg_norm(&step_variable(&cells, vals), &p, phi, NORM_TOL)?.value)
        };
        let run = (|| -> Result<(), expmix_core::Error> {
            let nu = norm_of(&va, phi)?;
            let nv = norm_of(&vb, phi)?;
            let scaled = [va[0] * c, va[1] * c, va[2] * c, va[3] * c];
            let ncu = norm_of(&scaled, phi)?;
            let want = c.abs() * nu;
            if (ncu - want).abs() <= 3.0 * NORM_TOL * (1.0 + want) {
                homo_ok += 1;
            }
            let sum = [va[0] + vb[0], va[1] + vb[1], va[2] + vb[2], va[3] + vb[3]];
            let nsum = norm_of(&sum, phi)?;
            if nsum <= nu + nv + 3.0 * NORM_TOL * (1.0 + nu + nv) {
                tri_ok += 1;
            }
            // Unit-ball residual under the exponential-growth function,
            // whose step modular is continuous in the scale.
            let u = step_variable(&cells, &va);
            let n1 = luxemburg_norm(&u, &p, &COSH_MINUS_ONE, NORM_TOL)?;
            let m = modular(&u, &p, &COSH_MINUS_ONE, n1.value)?.expect_finite()?;
            unit_worst = unit_worst.max((m - 1.0).abs());
            unit_ok &= n1.verdict == NormVerdict::Finite && (m - 1.0).abs() <= 1e-6;
            Ok(())
        })();
        if let Err(e) = run {
            failed = Some(e);
            break;
        }
    }
    let inputs = format!("200 random step variables, seed={RNG_SEED}");
    if let Some(e) = failed {
        entries.push(error_entry("norm-axioms", inputs, A_NORM, e));
        return entries;
    }
    entries.push(entry(
        "norm-homogeneity",
        inputs.clone(),
        format!("{homo_ok}/{pairs} scalings within 3x solver tolerance"),
        None,
        A_NORM,
        homo_ok == pairs,
    ));
    entries.push(entry(
        "norm-triangle",
        inputs.clone(),
        format!("{tri_ok}/{pairs} sums within 3x solver tolerance"),
        None,
        A_NORM,
        tri_ok == pairs,
    ));
    entries.push(entry(
        "norm-unit-ball-residual",
        inputs,
        format!("worst |modular(u/norm) - 1| = {}", fmt_num(unit_worst)),
        Some((0.0, unit_worst)),
        A_UNIT_BALL,
        unit_ok,
    ));

    // Constant variables: the norm is |c| / arccosh(2) exactly.
    let arccosh2 = (2.0 + 3.0_f64.sqrt()).ln();
    let mut const_worst: f64 = 0.0;
    let mut const_ok = true;
    for c in [0.25, 0.5, 1.0, 2.0, 4.0] {
        match luxemburg_norm(&RandomVariable::constant(c), &p, &COSH_MINUS_ONE, 1e-12) {
            Ok(n) => {
                let gap = (n.value - c / arccosh2).abs();
                const_worst = const_worst.max(gap);
                const_ok &= gap <= 1e-9;
            }
            Err(_) => const_ok = false,
        }
    }
    entries.push(entry(
        "norm-constant-oracle",
        "const c in {0.25, 0.5, 1, 2, 4}, p=uniform, phi=cosh_minus_one".to_string(),
        format!("worst |norm - c/arccosh(2)| = {}", fmt_num(const_worst)),
        Some((0.0, const_worst)),
        A_NORM_CONST,
        const_ok,
    ));
    entries
}

/// Product inequality for the conjugate pair on a 10^4 grid and the
/// quadratic doubling bound for the logarithmic-growth function.
pub fn conjugate_growth_checks() -> Vec<ReportEntry> {
    let mut entries = Vec::new();
    let xs: Vec<f64> = (1..=100).map(|i| 0.05 * i as f64).collect();
    let violation = fenchel_young_violation(&COSH_MINUS_ONE, &ASINH_PRIMITIVE, &xs, &xs);
    entries.push(entry(
        "fenchel-young-grid",
        "phi=cosh_minus_one, psi=asinh_primitive, 100x100 grid on (0,5]^2".to_string(),
        format!("max violation {}", fmt_num(violation)),
        Some((violation, 1e-10)),
        A_FENCHEL,
        violation <= 1e-10,
    ));

    let ys: Vec<f64> = (1..=1000).map(|i| 0.1 * i as f64).collect();
    let mut worst: f64 = 0.0;
    for b in [0.5, 1.0, 3.0] {
        worst = worst.max(doubling_ratio(&LOG1P_PRIMITIVE, b, &ys));
    }
    entries.push(entry(
        "doubling-bound",
        "psi=log1p_primitive, beta in {0.5, 1, 3}, y-grid (0,100]".to_string(),
        format!("worst ratio against max(beta^2,1) cap = {}", fmt_num(worst)),
        Some((worst, 1.0)),
        A_DOUBLING,
        worst <= 1.0 + 1e-12,
    ));
    entries
}

const CUMULANT_CELLS: [(f64, f64); 8] = [
    (0.0, 0.125),
    (0.125, 0.25),
    (0.25, 0.375),
    (0.375, 0.5),
    (0.5, 0.625),
    (0.625, 0.75),
    (0.75, 0.875),
    (0.875, 1.0),
];

fn centered_step(rng: &mut ChaCha8Rng) -> RandomVariable {
    let mut vals = [0.0_f64; 8];
    vals[0] = rng.gen_range(0.5..2.0);
    vals[1] = rng.gen_range(-2.0..-0.5);
    for slot in vals.iter_mut().skip(2) {
        *slot = rng.gen_range(-2.0..2.0);
    }
    let mean: f64 = CUMULANT_CELLS.iter().zip(&vals).map(|(&(lo, hi), v)| (hi - lo) * v).sum();
    let steps: Vec<(f64, f64, f64)> =
        CUMULANT_CELLS.iter().zip(&vals).map(|(&(lo, hi), &v)| (lo, hi, v - mean)).collect();
    RandomVariable::simple("centered-step", &steps)
}

fn blend_steps(u: &RandomVariable, v: &RandomVariable, lambda: f64) -> RandomVariable {
    let steps: Vec<(f64, f64, f64)> = CUMULANT_CELLS
        .iter()
        .map(|&(lo, hi)| {
            let mid = 0.5 * (lo + hi);
            (lo, hi, lambda * u.value_at(mid) + (1.0 - lambda) * v.value_at(mid))
        })
        .collect();
    RandomVariable::simple("blend", &steps)
}

/// Zero at the origin, strict positivity off it, convexity on random
/// pairs, and the affine closed form.
pub fn cumulant_checks() -> Vec<ReportEntry> {
    let mut entries = Vec::new();
    let p = Density::uniform();

    let zero = cumulant(&p, &RandomVariable::zero());
    let exact = matches!(&zero, Ok(v) if v.value() == Some(0.0));
    entries.push(entry(
        "cumulant-zero-at-origin",
        "p=uniform, u=0".to_string(),
        if exact { "K(0) = 0 exactly" } else { "K(0) != 0" }.to_string(),
        Some((0.0, 0.0)),
        A_CUMULANT,
        exact,
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(RNG_SEED ^ 0x5);
    let mut min_k = f64::INFINITY;
    let mut positive = 0u32;
    let mut convex_ok = 0u32;
    let mut worst_gap: f64 = -f64::INFINITY;
    let trials = 100u32;
    let mut failed = None;
    for _ in 0..trials {
        let u = centered_step(&mut rng);
        let v = centered_step(&mut rng);
        let lambda = rng.gen_range(0.1..0.9);
        let run = (|| -> Result<(), expmix_core::Error> {
            let ku = cumulant(&p, &u)?.expect_finite()?;
            let kv = cumulant(&p, &v)?.expect_finite()?;
            let kb = cumulant(&p, &blend_steps(&u, &v, lambda))?.expect_finite()?;
            if ku > 0.0 {
                positive += 1;
            }
            min_k = min_k.min(ku);
            let gap = kb - (lambda * ku + (1.0 - lambda) * kv);
            worst_gap = worst_gap.max(gap);
            if gap <= 1e-8 {
                convex_ok += 1;
            }
            Ok(())
        })();
        if let Err(e) = run {
            failed = Some(e);
            break;
        }
    }
    let inputs = format!("100 random centered step variables, seed={}", RNG_SEED ^ 0x5);
    if let Some(e) = failed {
        entries.push(error_entry("cumulant-random", inputs, A_CUMULANT, e));
        return entries;
    }
    entries.push(entry(
        "cumulant-positive-off-origin",
        inputs.clone(),
        format!("{positive}/{trials} strictly positive, min K = {}", fmt_num(min_k)),
        Some((min_k, f64::INFINITY)),
        A_CUMULANT,
        positive == trials,
    ));
    entries.push(entry(
        "cumulant-convexity",
        inputs,
        format!("{convex_ok}/{trials} pairs, worst convexity gap {}", fmt_num(worst_gap)),
        Some((worst_gap, 1e-8)),
        A_CUMULANT,
        convex_ok == trials,
    ));

    let centered_x =
        RandomVariable::from_pieces("centered-x", vec![Piece::affine(0.0, 1.0, -0.5, 1.0)]);
    let want = (2.0 * (0.5_f64).sinh()).ln();
    match cumulant(&p, &centered_x) {
        Ok(k) => {
            let v = k.value().unwrap_or(f64::NAN);
            entries.push(entry(
                "cumulant-affine-oracle",
                "p=uniform, u=centered-x".to_string(),
                format!("K = {} vs ln(2 sinh(1/2)) = {}", fmt_num(v), fmt_num(want)),
                Some((v - k.error_bound, v + k.error_bound)),
                A_CUMULANT,
                (v - want).abs() <= 1e-9,
            ));
        }
        Err(e) => entries.push(error_entry(
            "cumulant-affine-oracle",
            "p=uniform, u=centered-x".to_string(),
            A_CUMULANT,
            e,
        )),
    }
    entries
}

fn builtin_grid() -> Vec<Density> {
    vec![
        Density::uniform(),
        Density::beta(0.5).unwrap(),
        Density::beta(2.0).unwrap(),
        Density::beta(3.0).unwrap(),
        Density::beta(5.0).unwrap(),
        Density::from_pieces("affine", vec![Piece::affine(0.0, 1.0, 0.8, 0.4)]).unwrap(),
        Density::simple("two-level", &[(0.0, 0.5, 0.5), (0.5, 1.0, 1.5)]).unwrap(),
    ]
}

/// Three-way divergence agreement and the mixture-into-exponential
/// inclusion over every ordered pair of built-in densities.
pub fn divergence_grid_checks() -> Vec<ReportEntry> {
    let mut entries = Vec::new();
    let grid = builtin_grid();
    let mut pairs = 0u32;
    let mut consistent = 0u32;
    let mut inclusion_ok = 0u32;
    let mut failed = None;
    'outer: for (i, p) in grid.iter().enumerate() {
        for (j, q) in grid.iter().enumerate() {
            if i == j {
                continue;
            }
            pairs += 1;
            match finitediv_equivalence(q, p) {
                Ok(rep) if rep.lemma_checks.consistent() => consistent += 1,
                Ok(_) => {}
                Err(e) => {
                    failed = Some((e, p.name.clone(), q.name.clone()));
                    break 'outer;
                }
            }
            match (mix_connected(p, q), exp_connected(p, q)) {
                (Ok(m), Ok(e)) => {
                    if m.verdict != ArcVerdict::Connected || e.verdict == ArcVerdict::Connected {
                        inclusion_ok += 1;
                    }
                }
                (Err(e), _) | (_, Err(e)) => {
                    failed = Some((e, p.name.clone(), q.name.clone()));
                    break 'outer;
                }
            }
        }
    }
    let inputs = format!("{pairs} ordered pairs of 7 built-in densities");
    if let Some((e, p, q)) = failed {
        entries.push(error_entry(
            "divergence-three-way-agreement",
            format!("pair p={p}, q={q}"),
            A_DIV_EQUIV,
            e,
        ));
        return entries;
    }
    entries.push(entry(
        "divergence-three-way-agreement",
        inputs.clone(),
        format!("{consistent}/{pairs} pairs consistent"),
        None,
        A_DIV_EQUIV,
        consistent == pairs && pairs >= 20,
    ));
    entries.push(entry(
        "mixture-implies-exponential",
        inputs,
        format!("{inclusion_ok}/{pairs} pairs respect the inclusion"),
        None,
        A_MIX_IMPLIES_EXP,
        inclusion_ok == pairs,
    ));
    entries
}

/// Tower property of repeated restriction, the threshold scan of the
/// two-sided family, and the truncation agreement check.
pub fn filtration_checks() -> Vec<ReportEntry> {
    let mut entries = Vec::new();

    let p = Density::beta(2.0).unwrap();
    let grid: Vec<f64> = (1..=10).map(|i| 0.09 * i as f64).collect();
    let mut worst: f64 = 0.0;
    let mut failed = None;
    'tower: for &t2 in &grid {
        for &t1 in &grid {
            let run = (|| -> Result<f64, expmix_core::Error> {
                let inner = restrict(&p, t2)?;
                let twice = restrict(&inner.restricted, t1)?;
                let direct = restrict(&p, t1.min(t2))?;
                let mut gap: f64 = 0.0;
                for k in 0..=32 {
                    let x = k as f64 / 32.0;
                    gap = gap
                        .max((twice.restricted.value_at(x) - direct.restricted.value_at(x)).abs());
                }
                Ok(gap)
            })();
            match run {
                Ok(gap) => worst = worst.max(gap),
                Err(e) => {
                    failed = Some(e);
                    break 'tower;
                }
            }
        }
    }
    let inputs = "p=beta beta=2, 10x10 (t1, t2) grid".to_string();
    match failed {
        Some(e) => entries.push(error_entry("restriction-tower", inputs, A_TOWER, e)),
        None => entries.push(entry(
            "restriction-tower",
            inputs,
            format!("worst pointwise gap {}", fmt_num(worst)),
            Some((worst, 1e-10)),
            A_TOWER,
            worst <= 1e-10,
        )),
    }

    let r = 2.0_f64.powi(-10);
    let scan_grid = [
        0.25,
        0.5 - 8.0 * r,
        0.5 - 4.0 * r,
        0.5 - r,
        0.5,
        0.5 + r,
        0.5 + 4.0 * r,
        0.75,
    ];
    let inputs = "p=co419, grid spacing 2^-10 around 1/2".to_string();
    match stability_scan(&co419_density(), &scan_grid) {
        Ok(report) => {
            let threshold = report.threshold.unwrap_or(f64::NAN);
            let mut verdicts_ok = report.inconclusive.is_empty();
            for t in scan_grid {
                let want = if t < 0.5 { ArcVerdict::Connected } else { ArcVerdict::NotConnected };
                let got = report
                    .entries
                    .iter()
                    .find(|e| (e.t - t).abs() < 1e-15)
                    .map(|e| e.verdict);
                verdicts_ok &= got == Some(want);
            }
            entries.push(entry(
                "threshold-scan",
                inputs,
                format!("threshold located at {}", fmt_num(threshold)),
                Some((threshold - r, threshold)),
                A_THRESHOLD,
                verdicts_ok && (threshold - 0.5).abs() <= r + 1e-12,
            ));
        }
        Err(e) => entries.push(error_entry("threshold-scan", inputs, A_THRESHOLD, e)),
    }

    let inputs = "t0=0.25, beta=2, grid {0.05..0.25}".to_string();
    match co419_agreement_check(0.25, 2.0, &[0.05, 0.1, 0.15, 0.2, 0.25]) {
        Ok(agree) => entries.push(entry(
            "truncation-agreement",
            inputs,
            if agree { "restrictions agree" } else { "restrictions differ" }.to_string(),
            None,
            A_AGREEMENT,
            agree,
        )),
        Err(e) => entries.push(error_entry("truncation-agreement", inputs, A_AGREEMENT, e)),
    }
    entries
}

/// Normalizer and total-variation rate of the approximating sequence for
/// the halving target, with every iterate mixture-connected.
pub fn closure_checks() -> Vec<ReportEntry> {
    let mut entries = Vec::new();
    let p = Density::uniform();
    let target = match Density::simple("half-step", &[(0.0, 0.5, 2.0), (0.5, 1.0, 0.0)]) {
        Ok(t) => t,
        Err(e) => {
            entries.push(error_entry("closure-target", "half-step".to_string(), A_CLOSURE, e));
            return entries;
        }
    };
    let inputs = "p=uniform, target=2 on [0,1/2), a_n=1/n, n in {10, 100, 1000}".to_string();
    match closure_sequence(&p, &target, &[10, 100, 1000]) {
        Ok(seq) => {
            let mut c_worst: f64 = 0.0;
            let mut rate_ok = true;
            let mut connected = 0usize;
            for it in &seq.iterates {
                let nf = it.n as f64;
                c_worst = c_worst.max((it.c_n - (1.0 + 0.5 / nf)).abs());
                rate_ok &= it.l1_error <= 2.0 / nf;
                if let Ok(m) = mix_connected(&p, &it.iterate) {
                    if m.verdict == ArcVerdict::Connected {
                        connected += 1;
                    }
                }
            }
            entries.push(entry(
                "closure-normalizer",
                inputs.clone(),
                format!("worst |c_n - (1 + 1/(2n))| = {}", fmt_num(c_worst)),
                Some((c_worst, 1e-9)),
                A_CLOSURE,
                c_worst <= 1e-9,
            ));
            entries.push(entry(
                "closure-l1-rate",
                inputs.clone(),
                "l1(q_n, q) <= 2/n at every step".to_string(),
                seq.iterates.last().map(|it| (it.l1_error, 2.0 / it.n as f64)),
                A_CLOSURE,
                rate_ok,
            ));
            entries.push(entry(
                "closure-iterates-connected",
                inputs,
                format!("{connected}/{} iterates mixture-connected", seq.iterates.len()),
                None,
                A_CLOSURE,
                connected == seq.iterates.len(),
            ));
        }
        Err(e) => entries.push(error_entry("closure-sequence", inputs, A_CLOSURE, e)),
    }
    entries
}
