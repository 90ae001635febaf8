//! Report builders for the individual subcommands. Input problems (bad
//! specs, out-of-range parameters) surface as `Err(String)` and map to
//! usage errors; computational outcomes, including failed checks, land in
//! the report entries.

use crate::report::{entry, fmt_num, Report, PLUMBING};
use crate::spec::{parse_density, parse_variable};
use crate::suite::{finiteness_str, verdict_str};
use expmix_core::arcs::{mix_connected, represent, theorem_main_crosscheck, ArcVerdict};
use expmix_core::closure::closure_sequence;
use expmix_core::counterexamples::{
    divergenza_kl_direct, divergenza_kl_series, divergenza_moment_verdict, KlDirection,
};
use expmix_core::divergence::{finitediv_equivalence, kl_divergence};
use expmix_core::filtration::{restrict, stability_scan};
use expmix_core::measure::{QuadratureSpec, Verdict};
use expmix_core::orlicz::{luxemburg_norm, NormVerdict};
use expmix_core::young::by_name;

fn usage<E: core::fmt::Debug>(context: &str) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{context}: {e:?}")
}

pub fn norm_report(u_spec: &str, p_spec: &str, phi_name: &str, tol: f64) -> Result<Report, String> {
    let u = parse_variable(u_spec)?;
    let p = parse_density(p_spec)?;
    let phi = by_name(phi_name).ok_or_else(|| {
        format!("unknown Young function `{phi_name}` (try cosh_minus_one, exp_minus_linear, asinh_primitive, log1p_primitive)")
    })?;
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(format!("tolerance must be positive, got {tol}"));
    }
    let inputs = format!("u={u_spec}, p={p_spec}, phi={phi_name}");
    let result = luxemburg_norm(&u, &p, phi, tol).map_err(usage("norm computation failed"))?;
    let verdict = match result.verdict {
        NormVerdict::Finite => format!("Finite, norm = {}", fmt_num(result.value)),
        NormVerdict::Infinite => "Infinite".to_string(),
    };
    let entries = vec![entry(
        "luxemburg-norm",
        inputs,
        verdict,
        Some(result.bracket),
        "Orlicz gauge of the variable",
        true,
    )];
    Ok(Report::new("norm", entries))
}

pub fn arc_report(exponential: bool, p_spec: &str, q_spec: &str) -> Result<Report, String> {
    let p = parse_density(p_spec)?;
    let q = parse_density(q_spec)?;
    let inputs = format!("p={p_spec}, q={q_spec}");
    let (id, command, report) = if exponential {
        let r = expmix_core::arcs::exp_connected(&p, &q)
            .map_err(usage("exponential arc check failed"))?;
        ("arc-exp-verdict", "arc exp-check", r)
    } else {
        let r = mix_connected(&p, &q).map_err(usage("mixture arc check failed"))?;
        ("arc-mix-verdict", "arc mix-check", r)
    };
    let interval = report.witness_interval.or(report.ratio_bounds);
    let anchor = if exponential {
        "open exponential arc membership"
    } else {
        "open mixture arc membership"
    };
    let entries = vec![entry(
        id,
        inputs,
        verdict_str(report.verdict).to_string(),
        interval,
        anchor,
        report.verdict != ArcVerdict::Inconclusive,
    )];
    Ok(Report::new(command, entries))
}

pub fn model_report(p_spec: &str, q_spec: &str) -> Result<Report, String> {
    let p = parse_density(p_spec)?;
    let q = parse_density(q_spec)?;
    let inputs = format!("p={p_spec}, q={q_spec}");
    let cross = theorem_main_crosscheck(&p, &q).map_err(usage("membership crosscheck failed"))?;
    let mut entries = Vec::new();
    for ce in &cross.entries {
        entries.push(entry(
            &format!("model-condition-{}", ce.condition.replace(' ', "-")),
            inputs.clone(),
            verdict_str(ce.verdict).to_string(),
            None,
            "equivalent membership conditions",
            ce.verdict != ArcVerdict::Inconclusive,
        ));
    }
    entries.push(entry(
        "model-crosscheck-agreement",
        inputs.clone(),
        verdict_str(cross.agreed).to_string(),
        None,
        "equivalent membership conditions",
        cross.agreed != ArcVerdict::Inconclusive,
    ));
    if cross.agreed == ArcVerdict::Connected {
        let rep = represent(&p, &q).map_err(usage("representation failed"))?;
        entries.push(entry(
            "model-representation",
            inputs,
            format!(
                "q = exp(u - K) p with K = {}, residual {}",
                fmt_num(rep.k_value),
                fmt_num(rep.residual)
            ),
            Some((rep.residual, 1e-6)),
            "exponential representation of the density",
            rep.residual <= 1e-6,
        ));
    } else {
        entries.push(entry(
            "model-representation",
            inputs,
            "skipped: density is not in the exponential family of p".to_string(),
            None,
            "exponential representation of the density",
            true,
        ));
    }
    Ok(Report::new("model", entries))
}

pub fn divergence_report(p_spec: &str, q_spec: &str) -> Result<Report, String> {
    let p = parse_density(p_spec)?;
    let q = parse_density(q_spec)?;
    let inputs = format!("p={p_spec}, q={q_spec}");
    let mut entries = Vec::new();
    let qp = kl_divergence(&q, &p).map_err(usage("divergence computation failed"))?;
    let pq = kl_divergence(&p, &q).map_err(usage("divergence computation failed"))?;
    for (id, label, v) in [("divergence-qp", "D(q||p)", qp), ("divergence-pq", "D(p||q)", pq)] {
        let verdict = match v.value() {
            Some(x) => format!("{}, {label} = {}", finiteness_str(v.verdict), fmt_num(x)),
            None => finiteness_str(v.verdict).to_string(),
        };
        let interval = v.value().map(|x| (x - v.error_bound, x + v.error_bound));
        entries.push(entry(
            id,
            inputs.clone(),
            verdict,
            interval,
            "relative entropy between the pair",
            v.verdict != Verdict::Inconclusive,
        ));
    }
    let equiv = finitediv_equivalence(&q, &p).map_err(usage("equivalence check failed"))?;
    entries.push(entry(
        "divergence-equivalence",
        inputs,
        format!(
            "divergence {}, ratio membership {}, log-ratio integrability {}",
            finiteness_str(equiv.lemma_checks.divergence),
            finiteness_str(equiv.lemma_checks.ratio_membership),
            finiteness_str(equiv.lemma_checks.logratio_integrable)
        ),
        None,
        "divergence finiteness equivalence",
        equiv.lemma_checks.consistent(),
    ));
    Ok(Report::new("divergence", entries))
}

pub fn counterexample_report(eps_pow_max: u32, series_terms: u64) -> Result<Report, String> {
    if eps_pow_max > 60 {
        return Err(format!("eps power {eps_pow_max} too large (max 60)"));
    }
    if series_terms == 0 {
        return Err("series terms must be at least 1".to_string());
    }
    let mut entries = Vec::new();
    let total = eps_pow_max + 1;
    let mut witnessed = 0u32;
    for j in 0..total {
        let eps = 0.5_f64.powi(j as i32);
        if let Ok(r) = divergenza_moment_verdict(eps) {
            if r.verdict == Verdict::Divergent
                && r.witness_piece.is_some_and(|w| w as f64 * eps >= 1.0)
            {
                witnessed += 1;
            }
        }
    }
    entries.push(entry(
        "moments-divergent",
        format!("q=divergenza, eps=2^0..2^-{eps_pow_max}"),
        format!("Divergent with witness piece, {witnessed}/{total} exponents"),
        None,
        "one-sided family power moments",
        witnessed == total,
    ));
    for (dir, id, label) in [
        (KlDirection::DensityFromUniform, "kl-qp", "D(q||1)"),
        (KlDirection::UniformFromDensity, "kl-pq", "D(1||q)"),
    ] {
        let series = divergenza_kl_series(dir, series_terms);
        let direct = divergenza_kl_direct(dir, series_terms, &QuadratureSpec::default())
            .map_err(usage("direct integration failed"))?;
        let dv = direct.value().unwrap_or(f64::NAN);
        let diff = (series.partial_sum - dv).abs();
        entries.push(entry(
            id,
            format!("terms={series_terms}"),
            format!("Finite, {label} = {} (gap {})", fmt_num(series.partial_sum), fmt_num(diff)),
            Some(series.value_interval()),
            "one-sided family relative entropy",
            series.partial_sum.is_finite() && diff <= direct.error_bound + 1e-9,
        ));
    }
    Ok(Report::new("counterexample", entries))
}

pub fn restrict_report(p_spec: &str, t: f64) -> Result<Report, String> {
    let p = parse_density(p_spec)?;
    let inputs = format!("p={p_spec}, t={}", fmt_num(t));
    let result = restrict(&p, t).map_err(usage("restriction failed"))?;
    let mut entries = vec![entry(
        "restriction-cdf",
        inputs.clone(),
        format!("F({}) = {}", fmt_num(t), fmt_num(result.f_t)),
        Some((0.0, result.f_t)),
        "conditional restriction to the cut",
        (0.0..=1.0).contains(&result.f_t),
    )];
    let mass = result
        .restricted
        .total_mass(&QuadratureSpec::default())
        .map_err(usage("mass check failed"))?;
    let m = mass.value().unwrap_or(f64::NAN);
    entries.push(entry(
        "restriction-mass",
        inputs.clone(),
        format!("restricted density mass = {}", fmt_num(m)),
        Some((m - mass.error_bound, m + mass.error_bound)),
        "conditional restriction to the cut",
        (m - 1.0).abs() <= 1e-6 + mass.error_bound,
    ));
    if t < 1.0 {
        let flat = (1.0 - result.f_t) / (1.0 - t);
        entries.push(entry(
            "restriction-flat-level",
            inputs,
            format!("flat level beyond the cut = {}", fmt_num(flat)),
            Some((flat, flat)),
            "conditional restriction to the cut",
            flat > 0.0,
        ));
    }
    Ok(Report::new("restrict", entries))
}

pub fn stability_report(p_spec: &str, grid: &[f64]) -> Result<Report, String> {
    let p = parse_density(p_spec)?;
    let inputs = format!(
        "p={p_spec}, grid={}",
        grid.iter().map(|t| fmt_num(*t)).collect::<Vec<_>>().join(",")
    );
    let report = stability_scan(&p, grid).map_err(usage("stability scan failed"))?;
    let mut entries = Vec::new();
    for (k, e) in report.entries.iter().enumerate() {
        entries.push(entry(
            &format!("scan-point-{k:03}"),
            format!("t={}", fmt_num(e.t)),
            verdict_str(e.verdict).to_string(),
            e.witness,
            "restriction connectivity scan",
            e.verdict != ArcVerdict::Inconclusive,
        ));
    }
    let verdict = match report.threshold {
        Some(t) => format!("first disconnected cut at t = {}", fmt_num(t)),
        None => "connected on the whole grid".to_string(),
    };
    entries.push(entry(
        "scan-threshold",
        inputs,
        verdict,
        report.threshold.map(|t| (t - expmix_core::filtration::THRESHOLD_RESOLUTION, t)),
        "restriction connectivity scan",
        report.inconclusive.is_empty(),
    ));
    Ok(Report::new("stability-scan", entries))
}

pub fn closure_report(p_spec: &str, target_spec: &str, n_max: u64) -> Result<Report, String> {
    let p = parse_density(p_spec)?;
    let target = parse_density(target_spec)?;
    if n_max == 0 {
        return Err("n-max must be at least 1".to_string());
    }
    let mut ns = Vec::new();
    let mut n = 1u64;
    while n < n_max {
        ns.push(n);
        n = n.saturating_mul(2);
    }
    ns.push(n_max);
    ns.dedup();
    let inputs = format!("density={p_spec}, target={target_spec}, n-max={n_max}");
    let seq = closure_sequence(&p, &target, &ns).map_err(usage("closure step failed"))?;
    let mut entries = Vec::new();
    for it in &seq.iterates {
        entries.push(entry(
            &format!("closure-n-{:06}", it.n),
            format!("n={}", it.n),
            format!("c_n = {}, l1 error = {}", fmt_num(it.c_n), fmt_num(it.l1_error)),
            Some((it.c_n, it.l1_error)),
            "constructive total-variation closure",
            true,
        ));
    }
    let tail_decreasing = seq
        .iterates
        .windows(2)
        .rev()
        .take(2)
        .all(|w| w[1].l1_error <= w[0].l1_error + 1e-12);
    entries.push(entry(
        "closure-error-trend",
        inputs,
        if tail_decreasing {
            "total-variation error decreasing at the tail".to_string()
        } else {
            "total-variation error not decreasing".to_string()
        },
        seq.iterates.last().map(|it| (0.0, it.l1_error)),
        PLUMBING,
        tail_decreasing,
    ));
    Ok(Report::new("closure approx", entries))
}
