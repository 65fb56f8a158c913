use std::io::Write;

use metricflow::flow::axioms::{RATIO_TOL, REPRODUCTION_TOL};
use metricflow::flow::concentration::MONOTONE_SLACK;
use metricflow::flow::{
    concentration_excess, h_concentration_constant, heat_forward, pairing_invariant_check, var_plus_ht_monotonicity_check,
    verify_flow_axioms, w1_kernel_monotonicity_check, AxiomViolation, GradientMode, MetricFlow,
};
use serde::Serialize;

use super::{conj_from_top, io_err, write_json, Outcome};
use crate::args::{AutoOr, CheckMode, Start, VerifyArgs};
use crate::document::load_flow;
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub file: String,
    pub approximate: bool,
    pub h: f64,
    pub h_min: f64,
    pub gradient_verdict: String,
    pub checks: Vec<Check>,
    pub witnesses: Vec<String>,
    pub passed: bool,
}

fn declared_residual(flow: &MetricFlow) -> Option<f64> {
    flow.tags.iter().find(|(k, _)| k == "reproduction_residual").and_then(|(_, v)| v.parse().ok())
}

pub fn verify_flow(flow: &MetricFlow, a: &VerifyArgs) -> Result<VerifyReport, CliError> {
    let mode = match a.mode {
        CheckMode::Exhaustive => GradientMode::Exhaustive2pt { step: a.step, seeds: a.seeds },
        CheckMode::Randomized => GradientMode::Randomized { seeds: a.seeds },
        CheckMode::Skip => GradientMode::Skip,
    };
    if !(a.step > 0.0 && a.step < 1.0) {
        return Err(CliError::Usage(format!("--step {} must lie in (0, 1)", a.step)));
    }
    let axioms = verify_flow_axioms(flow, mode, a.seed);
    let mut checks = Vec::new();
    let mut witnesses = Vec::new();

    let slice_bad: Vec<&AxiomViolation> =
        axioms.violations.iter().filter(|v| matches!(v, AxiomViolation::SliceNotMetric { .. })).collect();
    checks.push(Check {
        name: "slice metric axioms",
        value: slice_bad.len() as f64,
        limit: 0.0,
        passed: slice_bad.is_empty(),
        detail: format!("{} slices", flow.n_times()),
    });
    let rows_bad = axioms.violations.iter().filter(|v| matches!(v, AxiomViolation::KernelRowSum { .. })).count();
    checks.push(Check {
        name: "kernel row sums",
        value: axioms.max_row_sum_error,
        limit: metricflow::ot::measure::MASS_TOL,
        passed: rows_bad == 0,
        detail: format!("{rows_bad} rows off"),
    });

    // Sampled flows are graded against the residual their generator recorded.
    let (repro_limit, repro_detail) = match (flow.approximate, declared_residual(flow)) {
        (true, Some(r)) => (r.max(REPRODUCTION_TOL) * (1.0 + 1e-6), "declared by the generator"),
        _ => (REPRODUCTION_TOL, "exact flow"),
    };
    checks.push(Check {
        name: "reproduction residual",
        value: axioms.reproduction_residual,
        limit: repro_limit,
        passed: axioms.reproduction_residual <= repro_limit,
        detail: repro_detail.into(),
    });

    let gradient_verdict = if a.mode == CheckMode::Skip {
        "skipped".to_string()
    } else if axioms.gradient_complete() {
        "complete".to_string()
    } else {
        "necessary-only".to_string()
    };
    let gradient_limit = match (flow.approximate, declared_residual(flow)) {
        (true, Some(r)) => 1.0 + r.max(RATIO_TOL),
        _ => 1.0 + RATIO_TOL,
    };
    if a.mode != CheckMode::Skip {
        let worst = axioms.worst_gradient_ratio();
        checks.push(Check {
            name: "gradient axiom",
            value: worst,
            limit: gradient_limit,
            passed: worst <= gradient_limit,
            detail: format!("{gradient_verdict}, {} time pairs", axioms.gradient.len()),
        });
    }
    for v in &axioms.violations {
        match v {
            AxiomViolation::Reproduction { residual, .. } if *residual <= repro_limit => {}
            AxiomViolation::Gradient { ratio, .. } if *ratio <= gradient_limit => {}
            other => witnesses.push(format!("{other:?}")),
        }
    }

    let hc = h_concentration_constant(flow);
    let h = match a.h {
        AutoOr::Auto => hc.h_min,
        AutoOr::Value(v) if v >= 0.0 => v,
        AutoOr::Value(v) => return Err(CliError::Usage(format!("--H {v} must be non-negative"))),
    };
    let excess = concentration_excess(flow, h);
    let excess = if excess.is_finite() { excess } else { 0.0 };
    let concentrated = excess <= MONOTONE_SLACK;
    if !concentrated {
        if let Some((s, t, x1, x2)) = hc.witness {
            witnesses.push(format!("H-concentration: s={s} t={t} x1={x1} x2={x2} needs H ≥ {}", hc.h_min));
        }
    }
    checks.push(Check {
        name: "H-concentration",
        value: excess,
        limit: MONOTONE_SLACK,
        passed: concentrated,
        detail: format!("H = {h}, H_min = {}", hc.h_min),
    });

    if flow.n_times() > 1 {
        let last = flow.slice(flow.n_times() - 1).len() - 1;
        let mu1 = conj_from_top(flow, Start::Point(0))?;
        let mu2 = conj_from_top(flow, Start::Point(last))?;
        let w1 = w1_kernel_monotonicity_check(flow, &mu1, &mu2)?;
        checks.push(Check {
            name: "dW1 monotone",
            value: w1.worst_drop,
            limit: MONOTONE_SLACK,
            passed: w1.passed,
            detail: format!("from points 0 and {last} at the final time"),
        });
        let var = var_plus_ht_monotonicity_check(flow, &mu1, &mu2, h)?;
        checks.push(Check {
            name: "Var + Ht monotone",
            value: var.worst_drop,
            limit: MONOTONE_SLACK,
            passed: var.passed,
            detail: format!("H = {h}"),
        });
        let u0: Vec<f64> = (0..flow.slice(0).len()).map(|y| flow.slice(0).d(0, y)).collect();
        let u = heat_forward(flow, 0, &u0)?;
        let pairing = pairing_invariant_check(&u, &mu1)?;
        let field_tol = metricflow::flow::heat::FIELD_TOL;
        // A kernel entry off by δ moves ∫u dμ by at most n₀ · δ · max|u₀|.
        let (limit, passed) = match (flow.approximate, declared_residual(flow)) {
            (true, Some(r)) => {
                let sup = u0.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
                let limit = field_tol + u0.len() as f64 * r * sup;
                (limit, pairing.max_deviation <= limit)
            }
            _ => (field_tol, pairing.passed),
        };
        checks.push(Check {
            name: "pairing invariant",
            value: pairing.max_deviation,
            limit,
            passed,
            detail: "u_0 = d(x_0, ·)".into(),
        });
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        file: String::new(),
        approximate: flow.approximate,
        h,
        h_min: hc.h_min,
        gradient_verdict,
        checks,
        witnesses,
        passed,
    })
}

pub fn verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let flow = load_flow(&a.file)?;
    let mut report = verify_flow(&flow, a)?;
    report.file = a.file.display().to_string();
    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(io_err("<stdout>"));
    w(out, format!("flow {} ({} times)", report.file, flow.n_times()))?;
    if report.approximate {
        w(out, "approximate: yes (sampled kernels; residuals below)".into())?;
    }
    w(out, format!("{:<24} {:>24} {:>24}  status  detail", "check", "measured", "limit"))?;
    for c in &report.checks {
        let status = if c.passed { "ok" } else { "FAIL" };
        w(out, format!("{:<24} {:>24e} {:>24e}  {status:<6}  {}", c.name, c.value, c.limit, c.detail))?;
    }
    for wit in &report.witnesses {
        w(out, format!("witness: {wit}"))?;
    }
    w(out, format!("result: {}", if report.passed { "pass" } else { "fail" }))?;
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    Ok(Outcome::from_passed(report.passed))
}
