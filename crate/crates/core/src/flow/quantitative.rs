//! Quantitative diagnostics for conjugate heat flows on time-slices: the
//! `∫∫d` difference bounds and the lower bound on the mass distribution function.

use super::concentration::h_concentration_constant;
use super::heat::ConjHeatFlowField;
use super::metric_flow::MetricFlow;
use super::phi::phi;
use crate::error::{Error, Result};
use crate::ot::{mass_distribution_fn, self_variance, ProbMeasure};

/// Slack for both inequalities of the `∫∫d` bounds.
pub const INTD_SLACK: f64 = 1e-9;

fn measure_at(mu: &ConjHeatFlowField, t: usize) -> Result<&ProbMeasure> {
    mu.at(t).ok_or_else(|| Error::Input(format!("conjugate heat flow undefined at index {t}")))
}

/// `Σ d_t(x, y) μ_t(x) μ_t(y)`.
pub fn d_integral(flow: &MetricFlow, mu: &ConjHeatFlowField, t: usize) -> Result<f64> {
    let m = measure_at(mu, t)?;
    let d = flow.slice(t).dist();
    let w = m.weights();
    Ok(w.dot(&d.dot(&w)))
}

#[derive(Debug, Clone)]
pub struct IntdReport {
    pub s: usize,
    pub t: usize,
    /// `∫∫d_t − ∫∫d_s`.
    pub difference: f64,
    /// `−√(H(t−s))`.
    pub lower: f64,
    /// `√(Var(μ_t) − Var(μ_s) + H(t−s)) + 2√(H(t−s))`.
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// Whether `H` is at least the flow's concentration constant.
    pub concentrated: bool,
}

impl IntdReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Checks `−√(H(t−s)) ≤ ∫∫d_t dμ_t dμ_t − ∫∫d_s dμ_s dμ_s ≤ √(Var(μ_t)−Var(μ_s)+H(t−s)) + 2√(H(t−s))`.
pub fn intd_diff_bounds_check(flow: &MetricFlow, mu: &ConjHeatFlowField, h: f64, s: usize, t: usize) -> Result<IntdReport> {
    if s > t {
        return Err(Error::Input(format!("s = {s} must not exceed t = {t}")));
    }
    let lag = flow.time(t) - flow.time(s);
    let ht = (h * lag).max(0.0);
    let difference = d_integral(flow, mu, t)? - d_integral(flow, mu, s)?;
    let var_t = self_variance(flow.slice(t), measure_at(mu, t)?)?;
    let var_s = self_variance(flow.slice(s), measure_at(mu, s)?)?;
    let lower = 0.0 - ht.sqrt();
    // Rounding may push the radicand slightly below zero.
    let upper = (var_t - var_s + ht).max(0.0).sqrt() + 2.0 * ht.sqrt();
    Ok(IntdReport {
        s,
        t,
        difference,
        lower,
        upper,
        lower_ok: difference >= lower - INTD_SLACK,
        upper_ok: difference <= upper + INTD_SLACK,
        concentrated: h >= h_concentration_constant(flow).h_min,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBoundSample {
    pub eps: f64,
    /// `b_r(ε)` of `(X_t, d_t, μ_t)`.
    pub b: f64,
    /// `½Φ(−√(8V/(ετ)))`.
    pub bound: f64,
}

impl MassBoundSample {
    pub fn holds(&self) -> bool {
        self.b >= self.bound - 1e-12
    }
}

#[derive(Debug, Clone)]
pub struct MassBoundReport {
    /// `sup Var(μ_s) ≤ V r²` over the stored times of the conjugate heat flow.
    pub variance_ok: bool,
    pub sup_variance: f64,
    /// `H` is at least the concentration constant.
    pub concentrated: bool,
    /// Grid index of `t + τ r²`, when it is a grid time carrying `μ`.
    pub later_index: Option<usize>,
    /// `[2(τH)^{1/3}, 1]`, or `None` when empty.
    pub eps_range: Option<(f64, f64)>,
    pub samples: Vec<MassBoundSample>,
}

impl MassBoundReport {
    pub fn preconditions_met(&self) -> bool {
        self.variance_ok && self.concentrated && self.later_index.is_some()
    }

    pub fn passed(&self) -> bool {
        self.samples.iter().all(MassBoundSample::holds)
    }

    pub fn worst_margin(&self) -> f64 {
        self.samples.iter().map(|s| s.b - s.bound).fold(f64::INFINITY, f64::min)
    }
}

/// Number of ε samples in the admissible range.
const EPS_SAMPLES: usize = 24;

/// Evaluates `b_r(ε) ≥ ½Φ(−√(8V/(ετ)))` at geometrically spaced `ε ∈ [2(τH)^{1/3}, 1]`.
/// Failed preconditions are reported, not raised.
#[allow(clippy::too_many_arguments)]
pub fn mass_distribution_lower_bound_check(
    flow: &MetricFlow,
    mu: &ConjHeatFlowField,
    t: usize,
    tau: f64,
    r: f64,
    v: f64,
    h: f64,
) -> Result<MassBoundReport> {
    if !(tau > 0.0 && r > 0.0 && v >= 0.0 && h >= 0.0) {
        return Err(Error::Domain("τ and r must be positive, V and H non-negative".into()));
    }
    let mu_t = measure_at(mu, t)?;
    let target = flow.time(t) + tau * r * r;
    let later_index = flow
        .grid()
        .times()
        .iter()
        .position(|&x| (x - target).abs() <= 1e-12 * target.abs().max(1.0))
        .filter(|&k| mu.at(k).is_some());
    let sup_variance = mu
        .times
        .iter()
        .zip(&mu.measures)
        .map(|(&k, m)| self_variance(flow.slice(k), m))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let variance_ok = sup_variance <= v * r * r * (1.0 + 1e-12) + 1e-15;
    let concentrated = h >= h_concentration_constant(flow).h_min;

    let lo = 2.0 * (tau * h).cbrt();
    let eps_range = (lo <= 1.0).then_some((lo, 1.0));
    let mut samples = Vec::new();
    if let Some((lo, hi)) = eps_range {
        // ε = 0 is not a valid argument of b; start just inside the range.
        let start = lo.max(1e-6);
        for k in 0..EPS_SAMPLES {
            let eps = if k + 1 == EPS_SAMPLES { hi } else { start * (hi / start).powf(k as f64 / (EPS_SAMPLES - 1) as f64) };
            let b = mass_distribution_fn(flow.slice(t), mu_t, r, eps)?;
            let bound = 0.5 * phi(-(8.0 * v / (eps * tau)).sqrt());
            samples.push(MassBoundSample { eps, b, bound });
        }
    }
    Ok(MassBoundReport { variance_ok, sup_variance, concentrated, later_index, eps_range, samples })
}
