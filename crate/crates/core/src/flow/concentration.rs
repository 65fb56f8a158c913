//! H-concentration, H-centers and the monotonicity suites for conjugate heat flows.

use ndarray::Array2;

use super::heat::ConjHeatFlowField;
use super::metric_flow::MetricFlow;
use crate::error::{Error, Result};
use crate::ot::variance::{point_variance, variance_matrix};
use crate::ot::{variance, w1_value, ProbMeasure};

/// Slack for comparisons that involve LP values or accumulated sums.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HConcentration {
    pub h_min: f64,
    /// `(s, t, x1, x2)` attaining the maximum of the difference quotient.
    pub witness: Option<(usize, usize, usize, usize)>,
}

/// `H_min = max (Var(ν_{x1;s}, ν_{x2;s}) − d_t²(x1,x2)) / (t − s)` over `s < t`, clamped at 0.
pub fn h_concentration_constant(flow: &MetricFlow) -> HConcentration {
    let n = flow.n_times();
    let mut h_min = 0.0f64;
    let mut best = f64::NEG_INFINITY;
    let mut witness = None;
    for s in 0..n {
        let ds = flow.slice(s).dist();
        for t in (s + 1)..n {
            let k = flow.kernel(s, t);
            let vm = variance_matrix(ds, &k, &k);
            let dt = flow.slice(t).dist();
            let lag = flow.time(t) - flow.time(s);
            for ((x1, x2), &v) in vm.indexed_iter() {
                let q = (v - dt[[x1, x2]].powi(2)) / lag;
                if q > best {
                    best = q;
                    witness = Some((s, t, x1, x2));
                }
            }
        }
    }
    if best > 0.0 {
        h_min = best;
    }
    HConcentration { h_min, witness }
}

/// Largest violation of `Var(ν_{x1;s}, ν_{x2;s}) ≤ d_t² + H(t−s)` (non-positive when concentrated).
pub fn concentration_excess(flow: &MetricFlow, h: f64) -> f64 {
    let n = flow.n_times();
    let mut worst = f64::NEG_INFINITY;
    for s in 0..n {
        for t in (s + 1)..n {
            let k = flow.kernel(s, t);
            let vm = variance_matrix(flow.slice(s).dist(), &k, &k);
            let dt = flow.slice(t).dist();
            let lag = flow.time(t) - flow.time(s);
            for ((a, b), &v) in vm.indexed_iter() {
                worst = worst.max(v - dt[[a, b]].powi(2) - h * lag);
            }
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct HCenters {
    pub centers: Vec<usize>,
    /// Whether `H` is at least the flow's concentration constant.
    pub concentrated: bool,
    /// `max d_s(z1, z2)` over returned centers.
    pub spread: f64,
    /// `2√(H(t−s))`.
    pub spread_bound: f64,
}

/// Points `z ∈ X_s` with `Var(δ_z, ν_{x;s}) ≤ H(t−s)`.
pub fn h_centers(flow: &MetricFlow, t: usize, x: usize, s: usize, h: f64) -> Result<HCenters> {
    if s > t || t >= flow.n_times() || x >= flow.slice(t).len() {
        return Err(Error::Input(format!("invalid H-center query (x={x}, t={t}, s={s})")));
    }
    let concentrated = h >= h_concentration_constant(flow).h_min;
    let nu = flow.nu(t, x, s)?;
    let xs = flow.slice(s);
    let budget = h * (flow.time(t) - flow.time(s));
    let tol = 1e-12 * budget.abs().max(1e-300);
    let centers: Vec<usize> = (0..xs.len()).filter(|&z| point_variance(xs, z, &nu) <= budget + tol).collect();
    if centers.is_empty() && concentrated {
        return Err(Error::Internal(format!("no H-center for x={x} at t={t}, s={s} although H ≥ H_min")));
    }
    let spread = centers
        .iter()
        .flat_map(|&a| centers.iter().map(move |&b| (a, b)))
        .map(|(a, b)| xs.d(a, b))
        .fold(0.0, f64::max);
    Ok(HCenters { centers, concentrated, spread, spread_bound: 2.0 * budget.max(0.0).sqrt() })
}

#[derive(Debug, Clone)]
pub struct MassBoundEntry {
    pub center: usize,
    pub a: f64,
    pub mass: f64,
    pub bound: f64,
}

impl MassBoundEntry {
    pub fn holds(&self) -> bool {
        self.mass >= self.bound - 1e-12
    }
}

/// `ν_{x;s}(B(z, √(A H (t−s)))) ≥ 1 − 1/A` for every H-center `z` and every `A`.
/// Balls are open; a zero radius uses the closed ball `{z}`.
pub fn hcenter_mass_bound_check(
    flow: &MetricFlow,
    t: usize,
    x: usize,
    s: usize,
    h: f64,
    a_values: &[f64],
) -> Result<Vec<MassBoundEntry>> {
    let hc = h_centers(flow, t, x, s, h)?;
    let nu = flow.nu_row(t, x, s);
    let xs = flow.slice(s);
    let lag = flow.time(t) - flow.time(s);
    let mut out = Vec::new();
    for &z in &hc.centers {
        for &a in a_values {
            if !(a > 0.0) {
                return Err(Error::Input(format!("A = {a} must be positive")));
            }
            let radius = (a * h * lag).max(0.0).sqrt();
            let mass: f64 = (0..xs.len())
                .filter(|&y| if radius > 0.0 { xs.d(z, y) < radius } else { y == z })
                .map(|y| nu[y])
                .sum();
            out.push(MassBoundEntry { center: z, a, mass, bound: 1.0 - 1.0 / a });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    /// `(grid index, value)` in increasing time.
    pub series: Vec<(usize, f64)>,
    /// Largest decrease between consecutive times.
    pub worst_drop: f64,
    pub passed: bool,
}

fn monotone_report(series: Vec<(usize, f64)>) -> MonotonicityReport {
    let worst_drop = series.windows(2).map(|w| w[0].1 - w[1].1).fold(0.0, f64::max);
    MonotonicityReport { series, worst_drop, passed: worst_drop <= MONOTONE_SLACK }
}

fn common_times(mu1: &ConjHeatFlowField, mu2: &ConjHeatFlowField) -> Vec<usize> {
    let mut out: Vec<usize> = mu1.times.iter().copied().filter(|t| mu2.times.contains(t)).collect();
    out.sort_unstable();
    out
}

/// `t ↦ d_W1(μ¹_t, μ²_t)` is non-decreasing.
pub fn w1_kernel_monotonicity_check(
    flow: &MetricFlow,
    mu1: &ConjHeatFlowField,
    mu2: &ConjHeatFlowField,
) -> Result<MonotonicityReport> {
    let series = common_times(mu1, mu2)
        .into_iter()
        .map(|t| Ok((t, w1_value(flow.slice(t), mu1.at(t).expect("common"), mu2.at(t).expect("common"))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(monotone_report(series))
}

/// Largest `d_W1(ν_{x1;s}, ν_{x2;s}) − d_t(x1, x2)` over all `s < t` and pairs.
pub fn kernel_w1_contraction_excess(flow: &MetricFlow) -> Result<f64> {
    let n = flow.n_times();
    let mut worst = f64::NEG_INFINITY;
    for s in 0..n {
        for t in (s + 1)..n {
            let nt = flow.slice(t).len();
            let rows: Vec<ProbMeasure> = (0..nt).map(|x| flow.nu(t, x, s)).collect::<Result<_>>()?;
            for x1 in 0..nt {
                for x2 in (x1 + 1)..nt {
                    let w = w1_value(flow.slice(s), &rows[x1], &rows[x2])?;
                    worst = worst.max(w - flow.slice(t).d(x1, x2));
                }
            }
        }
    }
    Ok(worst)
}

/// `t ↦ Var(μ¹_t, μ²_t) + H t` is non-decreasing.
pub fn var_plus_ht_monotonicity_check(
    flow: &MetricFlow,
    mu1: &ConjHeatFlowField,
    mu2: &ConjHeatFlowField,
    h: f64,
) -> Result<MonotonicityReport> {
    let series = common_times(mu1, mu2)
        .into_iter()
        .map(|t| {
            let v = variance(flow.slice(t), mu1.at(t).expect("common"), mu2.at(t).expect("common"))?;
            Ok((t, v + h * flow.time(t)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(monotone_report(series))
}

/// Variance matrix helper re-exported for reports: `Var(ν_{x1;s}, ν_{x2;s})` for all `x1, x2 ∈ X_t`.
pub fn kernel_variances(flow: &MetricFlow, s: usize, t: usize) -> Array2<f64> {
    let k = flow.kernel(s, t);
    variance_matrix(flow.slice(s).dist(), &k, &k)
}
