//! Heat flows (forward in time) and conjugate heat flows (backward in time).

use ndarray::Array1;

use super::metric_flow::MetricFlow;
use crate::error::{Error, Result};
use crate::ot::ProbMeasure;

/// Residual tolerance for the defining identities of (conjugate) heat flows.
pub const FIELD_TOL: f64 = 1e-10;

/// `u_t(x) = Σ u_s dν_{x;s}` on the listed grid indices.
#[derive(Debug, Clone)]
pub struct HeatFlowField {
    pub times: Vec<usize>,
    pub values: Vec<Array1<f64>>,
}

/// `μ_s = Σ_x ν_{x;s} μ_t(x)` on the listed grid indices.
#[derive(Debug, Clone)]
pub struct ConjHeatFlowField {
    pub times: Vec<usize>,
    pub measures: Vec<ProbMeasure>,
}

impl HeatFlowField {
    pub fn at(&self, t: usize) -> Option<&Array1<f64>> {
        self.times.iter().position(|&k| k == t).map(|p| &self.values[p])
    }

    /// Largest violation of `u_t = K(s,t) u_s` over all stored pairs.
    pub fn residual(&self, flow: &MetricFlow) -> f64 {
        let mut worst = 0.0f64;
        for (a, &s) in self.times.iter().enumerate() {
            for (b, &t) in self.times.iter().enumerate() {
                if s < t {
                    let pred = flow.kernel(s, t).dot(&self.values[a]);
                    worst = worst.max((&pred - &self.values[b]).mapv(f64::abs).fold(0.0, |x: f64, &y| x.max(y)));
                }
            }
        }
        worst
    }
}

impl ConjHeatFlowField {
    pub fn at(&self, t: usize) -> Option<&ProbMeasure> {
        self.times.iter().position(|&k| k == t).map(|p| &self.measures[p])
    }

    /// Largest violation of `μ_s = K(s,t)ᵀ μ_t` over all stored pairs.
    pub fn residual(&self, flow: &MetricFlow) -> f64 {
        let mut worst = 0.0f64;
        for (a, &s) in self.times.iter().enumerate() {
            for (b, &t) in self.times.iter().enumerate() {
                if s < t {
                    let pred = flow.kernel(s, t).t().dot(&self.measures[b].weights());
                    let diff = &pred - &self.measures[a].weights();
                    worst = worst.max(diff.mapv(f64::abs).fold(0.0, |x: f64, &y| x.max(y)));
                }
            }
        }
        worst
    }

    /// Restriction to a subset of the stored times.
    pub fn restrict(&self, times: &[usize]) -> Result<Self> {
        let mut out = Self { times: Vec::new(), measures: Vec::new() };
        for &t in times {
            let m = self.at(t).ok_or_else(|| Error::Input(format!("field undefined at index {t}")))?;
            out.times.push(t);
            out.measures.push(m.clone());
        }
        Ok(out)
    }
}

/// Propagates `u0` on `X_{t0}` to every later grid time.
pub fn heat_forward(flow: &MetricFlow, t0: usize, u0: &[f64]) -> Result<HeatFlowField> {
    if t0 >= flow.n_times() {
        return Err(Error::Input(format!("time index {t0} out of range")));
    }
    if u0.len() != flow.slice(t0).len() || u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("initial data must be finite with one value per point".into()));
    }
    let u0 = Array1::from(u0.to_vec());
    let times: Vec<usize> = (t0..flow.n_times()).collect();
    let values = times.iter().map(|&t| flow.kernel(t0, t).dot(&u0)).collect();
    Ok(HeatFlowField { times, values })
}

/// Propagates `mu0` on `X_{t0}` to every earlier grid time.
pub fn conj_backward(flow: &MetricFlow, t0: usize, mu0: &ProbMeasure) -> Result<ConjHeatFlowField> {
    if t0 >= flow.n_times() {
        return Err(Error::Input(format!("time index {t0} out of range")));
    }
    if mu0.len() != flow.slice(t0).len() {
        return Err(Error::Input("measure length does not match the slice".into()));
    }
    let times: Vec<usize> = (0..=t0).collect();
    let measures = times
        .iter()
        .map(|&s| {
            let w = flow.kernel(s, t0).t().dot(&mu0.weights());
            // Kernels are stochastic up to rounding; renormalize the last ulp.
            ProbMeasure::normalized(w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConjHeatFlowField { times, measures })
}

#[derive(Debug, Clone)]
pub struct PairingReport {
    /// `(grid index, ∫ u_t dμ_t)`.
    pub values: Vec<(usize, f64)>,
    pub max_deviation: f64,
    pub passed: bool,
}

/// `∫ u_t dμ_t` on the common times; constant for a heat flow paired with a conjugate heat flow.
pub fn pairing_invariant_check(u: &HeatFlowField, mu: &ConjHeatFlowField) -> Result<PairingReport> {
    let values: Vec<(usize, f64)> = u
        .times
        .iter()
        .filter_map(|&t| mu.at(t).map(|m| (t, u.at(t).expect("listed").dot(&m.weights()))))
        .collect();
    if values.is_empty() {
        return Err(Error::Input("heat flow and conjugate heat flow share no times".into()));
    }
    let base = values[0].1;
    let max_deviation = values.iter().map(|(_, v)| (v - base).abs()).fold(0.0, f64::max);
    Ok(PairingReport { values, max_deviation, passed: max_deviation <= FIELD_TOL })
}
