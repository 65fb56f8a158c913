//! P*-parabolic neighborhoods.

use super::metric_flow::MetricFlow;
use crate::error::{Error, Result};
use crate::ot::w1_value;

/// Center `x ∈ X_t` and radii `A`, `T⁻`, `T⁺` of `P*(x; A, −T⁻, T⁺)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PStarParams {
    pub t: usize,
    pub x: usize,
    pub a: f64,
    pub t_minus: f64,
    pub t_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PStarResult {
    pub contained: bool,
    /// Grid index used as the reference time `𝔱(x) − T⁻` after snapping down.
    pub reference: usize,
    /// `d_W1(ν_{x;ref}, ν_{x′;ref})`, absent when the time window already excludes `x′`.
    pub distance: Option<f64>,
}

/// Whether `(t′, x′)` lies in the neighborhood: `𝔱(x′) ∈ [𝔱(x) − T⁻, 𝔱(x) + T⁺]` and
/// `d_W1(ν_{x;s}, ν_{x′;s}) < A` at `s` = the reference time.
pub fn pstar_contains(flow: &MetricFlow, p: &PStarParams, t_prime: usize, x_prime: usize) -> Result<PStarResult> {
    if p.a < 0.0 || p.t_minus < 0.0 || p.t_plus < 0.0 {
        return Err(Error::Input("P* radii must be nonnegative".into()));
    }
    if p.t >= flow.n_times() || t_prime >= flow.n_times() {
        return Err(Error::Input("time index out of range".into()));
    }
    let tx = flow.time(p.t);
    let reference = flow.grid().snap_down(tx - p.t_minus)?;
    let tp = flow.time(t_prime);
    let tol = 1e-12 * tx.abs().max(1.0);
    let in_window = tp >= tx - p.t_minus - tol && tp <= tx + p.t_plus + tol && t_prime >= reference;
    if !in_window {
        return Ok(PStarResult { contained: false, reference, distance: None });
    }
    let s = flow.slice(reference);
    let d = w1_value(s, &flow.nu(p.t, p.x, reference)?, &flow.nu(t_prime, x_prime, reference)?)?;
    Ok(PStarResult { contained: d < p.a, reference, distance: Some(d) })
}

/// All points of the neighborhood as `(grid index, point index)`.
pub fn pstar_members(flow: &MetricFlow, p: &PStarParams) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for t in 0..flow.n_times() {
        for x in 0..flow.slice(t).len() {
            if pstar_contains(flow, p, t, x)?.contained {
                out.push((t, x));
            }
        }
    }
    Ok(out)
}
