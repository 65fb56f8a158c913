//! The two-point flow `X_{C,D}`: points `±D/2` at distance `D` for all times
//! and kernels `ν_{±;s}(±) = ½ + ½e^{−C(t−s)/D²}`.

use argmin::core::{CostFunction, Error as ArgminError, Executor};
use argmin::solver::brent::BrentOpt;
use ndarray::Array2;

use super::static_flow::static_flow;
use crate::error::{Error, Result};
use crate::flow::{MetricFlow, TimeGrid};
use crate::ot::FiniteMetricSpace;

/// `16A² ≤ C exp(A²/16)`.
pub fn admissible_at(c: f64, a: f64) -> bool {
    16.0 * a * a <= c * (a * a / 16.0).exp()
}

struct NegCondition;

impl CostFunction for NegCondition {
    type Param = f64;
    type Output = f64;

    fn cost(&self, a: &f64) -> std::result::Result<f64, ArgminError> {
        Ok(-16.0 * a * a * (-a * a / 16.0).exp())
    }
}

/// Smallest `C` with `16A² ≤ C exp(A²/16)` for all `A ≥ 0`, i.e. `max_A 16A²e^{−A²/16}`,
/// found by bounded Brent maximization on `[0, 20]`.
pub fn min_c() -> f64 {
    let res = Executor::new(NegCondition, BrentOpt::new(0.0, 20.0))
        .configure(|state| state.max_iters(200))
        .run()
        .expect("Brent on a smooth unimodal function");
    -res.state().best_cost
}

/// Same maximization, returning the maximizer `A`.
pub fn min_c_argmax() -> f64 {
    let res = Executor::new(NegCondition, BrentOpt::new(0.0, 20.0))
        .configure(|state| state.max_iters(200))
        .run()
        .expect("Brent on a smooth unimodal function");
    res.state().best_param.expect("best parameter")
}

/// Exact kernel at lag `tau`; rows and columns ordered `(−D/2, +D/2)`.
pub fn two_point_kernel(c: f64, d: f64, tau: f64) -> Array2<f64> {
    let e = (-c * tau / (d * d)).exp();
    let (same, other) = (0.5 + 0.5 * e, 0.5 - 0.5 * e);
    ndarray::array![[same, other], [other, same]]
}

/// Closed-form self-variance of `ν_{±;s}` at lag `tau`: a two-point measure
/// with weights `p, 1−p` at distance `D` has `Var = 2p(1−p)D²`.
pub fn two_point_variance(c: f64, d: f64, tau: f64) -> f64 {
    0.5 * d * d * (1.0 - (-2.0 * c * tau / (d * d)).exp())
}

pub fn two_point_flow(c: f64, d: f64, grid: TimeGrid) -> Result<MetricFlow> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Input(format!("D = {d} must be positive")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Input(format!("C = {c} must be positive")));
    }
    let space = FiniteMetricSpace::new(
        vec!["-D/2".into(), "+D/2".into()],
        ndarray::array![[0.0, d], [d, 0.0]],
    )?;
    let mut flow = static_flow(space, |tau| two_point_kernel(c, d, tau), grid)?
        .with_tag("generator", "two-point")
        .with_tag("C", c)
        .with_tag("D", d);
    if c < min_c() {
        flow = flow.with_tag("axiom6", "unverified for this C");
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{h_concentration_constant, GradientMode};
    use crate::ot::self_variance;

    #[test]
    fn min_c_matches_calculus() {
        let exact = 256.0 / std::f64::consts::E;
        assert!((min_c() - exact).abs() <= 1e-8 * exact);
        assert!((min_c_argmax() - 4.0).abs() <= 1e-6);
    }

    #[test]
    fn condition_on_dense_grid() {
        let c = 256.0 / std::f64::consts::E * (1.0 + 1e-9);
        let mut a = 0.0;
        while a <= 40.0 {
            assert!(admissible_at(c, a), "A={a}");
            a += 1e-3;
        }
        assert!(!admissible_at(0.99 * 256.0 / std::f64::consts::E, 4.0));
    }

    #[test]
    fn kernels_reproduce_and_variance_is_closed_form() {
        let c = min_c() * (1.0 + 1e-6);
        let f = two_point_flow(c, 1.3, TimeGrid::uniform(0.0, 1.0, 10).unwrap()).unwrap();
        assert!(f.reproduction_residual().0 <= 1e-15);
        for t in 1..11 {
            let nu = f.nu(t, 1, 0).unwrap();
            let v = self_variance(f.slice(0), &nu).unwrap();
            assert!((v - two_point_variance(c, 1.3, f.time(t))).abs() <= 1e-14);
        }
    }

    #[test]
    fn concentration_constant_closed_form() {
        let c = 10.0;
        let f = two_point_flow(c, 1.0, TimeGrid::uniform(0.0, 1.0, 8).unwrap()).unwrap();
        let dt = 1.0 / 8.0;
        let expect = 0.5 * (1.0 - (-2.0 * c * dt).exp()) / dt;
        assert!((h_concentration_constant(&f).h_min - expect).abs() <= 1e-12);
    }

    #[test]
    fn small_c_is_flagged() {
        let f = two_point_flow(50.0, 1.0, TimeGrid::uniform(0.0, 1.0, 2).unwrap()).unwrap();
        assert!(f.tags.iter().any(|(k, _)| k == "axiom6"));
        assert!(two_point_flow(50.0, 0.0, TimeGrid::uniform(0.0, 1.0, 2).unwrap()).is_err());
    }

    #[test]
    fn coarse_complete_sweep_passes() {
        let f = two_point_flow(min_c() * (1.0 + 1e-6), 1.0, TimeGrid::uniform(0.0, 1.0, 3).unwrap()).unwrap();
        let r = crate::flow::verify_flow_axioms(&f, GradientMode::Exhaustive2pt { step: 0.01, seeds: 8 }, 0);
        assert!(r.passed() && r.gradient_complete());
    }
}
