//! Mass distribution function `b_r(ε)` and membership in the class `M_r(V, b)`.

use serde::{Deserialize, Serialize};

use super::measure::ProbMeasure;
use super::space::FiniteMetricSpace;
use super::variance::self_variance;
use crate::error::{Error, Result};

/// Slack on cumulative mass comparisons against `ε`.
const CUM_TOL: f64 = 1e-12;

/// `b_r(ε) = sup{δ : μ({x : μ(D(x, εr)) < δ}) ≤ ε}`, capped at 1.
///
/// Closed balls use `≤` on stored distances. Only points carrying mass
/// contribute to the outer measure, so they are the only ones inspected.
pub fn mass_distribution_fn(space: &FiniteMetricSpace, mu: &ProbMeasure, r: f64, eps: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("scale r = {r} must be positive")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("ε = {eps} must lie in (0, 1]")));
    }
    if mu.len() != space.len() {
        return Err(Error::Input("measure length does not match the space".into()));
    }
    let radius = eps * r;
    let mut masses: Vec<(f64, f64)> = mu
        .support()
        .into_iter()
        .map(|x| (space.closed_ball(x, radius).map(|y| mu.w(y)).sum::<f64>(), mu.w(x)))
        .collect();
    masses.sort_by(|a, b| a.0.total_cmp(&b.0));
    // The outer measure of {ball mass < δ} is a left-continuous step function of δ
    // that jumps right after each distinct ball mass.
    let mut cum = 0.0;
    let mut k = 0;
    while k < masses.len() {
        let level = masses[k].0;
        let mut group = 0.0;
        while k < masses.len() && masses[k].0 == level {
            group += masses[k].1;
            k += 1;
        }
        if cum + group > eps + CUM_TOL {
            return Ok(level.min(1.0));
        }
        cum += group;
    }
    Ok(1.0)
}

/// A lower-bound function `b` given by samples, extended piecewise-constantly
/// and right-continuously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BFunction {
    eps: Vec<f64>,
    values: Vec<f64>,
}

impl BFunction {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Input("b needs at least one sample".into()));
        }
        let mut samples = samples;
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in samples.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Input(format!("duplicate sample at ε = {}", w[0].0)));
            }
        }
        for &(e, b) in &samples {
            if !(e > 0.0 && e <= 1.0) || !(b > 0.0 && b <= 1.0) {
                return Err(Error::Input(format!("sample ({e}, {b}) outside (0,1]×(0,1]")));
            }
        }
        let (eps, values) = samples.into_iter().unzip();
        Ok(Self { eps, values })
    }

    pub fn constant(value: f64, grid: &[f64]) -> Result<Self> {
        Self::new(grid.iter().map(|&e| (e, value)).collect())
    }

    /// Value at the largest sample `≤ ε`; `None` below the first sample.
    pub fn eval(&self, eps: f64) -> Option<f64> {
        let k = self.eps.partition_point(|&e| e <= eps);
        (k > 0).then(|| self.values[k - 1])
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.eps.iter().copied().zip(self.values.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub member: bool,
    pub variance: f64,
    pub variance_ok: bool,
    /// Samples `(ε, b_r(ε), b(ε))` where `b_r(ε) < b(ε)`.
    pub failing_samples: Vec<(f64, f64, f64)>,
    /// Set when μ lacked full support and the check ran on its support.
    pub restricted_to_support: bool,
}

/// Checks `Var(μ) ≤ V r²` and `b_r ≥ b` at every sample of `b`.
pub fn in_class_m(space: &FiniteMetricSpace, mu: &ProbMeasure, r: f64, v: f64, b: &BFunction) -> Result<ClassReport> {
    let support = mu.support();
    let restricted = support.len() < space.len();
    let (space, mu) = if restricted {
        let sub = space.subspace(&support)?;
        let w: Vec<f64> = support.iter().map(|&i| mu.w(i)).collect();
        (sub, ProbMeasure::normalized(w)?)
    } else {
        (space.clone(), mu.clone())
    };
    let variance = self_variance(&space, &mu)?;
    let variance_ok = variance <= v * r * r;
    let mut failing = Vec::new();
    for (e, bv) in b.samples() {
        let br = mass_distribution_fn(&space, &mu, r, e)?;
        if br < bv {
            failing.push((e, br, bv));
        }
    }
    Ok(ClassReport {
        member: variance_ok && failing.is_empty(),
        variance,
        variance_ok,
        failing_samples: failing,
        restricted_to_support: restricted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn two_point() -> FiniteMetricSpace {
        FiniteMetricSpace::from_dist(array![[0.0, 1.0], [1.0, 0.0]]).unwrap()
    }

    #[test]
    fn two_point_values() {
        let s = two_point();
        let mu = ProbMeasure::uniform(2);
        assert_eq!(mass_distribution_fn(&s, &mu, 1.0, 0.5).unwrap(), 0.5);
        assert_eq!(mass_distribution_fn(&s, &mu, 1.0, 1.0).unwrap(), 1.0);
        // Step from ½ to 1 exactly where the ball reaches the other point.
        assert_eq!(mass_distribution_fn(&s, &mu, 1.0, 0.999).unwrap(), 0.5);
        assert_eq!(mass_distribution_fn(&s, &mu, 2.0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn single_point_is_one() {
        let s = FiniteMetricSpace::single_point();
        let mu = ProbMeasure::dirac(1, 0);
        for e in [0.01, 0.3, 1.0] {
            assert_eq!(mass_distribution_fn(&s, &mu, 1.0, e).unwrap(), 1.0);
        }
    }

    #[test]
    fn domain_errors() {
        let s = two_point();
        let mu = ProbMeasure::uniform(2);
        assert!(mass_distribution_fn(&s, &mu, 0.0, 0.5).is_err());
        assert!(mass_distribution_fn(&s, &mu, 1.0, 0.0).is_err());
        assert!(mass_distribution_fn(&s, &mu, 1.0, 1.5).is_err());
    }

    #[test]
    fn class_membership() {
        let s = two_point();
        let mu = ProbMeasure::uniform(2);
        let grid: Vec<f64> = (1..=20).map(|k| k as f64 / 20.0).collect();
        let b = BFunction::constant(0.25, &grid).unwrap();
        assert!(in_class_m(&s, &mu, 1.0, 1.0, &b).unwrap().member);
        let r = in_class_m(&s, &mu, 1.0, 0.4, &b).unwrap();
        assert!(!r.member && !r.variance_ok);
        let p = FiniteMetricSpace::single_point();
        assert!(in_class_m(&p, &ProbMeasure::dirac(1, 0), 1.0, 0.0, &BFunction::constant(1.0, &grid).unwrap())
            .unwrap()
            .member);
    }

    #[test]
    fn partial_support_is_restricted() {
        let s = FiniteMetricSpace::line(3, 1.0).unwrap();
        let mu = ProbMeasure::new(vec![0.5, 0.5, 0.0]).unwrap();
        let b = BFunction::constant(0.25, &[0.5, 1.0]).unwrap();
        let r = in_class_m(&s, &mu, 1.0, 1.0, &b).unwrap();
        assert!(r.restricted_to_support && r.member);
    }

    #[test]
    fn b_function_is_right_continuous() {
        let b = BFunction::new(vec![(0.5, 0.25), (0.25, 0.125)]).unwrap();
        assert_eq!(b.eval(0.1), None);
        assert_eq!(b.eval(0.25), Some(0.125));
        assert_eq!(b.eval(0.49), Some(0.125));
        assert_eq!(b.eval(0.5), Some(0.25));
        assert_eq!(b.eval(1.0), Some(0.25));
    }

    proptest! {
        #[test]
        fn monotone_in_eps(
            xs in prop::collection::vec(-2.0f64..2.0, 6),
            w in prop::collection::vec(0.01f64..1.0, 6),
        ) {
            let n = xs.len();
            let s = FiniteMetricSpace::from_dist(ndarray::Array2::from_shape_fn((n, n), |(i, j)| (xs[i] - xs[j]).abs())).unwrap();
            let mu = ProbMeasure::normalized(w).unwrap();
            let mut prev = 0.0;
            for k in 1..=50 {
                let b = mass_distribution_fn(&s, &mu, 1.0, k as f64 / 50.0).unwrap();
                prop_assert!(b >= prev);
                prop_assert!(b > 0.0 && b <= 1.0);
                prev = b;
            }
        }
    }
}
