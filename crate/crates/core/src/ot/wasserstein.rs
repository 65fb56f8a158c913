//! Exact Wasserstein distances with Kantorovich–Rubinstein certificates.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::lp::{LinearProgram, Relation};
use super::measure::{Coupling, ProbMeasure};
use super::space::FiniteMetricSpace;
use super::transport::{solve_transport, TransportPlan};
use crate::error::{Error, Result};

/// Relative primal-dual gap accepted for a W1 certificate.
pub const GAP_TOL: f64 = 1e-8;

/// A 1-Lipschitz potential `f` with `Σ f (μ1 − μ2)` close to the primal cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportCertificate {
    pub primal_value: f64,
    pub dual_potential: Vec<f64>,
    pub dual_value: f64,
    pub gap: f64,
}

impl TransportCertificate {
    /// Largest violation of `|f(i) − f(j)| ≤ d(i,j)`.
    pub fn lipschitz_excess(&self, space: &FiniteMetricSpace) -> f64 {
        let f = &self.dual_potential;
        let mut worst: f64 = 0.0;
        for i in 0..f.len() {
            for j in 0..f.len() {
                worst = worst.max((f[i] - f[j]).abs() - space.d(i, j));
            }
        }
        worst
    }

    pub fn gap_ok(&self) -> bool {
        self.gap.abs() <= GAP_TOL * self.primal_value.max(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct W1Result {
    pub value: f64,
    pub coupling: Coupling,
    pub certificate: TransportCertificate,
}

fn check_dims(space: &FiniteMetricSpace, mu1: &ProbMeasure, mu2: &ProbMeasure) -> Result<()> {
    if mu1.len() != space.len() || mu2.len() != space.len() {
        return Err(Error::Input(format!(
            "measures of length {} and {} on a space of {} points",
            mu1.len(),
            mu2.len(),
            space.len()
        )));
    }
    Ok(())
}

/// Arguments are solved in a canonical order so that the distance is
/// bit-for-bit symmetric.
fn swapped(mu1: &ProbMeasure, mu2: &ProbMeasure) -> bool {
    mu1.as_slice()
        .iter()
        .zip(mu2.as_slice())
        .find(|(a, b)| a != b)
        .is_some_and(|(a, b)| a > b)
}

/// Exact W1 distance, optimal coupling, and a dual certificate.
pub fn w1_distance(space: &FiniteMetricSpace, mu1: &ProbMeasure, mu2: &ProbMeasure) -> Result<W1Result> {
    check_dims(space, mu1, mu2)?;
    if swapped(mu1, mu2) {
        let r = w1_distance(space, mu2, mu1)?;
        let mut cert = r.certificate;
        cert.dual_potential.iter_mut().for_each(|f| *f = -*f);
        return Ok(W1Result { value: r.value, coupling: r.coupling.transpose(), certificate: cert });
    }
    let plan = solve_transport(space.dist(), mu1.as_slice(), mu2.as_slice())?;
    let certificate = certificate_from_plan(space, mu1, mu2, &plan);
    Ok(W1Result { value: plan.value, coupling: Coupling::new(plan.plan)?, certificate })
}

/// Value only; skips building the certificate.
pub fn w1_value(space: &FiniteMetricSpace, mu1: &ProbMeasure, mu2: &ProbMeasure) -> Result<f64> {
    check_dims(space, mu1, mu2)?;
    let (a, b) = if swapped(mu1, mu2) { (mu2, mu1) } else { (mu1, mu2) };
    Ok(solve_transport(space.dist(), a.as_slice(), b.as_slice())?.value)
}

/// Transport cost between weight vectors under an arbitrary rectangular cost.
pub fn transport_value(cost: &Array2<f64>, a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(solve_transport(cost, a, b)?.value)
}

fn certificate_from_plan(
    space: &FiniteMetricSpace,
    mu1: &ProbMeasure,
    mu2: &ProbMeasure,
    plan: &TransportPlan,
) -> TransportCertificate {
    let n = space.len();
    // c-transform of the column potentials: f(i) = min_j d(i,j) − v_j over the
    // columns carrying mass. A minimum of 1-Lipschitz functions is 1-Lipschitz.
    let cols = mu2.support();
    let f: Vec<f64> = (0..n)
        .map(|i| cols.iter().map(|&j| space.d(i, j) - plan.v[j]).fold(f64::INFINITY, f64::min))
        .collect();
    let dual_value: f64 = (0..n).map(|i| f[i] * (mu1.w(i) - mu2.w(i))).sum();
    TransportCertificate {
        primal_value: plan.value,
        gap: plan.value - dual_value,
        dual_potential: f,
        dual_value,
    }
}

/// `W_p` distance: `(min_q Σ d^p q)^{1/p}`.
pub fn wp_distance(space: &FiniteMetricSpace, mu1: &ProbMeasure, mu2: &ProbMeasure, p: f64) -> Result<f64> {
    check_dims(space, mu1, mu2)?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Input(format!("p = {p} must be a finite number ≥ 1")));
    }
    if p == 1.0 {
        return w1_value(space, mu1, mu2);
    }
    let cost = space.dist().mapv(|d| d.powf(p));
    let value = solve_transport(&cost, mu1.as_slice(), mu2.as_slice())?.value;
    Ok(value.max(0.0).powf(1.0 / p))
}

/// W1 through the general dense simplex; an independent oracle for tests.
pub fn w1_by_dense_lp(space: &FiniteMetricSpace, mu1: &ProbMeasure, mu2: &ProbMeasure) -> Result<f64> {
    check_dims(space, mu1, mu2)?;
    let n = space.len();
    let mut lp = LinearProgram::minimize(space.dist().iter().copied().collect());
    for i in 0..n {
        let terms: Vec<(usize, f64)> = (0..n).map(|j| (i * n + j, 1.0)).collect();
        lp.constrain_sparse(&terms, Relation::Eq, mu1.w(i));
    }
    for j in 0..n {
        let terms: Vec<(usize, f64)> = (0..n).map(|i| (i * n + j, 1.0)).collect();
        lp.constrain_sparse(&terms, Relation::Eq, mu2.w(j));
    }
    Ok(lp.solve()?.value)
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
    fn point_masses() {
        let s = two_point();
        let r = w1_distance(&s, &ProbMeasure::dirac(2, 0), &ProbMeasure::dirac(2, 1)).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.certificate.gap_ok());
    }

    #[test]
    fn excess_mass_crosses() {
        let s = two_point();
        let a = ProbMeasure::new(vec![0.7, 0.3]).unwrap();
        let b = ProbMeasure::new(vec![0.3, 0.7]).unwrap();
        let r = w1_distance(&s, &a, &b).unwrap();
        assert!((r.value - 0.4).abs() < 1e-15);
        let w2 = wp_distance(&s, &a, &b, 2.0).unwrap();
        assert!((w2 - 0.4f64.sqrt()).abs() < 1e-15);
        assert!((w2 - 0.63246).abs() < 1e-5);
    }

    #[test]
    fn identical_measures_give_diagonal() {
        let s = FiniteMetricSpace::line(4, 1.0).unwrap();
        let mu = ProbMeasure::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let r = w1_distance(&s, &mu, &mu).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.coupling.matrix(), Coupling::diagonal(&mu).matrix());
    }

    #[test]
    fn wp_rejects_small_p() {
        let s = two_point();
        let mu = ProbMeasure::uniform(2);
        assert!(wp_distance(&s, &mu, &mu, 0.5).is_err());
        assert!(w1_distance(&s, &ProbMeasure::uniform(3), &mu).is_err());
    }

    fn planar(coords: &[f64]) -> FiniteMetricSpace {
        let n = coords.len() / 2;
        FiniteMetricSpace::from_dist(Array2::from_shape_fn((n, n), |(i, j)| {
            (coords[2 * i] - coords[2 * j]).hypot(coords[2 * i + 1] - coords[2 * j + 1])
        }))
        .unwrap()
    }

    fn measure(raw: &[f64]) -> ProbMeasure {
        ProbMeasure::normalized(raw.to_vec()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_dense_lp_and_certifies(
            n in 2usize..=7,
            coords in prop::collection::vec(-3.0f64..3.0, 14),
            w1 in prop::collection::vec(0.0f64..1.0, 7),
            w2 in prop::collection::vec(0.0f64..1.0, 7),
        ) {
            prop_assume!(w1[..n].iter().sum::<f64>() > 0.1 && w2[..n].iter().sum::<f64>() > 0.1);
            let s = planar(&coords[..2 * n]);
            let (a, b) = (measure(&w1[..n]), measure(&w2[..n]));
            let r = w1_distance(&s, &a, &b).unwrap();
            let oracle = w1_by_dense_lp(&s, &a, &b).unwrap();
            prop_assert!((r.value - oracle).abs() <= 1e-10 * oracle.max(1.0));
            prop_assert!(r.certificate.gap_ok());
            prop_assert!(r.certificate.lipschitz_excess(&s) <= 1e-12);
            prop_assert!(r.coupling.marginal_error(&a, &b) <= 1e-12);
            let p1 = wp_distance(&s, &a, &b, 1.0).unwrap();
            prop_assert!((p1 - r.value).abs() <= 1e-10);
        }

        #[test]
        fn symmetric_and_triangle(
            coords in prop::collection::vec(-3.0f64..3.0, 12),
            w in prop::collection::vec(0.05f64..1.0, 18),
        ) {
            let s = planar(&coords);
            let (a, b, c) = (measure(&w[..6]), measure(&w[6..12]), measure(&w[12..]));
            let ab = w1_value(&s, &a, &b).unwrap();
            let ba = w1_value(&s, &b, &a).unwrap();
            let bc = w1_value(&s, &b, &c).unwrap();
            let ac = w1_value(&s, &a, &c).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= ab + bc + 1e-9);
        }
    }
}
