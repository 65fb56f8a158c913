//! Finite approximation of a metric measure space by a dyadic measure on few points.
//!
//! Construction, all distances measured in units of `r`:
//! 1. largest `ε ∈ (0, 1]` with `√ε √V + 3ε ≤ α/2` (bisection);
//! 2. greedy maximal family of disjoint closed `ε`-balls whose mass is at least `b(ε)`,
//!    visited in descending ball mass, ties by index;
//! 3. anchor `x₀` minimizing `Var(δ_{x₀}, μ)`;
//! 4. every point within `2ε` of a chosen center goes to the nearest one, the rest to `x₀`;
//! 5. masses rounded down to multiples of `1/N`, remainder to the anchor, with `N` the
//!    smallest power of two satisfying `(b(ε)⁻² V + 2ε)/N ≤ α/2` and `N > m`;
//! 6. the result is certified by an exact W1 solve.

use super::mass_distribution::{in_class_m, mass_distribution_fn, BFunction};
use super::measure::ProbMeasure;
use super::space::FiniteMetricSpace;
use super::variance::point_variance;
use super::wasserstein::w1_value;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Approximation {
    /// Indices of `X′`, sorted.
    pub support: Vec<usize>,
    /// `μ′` as a measure on the full space.
    pub measure: ProbMeasure,
    /// Denominator: every weight of `μ′` is a multiple of `1/n_denominator`.
    pub n_denominator: u64,
    pub eps: f64,
    /// Ball-mass threshold `b(ε)` used for center selection.
    pub threshold: f64,
    pub centers: Vec<usize>,
    pub anchor: usize,
    /// Exact `d_W1(μ, μ′)`.
    pub bound: f64,
}

fn choose_eps(alpha: f64, v: f64) -> f64 {
    let g = |e: f64| e.sqrt() * v.sqrt() + 3.0 * e;
    if g(1.0) <= alpha / 2.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= alpha / 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn finite_approximation(
    space: &FiniteMetricSpace,
    mu: &ProbMeasure,
    r: f64,
    alpha: f64,
    v: f64,
    b: &BFunction,
) -> Result<Approximation> {
    if !(r > 0.0) || !(alpha > 0.0) {
        return Err(Error::Input("r and α must be positive".into()));
    }
    let class = in_class_m(space, mu, r, v, b)?;
    if !class.member {
        return Err(Error::Input(format!(
            "space is not in M_r(V, b): variance {} vs bound {}, {} failing b samples",
            class.variance,
            v * r * r,
            class.failing_samples.len()
        )));
    }
    let n = space.len();
    let eps = choose_eps(alpha, v);
    let radius = eps * r;
    let exact_b = mass_distribution_fn(space, mu, r, eps)?;
    // Below the first sample of b the exact value b_r(ε) is itself a valid threshold.
    let threshold = b.eval(eps).unwrap_or(exact_b);

    let ball_mass: Vec<f64> = (0..n).map(|x| space.closed_ball(x, radius).map(|y| mu.w(y)).sum()).collect();
    let mut candidates: Vec<usize> = (0..n).filter(|&x| mu.w(x) > 0.0 && ball_mass[x] >= threshold).collect();
    candidates.sort_by(|&a, &b| ball_mass[b].total_cmp(&ball_mass[a]).then(a.cmp(&b)));
    let mut centers: Vec<usize> = Vec::new();
    for x in candidates {
        let disjoint = centers
            .iter()
            .all(|&c| !(0..n).any(|z| space.d(x, z) <= radius && space.d(c, z) <= radius));
        if disjoint {
            centers.push(x);
        }
    }

    let anchor = (0..n)
        .min_by(|&a, &b| point_variance(space, a, mu).total_cmp(&point_variance(space, b, mu)).then(a.cmp(&b)))
        .expect("nonempty space");

    let mut cell_mass = vec![0.0; centers.len()];
    for y in 0..n {
        let w = mu.w(y);
        if w == 0.0 {
            continue;
        }
        let nearest = centers
            .iter()
            .enumerate()
            .filter(|(_, &c)| space.d(c, y) <= 2.0 * radius)
            .min_by(|a, b| space.d(*a.1, y).total_cmp(&space.d(*b.1, y)).then(a.0.cmp(&b.0)));
        // Unassigned mass ends up on the anchor through the rounding remainder.
        if let Some((k, _)) = nearest {
            cell_mass[k] += w;
        }
    }

    let m = centers.len();
    let rounding_term = v / (threshold * threshold) + 2.0 * eps;
    let mut n_den: u64 = 1;
    while (rounding_term / n_den as f64 > alpha / 2.0 || n_den <= m as u64) && n_den < (1u64 << 52) {
        n_den *= 2;
    }
    let nf = n_den as f64;
    let mut weights = vec![0.0; n];
    let mut assigned = 0u64;
    for (k, &c) in centers.iter().enumerate() {
        let units = (cell_mass[k] * nf).floor() as u64;
        weights[c] += units as f64 / nf;
        assigned += units;
    }
    weights[anchor] += (n_den - assigned.min(n_den)) as f64 / nf;
    let measure = ProbMeasure::new(weights)?;
    let support = measure.support();
    let bound = w1_value(space, mu, &measure)?;
    if bound > alpha * r * (1.0 + 1e-12) {
        return Err(Error::Internal(format!("approximation bound {bound} exceeds α r = {}", alpha * r)));
    }
    Ok(Approximation { support, measure, n_denominator: n_den, eps, threshold, centers, anchor, bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b_grid(value: f64) -> BFunction {
        BFunction::constant(value, &(1..=100).map(|k| k as f64 / 100.0).collect::<Vec<_>>()).unwrap()
    }

    fn is_dyadic_multiple(w: f64, n: u64) -> bool {
        let x = w * n as f64;
        (x - x.round()).abs() < 1e-9
    }

    #[test]
    fn line_fixture_meets_tolerance() {
        let s = FiniteMetricSpace::line(10, 0.1).unwrap();
        let mu = ProbMeasure::uniform(10);
        for alpha in [0.5, 0.25] {
            let a = finite_approximation(&s, &mu, 1.0, alpha, 1.0, &b_grid(0.1)).unwrap();
            assert!(a.bound <= alpha);
            assert!(a.support.len() as u64 <= a.n_denominator);
            assert!(a.measure.as_slice().iter().all(|&w| is_dyadic_multiple(w, a.n_denominator)));
        }
    }

    #[test]
    fn dyadic_three_point_measure_is_reproduced() {
        let s = FiniteMetricSpace::line(3, 1.0).unwrap();
        let mu = ProbMeasure::new(vec![0.25, 0.25, 0.5]).unwrap();
        let a = finite_approximation(&s, &mu, 1.0, 0.5, 2.0, &b_grid(0.25)).unwrap();
        assert_eq!(a.support, vec![0, 1, 2]);
        assert!(a.bound < 1e-12);
    }

    #[test]
    fn huge_alpha_accepts_single_point() {
        let s = FiniteMetricSpace::line(5, 0.2).unwrap();
        let mu = ProbMeasure::uniform(5);
        let a = finite_approximation(&s, &mu, 1.0, 1e6, 1.0, &b_grid(0.2)).unwrap();
        assert!(a.bound <= 1e6);
        assert_eq!(a.support.len(), 1);
    }

    #[test]
    fn non_member_rejected() {
        let s = FiniteMetricSpace::line(2, 1.0).unwrap();
        let mu = ProbMeasure::uniform(2);
        assert!(matches!(
            finite_approximation(&s, &mu, 1.0, 0.5, 0.4, &b_grid(0.25)),
            Err(Error::Input(_))
        ));
    }
}
