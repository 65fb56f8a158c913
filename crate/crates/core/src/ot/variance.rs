//! Variance between probability measures: `Var(μ1, μ2) = Σ d(i,j)² μ1(i) μ2(j)`.

use ndarray::Array2;

use super::measure::ProbMeasure;
use super::space::FiniteMetricSpace;
use crate::error::{Error, Result};

pub fn variance(space: &FiniteMetricSpace, mu1: &ProbMeasure, mu2: &ProbMeasure) -> Result<f64> {
    let n = space.len();
    if mu1.len() != n || mu2.len() != n {
        return Err(Error::Input("measure length does not match the space".into()));
    }
    Ok(variance_weights(space.dist(), mu1.as_slice(), mu2.as_slice()))
}

/// `Var(μ) = Var(μ, μ)`.
pub fn self_variance(space: &FiniteMetricSpace, mu: &ProbMeasure) -> Result<f64> {
    variance(space, mu, mu)
}

/// `Var(δ_x, μ)`.
pub fn point_variance(space: &FiniteMetricSpace, x: usize, mu: &ProbMeasure) -> f64 {
    (0..space.len()).map(|y| space.d(x, y).powi(2) * mu.w(y)).sum()
}

/// Double sum on raw weight vectors (no validation).
pub fn variance_weights(dist: &Array2<f64>, a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let row: f64 = b.iter().enumerate().map(|(j, &bj)| dist[[i, j]] * dist[[i, j]] * bj).sum();
        total += ai * row;
    }
    total
}

/// All pairwise variances between the rows of two row-stochastic matrices:
/// `(K1 D² K2ᵀ)[x, y] = Var(K1[x,·], K2[y,·])`.
pub fn variance_matrix(dist: &Array2<f64>, k1: &Array2<f64>, k2: &Array2<f64>) -> Array2<f64> {
    let d2 = dist.mapv(|d| d * d);
    k1.dot(&d2).dot(&k2.t())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::wasserstein::w1_value;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn dirac_pair_gives_squared_distance() {
        let s = FiniteMetricSpace::line(3, 1.5).unwrap();
        let v = variance(&s, &ProbMeasure::dirac(3, 0), &ProbMeasure::dirac(3, 2)).unwrap();
        assert_eq!(v, 9.0);
    }

    #[test]
    fn uniform_two_point_self_variance() {
        let s = FiniteMetricSpace::from_dist(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(self_variance(&s, &ProbMeasure::uniform(2)).unwrap(), 0.5);
    }

    #[test]
    fn dirac_against_measure() {
        let s = FiniteMetricSpace::line(4, 1.0).unwrap();
        let mu = ProbMeasure::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let direct = 0.1 * 0.0 + 0.2 * 1.0 + 0.3 * 4.0 + 0.4 * 9.0;
        assert!((variance(&s, &ProbMeasure::dirac(4, 0), &mu).unwrap() - direct).abs() < 1e-15);
        assert!((point_variance(&s, 0, &mu) - direct).abs() < 1e-15);
    }

    fn planar(coords: &[f64]) -> FiniteMetricSpace {
        let n = coords.len() / 2;
        FiniteMetricSpace::from_dist(Array2::from_shape_fn((n, n), |(i, j)| {
            (coords[2 * i] - coords[2 * j]).hypot(coords[2 * i + 1] - coords[2 * j + 1])
        }))
        .unwrap()
    }

    proptest! {
        #[test]
        fn sandwich_triangle_and_bilinearity(
            coords in prop::collection::vec(-3.0f64..3.0, 10),
            w in prop::collection::vec(0.01f64..1.0, 20),
            a in 0.0f64..1.0,
        ) {
            let s = planar(&coords);
            let m: Vec<ProbMeasure> = w.chunks(5).map(|c| ProbMeasure::normalized(c.to_vec()).unwrap()).collect();
            let (m1, m2, m3, m4) = (&m[0], &m[1], &m[2], &m[3]);
            let w12 = w1_value(&s, m1, m2).unwrap();
            let v12 = variance(&s, m1, m2).unwrap();
            prop_assert!(w12 <= v12.sqrt() + 1e-9);
            let upper = w12 + self_variance(&s, m1).unwrap().sqrt() + self_variance(&s, m2).unwrap().sqrt();
            prop_assert!(v12.sqrt() <= upper + 1e-9);

            let v13 = variance(&s, m1, m3).unwrap();
            let v23 = variance(&s, m2, m3).unwrap();
            prop_assert!(v13.sqrt() <= v12.sqrt() + v23.sqrt() + 1e-12);

            let mix = ProbMeasure::mixture(&[(a, m1), (1.0 - a, m2)]).unwrap();
            let lhs = variance(&s, &mix, m4).unwrap();
            let rhs = a * variance(&s, m1, m4).unwrap() + (1.0 - a) * variance(&s, m2, m4).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);

            let k1 = Array2::from_shape_fn((2, 5), |(r, c)| [m1, m2][r].w(c));
            let k2 = Array2::from_shape_fn((2, 5), |(r, c)| [m3, m4][r].w(c));
            let vm = variance_matrix(s.dist(), &k1, &k2);
            prop_assert!((vm[[0, 0]] - v13).abs() <= 1e-12);
        }
    }
}
