//! Probability measures and couplings on finite spaces.

use ndarray::{Array1, Array2, Array3, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass-sum tolerance for [`ProbMeasure`] and marginal tolerance for [`Coupling`].
pub const MASS_TOL: f64 = 1e-12;

/// Weight vector summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMeasure {
    weights: Array1<f64>,
}

impl ProbMeasure {
    pub fn new(weights: impl Into<Array1<f64>>) -> Result<Self> {
        let weights = weights.into();
        if weights.is_empty() {
            return Err(Error::Input("empty measure".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Input(format!("weight {w} at index {i} is not a nonnegative number")));
            }
        }
        let total = weights.sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Input(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(weights: impl Into<Array1<f64>>) -> Result<Self> {
        let w: Array1<f64> = weights.into();
        let total = w.sum();
        if !(total > 0.0) || w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::Input("cannot normalize weights".into()));
        }
        Self::new(w / total)
    }

    pub fn dirac(n: usize, i: usize) -> Self {
        let mut w = Array1::zeros(n);
        w[i] = 1.0;
        Self { weights: w }
    }

    pub fn uniform(n: usize) -> Self {
        Self { weights: Array1::from_elem(n, 1.0 / n as f64) }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.weights.as_slice().expect("contiguous")
    }

    #[inline]
    pub fn w(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// Convex combination `Σ a_i μ_i`.
    pub fn mixture(parts: &[(f64, &ProbMeasure)]) -> Result<Self> {
        let n = parts.first().ok_or_else(|| Error::Input("empty mixture".into()))?.1.len();
        let mut w = Array1::zeros(n);
        for (a, m) in parts {
            if m.len() != n {
                return Err(Error::Input("mixture of measures on different spaces".into()));
            }
            w.scaled_add(*a, &m.weights);
        }
        Self::new(w)
    }
}

/// Joint mass matrix; rows index the first space, columns the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    matrix: Array2<f64>,
}

impl Coupling {
    /// Accepts any nonnegative matrix with unit total mass; marginals are derived.
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        if matrix.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::Input("coupling has a negative or non-finite entry".into()));
        }
        let total = matrix.sum();
        if (total - 1.0).abs() > MASS_TOL * 10.0 {
            return Err(Error::Input(format!("coupling mass is {total}, not 1")));
        }
        Ok(Self { matrix })
    }

    /// Builds a coupling and checks it against prescribed marginals.
    pub fn with_marginals(matrix: Array2<f64>, mu1: &ProbMeasure, mu2: &ProbMeasure) -> Result<Self> {
        let q = Self::new(matrix)?;
        let err = q.marginal_error(mu1, mu2);
        if err > MASS_TOL {
            return Err(Error::Input(format!("coupling marginals off by {err:e}")));
        }
        Ok(q)
    }

    pub fn product(mu1: &ProbMeasure, mu2: &ProbMeasure) -> Self {
        let m = Array2::from_shape_fn((mu1.len(), mu2.len()), |(i, j)| mu1.w(i) * mu2.w(j));
        Self { matrix: m }
    }

    pub fn diagonal(mu: &ProbMeasure) -> Self {
        Self { matrix: Array2::from_diag(&mu.weights) }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn first_marginal(&self) -> Array1<f64> {
        self.matrix.sum_axis(Axis(1))
    }

    pub fn second_marginal(&self) -> Array1<f64> {
        self.matrix.sum_axis(Axis(0))
    }

    /// Largest absolute deviation of either marginal from the targets.
    pub fn marginal_error(&self, mu1: &ProbMeasure, mu2: &ProbMeasure) -> f64 {
        if self.matrix.dim() != (mu1.len(), mu2.len()) {
            return f64::INFINITY;
        }
        let a = (&self.first_marginal() - &mu1.weights).mapv(f64::abs);
        let b = (&self.second_marginal() - &mu2.weights).mapv(f64::abs);
        a.iter().chain(b.iter()).copied().fold(0.0, f64::max)
    }

    /// `Σ q_ij c_ij`.
    pub fn integrate(&self, cost: &Array2<f64>) -> f64 {
        (&self.matrix * cost).sum()
    }

    pub fn transpose(&self) -> Self {
        Self { matrix: self.matrix.t().to_owned() }
    }
}

/// Glues `q12` and `q23` along their shared middle marginal.
///
/// `q123[i][j][k] = q12[i][j] q23[j][k] / μ2[j]` where `μ2[j] > 0`, zero otherwise.
pub fn glue_couplings(q12: &Coupling, q23: &Coupling) -> Result<Array3<f64>> {
    let (n1, n2) = q12.matrix.dim();
    let (m2, n3) = q23.matrix.dim();
    if n2 != m2 {
        return Err(Error::Input(format!("middle spaces differ in size: {n2} vs {m2}")));
    }
    let mid_a = q12.second_marginal();
    let mid_b = q23.first_marginal();
    let mismatch = (&mid_a - &mid_b).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
    if mismatch > 1e-10 {
        return Err(Error::Input(format!("middle marginals differ by {mismatch:e}")));
    }
    let mut out = Array3::zeros((n1, n2, n3));
    for j in 0..n2 {
        let m = mid_a[j];
        if m <= 0.0 {
            continue;
        }
        for i in 0..n1 {
            let a = q12.matrix[[i, j]];
            if a == 0.0 {
                continue;
            }
            for k in 0..n3 {
                out[[i, j, k]] = a * q23.matrix[[j, k]] / m;
            }
        }
    }
    Ok(out)
}

/// The (1,3)-marginal of a glued tensor.
pub fn outer_marginal(q123: &Array3<f64>) -> Array2<f64> {
    q123.sum_axis(Axis(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        (a - b).mapv(f64::abs).fold(0.0, |x: f64, &y| x.max(y))
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(ProbMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(ProbMeasure::new(vec![1.5, -0.5]).is_err());
        assert!(ProbMeasure::new(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn diagonal_glue_is_diagonal_tensor() {
        let mu = ProbMeasure::new(vec![0.2, 0.3, 0.5]).unwrap();
        let q = Coupling::diagonal(&mu);
        let g = glue_couplings(&q, &q).unwrap();
        for ((i, j, k), &v) in g.indexed_iter() {
            let expect = if i == j && j == k { mu.w(i) } else { 0.0 };
            assert!((v - expect).abs() <= 1e-16);
        }
    }

    #[test]
    fn product_glue_is_triple_product() {
        let a = ProbMeasure::new(vec![0.25, 0.75]).unwrap();
        let b = ProbMeasure::new(vec![0.5, 0.25, 0.25]).unwrap();
        let c = ProbMeasure::new(vec![0.125, 0.875]).unwrap();
        let g = glue_couplings(&Coupling::product(&a, &b), &Coupling::product(&b, &c)).unwrap();
        for ((i, j, k), &v) in g.indexed_iter() {
            assert!((v - a.w(i) * b.w(j) * c.w(k)).abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_middle_rejected() {
        let a = ProbMeasure::uniform(2);
        let b = ProbMeasure::new(vec![0.9, 0.1]).unwrap();
        assert!(glue_couplings(&Coupling::product(&a, &a), &Coupling::product(&b, &a)).is_err());
    }

    fn coupling_from(raw: &[f64], n1: usize, n2: usize) -> Coupling {
        let total: f64 = raw.iter().sum();
        let m = Array2::from_shape_fn((n1, n2), |(i, j)| raw[i * n2 + j] / total);
        Coupling::new(m).unwrap()
    }

    proptest! {
        #[test]
        fn glued_marginals_match(
            n1 in 1usize..=5, n2 in 1usize..=5, n3 in 1usize..=5,
            raw1 in prop::collection::vec(0.01f64..1.0, 25),
            raw2 in prop::collection::vec(0.01f64..1.0, 25),
        ) {
            let q12 = coupling_from(&raw1[..n1 * n2], n1, n2);
            // Build q23 with first marginal equal to the second marginal of q12.
            let mid = q12.second_marginal();
            let mut m23 = Array2::from_shape_fn((n2, n3), |(j, k)| raw2[j * n3 + k]);
            for j in 0..n2 {
                let s: f64 = m23.row(j).sum();
                m23.row_mut(j).mapv_inplace(|x| x / s * mid[j]);
            }
            let q23 = Coupling::new(m23).unwrap();
            let g = glue_couplings(&q12, &q23).unwrap();
            prop_assert!(max_abs_diff(&g.sum_axis(Axis(2)), q12.matrix()) <= 1e-12);
            prop_assert!(max_abs_diff(&g.sum_axis(Axis(0)), q23.matrix()) <= 1e-12);
            let q13 = Coupling::new(outer_marginal(&g)).unwrap();
            let e1 = (&q13.first_marginal() - &q12.first_marginal()).mapv(f64::abs).sum();
            let e3 = (&q13.second_marginal() - &q23.second_marginal()).mapv(f64::abs).sum();
            prop_assert!(e1 <= 1e-12 && e3 <= 1e-12);
        }
    }
}
