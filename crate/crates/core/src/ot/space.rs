//! Finite metric spaces stored as dense distance matrices.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for symmetry and zero-diagonal checks.
pub const AXIOM_TOL: f64 = 1e-12;

/// A finite set of labeled points with a distance matrix.
///
/// Construction only validates structure (square, finite, non-negative).
/// Metric axioms are checked separately by [`FiniteMetricSpace::check_metric_axioms`]
/// so that pseudometrics produced by gluing can be represented too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Array2<f64>,
}

/// A single failed metric axiom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricViolation {
    Asymmetric { i: usize, j: usize },
    NonzeroDiagonal { i: usize },
    /// Two distinct points at distance zero (allowed in pseudometric mode).
    Coincident { i: usize, j: usize },
    /// `d(i,k) > d(i,j) + d(j,k)`.
    Triangle { i: usize, j: usize, k: usize, excess: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub violations: Vec<MetricViolation>,
}

impl MetricReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn worst_triangle_excess(&self) -> f64 {
        self.violations
            .iter()
            .filter_map(|v| match v {
                MetricViolation::Triangle { excess, .. } => Some(*excess),
                _ => None,
            })
            .fold(0.0, f64::max)
    }
}

impl FiniteMetricSpace {
    pub fn new(labels: Vec<String>, dist: Array2<f64>) -> Result<Self> {
        let (r, c) = dist.dim();
        if r != c {
            return Err(Error::Structural(format!("distance matrix is {r}x{c}, not square")));
        }
        if labels.len() != r {
            return Err(Error::Structural(format!(
                "{} labels for {} points",
                labels.len(),
                r
            )));
        }
        if r == 0 {
            return Err(Error::Structural("empty space".into()));
        }
        for ((i, j), &v) in dist.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::Structural(format!("non-finite distance at ({i},{j})")));
            }
            if v < 0.0 {
                return Err(Error::Structural(format!("negative distance {v} at ({i},{j})")));
            }
        }
        Ok(Self { labels, dist })
    }

    /// Space with labels `"0"`, `"1"`, ...
    pub fn from_dist(dist: Array2<f64>) -> Result<Self> {
        let n = dist.nrows();
        Self::new((0..n).map(|i| i.to_string()).collect(), dist)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut dist = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Structural(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                dist[[i, j]] = v;
            }
        }
        Self::from_dist(dist)
    }

    pub fn single_point() -> Self {
        Self::from_dist(Array2::zeros((1, 1))).expect("valid")
    }

    /// Equally spaced points on a line.
    pub fn line(n: usize, spacing: f64) -> Result<Self> {
        let dist = Array2::from_shape_fn((n, n), |(i, j)| (i as f64 - j as f64).abs() * spacing);
        Self::from_dist(dist)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dist(&self) -> &Array2<f64> {
        &self.dist
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[[i, j]]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Same points, distances multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.labels.clone(), &self.dist * lambda)
    }

    /// Full metric check: symmetry, zero diagonal, positivity off the diagonal, triangle inequality.
    pub fn check_metric_axioms(&self) -> MetricReport {
        self.check_axioms(false)
    }

    /// Like [`Self::check_metric_axioms`] but distinct points may be at distance zero.
    pub fn check_pseudometric_axioms(&self) -> MetricReport {
        self.check_axioms(true)
    }

    fn check_axioms(&self, pseudo: bool) -> MetricReport {
        let n = self.len();
        let d = &self.dist;
        let mut violations = Vec::new();
        for i in 0..n {
            if d[[i, i]].abs() > AXIOM_TOL {
                violations.push(MetricViolation::NonzeroDiagonal { i });
            }
            for j in (i + 1)..n {
                if (d[[i, j]] - d[[j, i]]).abs() > AXIOM_TOL {
                    violations.push(MetricViolation::Asymmetric { i, j });
                }
                if !pseudo && (d[[i, j]] == 0.0 || d[[j, i]] == 0.0) {
                    violations.push(MetricViolation::Coincident { i, j });
                }
            }
        }
        // Rounding in derived distances (square roots, sums) can exceed an exact
        // triangle bound by a few ulps; allow a relative slack at that scale.
        for i in 0..n {
            for j in 0..n {
                let dij = d[[i, j]];
                for k in 0..n {
                    let rhs = dij + d[[j, k]];
                    let excess = d[[i, k]] - rhs;
                    if excess > AXIOM_TOL * rhs.max(1.0) {
                        violations.push(MetricViolation::Triangle { i, j, k, excess });
                    }
                }
            }
        }
        MetricReport { violations }
    }

    /// Indices of points in the closed ball `D(x, radius)`.
    pub fn closed_ball(&self, x: usize, radius: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&y| self.dist[[x, y]] <= radius)
    }

    /// Sub-space on the given indices, in the given order.
    pub fn subspace(&self, idx: &[usize]) -> Result<Self> {
        let labels = idx.iter().map(|&i| self.labels[i].clone()).collect();
        let dist = Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| self.dist[[idx[a], idx[b]]]);
        Self::new(labels, dist)
    }
}

/// Cartesian product with the Euclidean combination of factor distances.
///
/// The point `(i1, i2)` has index `i1 * s2.len() + i2`.
pub fn product_space(s1: &FiniteMetricSpace, s2: &FiniteMetricSpace) -> FiniteMetricSpace {
    let (n1, n2) = (s1.len(), s2.len());
    let n = n1 * n2;
    let mut labels = Vec::with_capacity(n);
    for a in s1.labels() {
        for b in s2.labels() {
            labels.push(format!("({a},{b})"));
        }
    }
    let dist = Array2::from_shape_fn((n, n), |(p, q)| {
        let (a1, a2) = (p / n2, p % n2);
        let (b1, b2) = (q / n2, q % n2);
        s1.d(a1, b1).hypot(s2.d(a2, b2))
    });
    FiniteMetricSpace::new(labels, dist).expect("product of valid spaces is structurally valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn two_point_space_is_valid() {
        let s = FiniteMetricSpace::from_dist(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(s.check_metric_axioms().is_valid());
    }

    #[test]
    fn asymmetric_entry_reported() {
        let s = FiniteMetricSpace::from_dist(array![[0.0, 1.0], [2.0, 0.0]]).unwrap();
        let r = s.check_metric_axioms();
        assert!(r.violations.contains(&MetricViolation::Asymmetric { i: 0, j: 1 }));
    }

    #[test]
    fn triangle_violation_reported() {
        let s = FiniteMetricSpace::from_dist(array![[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
            .unwrap();
        let r = s.check_metric_axioms();
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, MetricViolation::Triangle { i: 0, j: 1, k: 2, .. })));
    }

    #[test]
    fn structural_errors() {
        assert!(FiniteMetricSpace::from_dist(Array2::zeros((2, 3))).is_err());
        assert!(FiniteMetricSpace::from_dist(array![[0.0, -1.0], [-1.0, 0.0]]).is_err());
        assert!(FiniteMetricSpace::from_dist(array![[0.0, f64::NAN], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn pseudometric_allows_coincident_points() {
        let s = FiniteMetricSpace::from_dist(array![[0.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(!s.check_metric_axioms().is_valid());
        assert!(s.check_pseudometric_axioms().is_valid());
    }

    #[test]
    fn product_with_point_is_isometric_copy() {
        let s = FiniteMetricSpace::line(4, 0.5).unwrap();
        let p = product_space(&s, &FiniteMetricSpace::single_point());
        assert_eq!(p.dist(), s.dist());
    }

    #[test]
    fn product_pythagoras() {
        let a = FiniteMetricSpace::from_dist(array![[0.0, 3.0], [3.0, 0.0]]).unwrap();
        let b = FiniteMetricSpace::from_dist(array![[0.0, 4.0], [4.0, 0.0]]).unwrap();
        let p = product_space(&a, &b);
        assert_eq!(p.d(0, 3), 5.0);
        assert_eq!(p.d(1, 2), 5.0);
    }

    fn random_metric(n: usize, coords: &[f64]) -> FiniteMetricSpace {
        // Points in the plane with the Euclidean metric.
        let dist = Array2::from_shape_fn((n, n), |(i, j)| {
            (coords[2 * i] - coords[2 * j]).hypot(coords[2 * i + 1] - coords[2 * j + 1])
        });
        FiniteMetricSpace::from_dist(dist).unwrap()
    }

    proptest! {
        #[test]
        fn products_of_metrics_are_metrics(
            c1 in prop::collection::vec(-5.0f64..5.0, 8),
            c2 in prop::collection::vec(-5.0f64..5.0, 6),
        ) {
            let a = random_metric(4, &c1);
            let b = random_metric(3, &c2);
            let p = product_space(&a, &b);
            prop_assert!(p.check_pseudometric_axioms().is_valid());
        }
    }
}
