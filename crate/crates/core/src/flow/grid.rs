//! Finite time grids and the half-gap measure of index sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing finite list of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Input("time grid is empty".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Input("time grid has non-finite entries".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Input(format!("times not strictly increasing: {} then {}", w[0], w[1])));
        }
        Ok(Self { times })
    }

    /// `steps + 1` equally spaced times from `t0` to `t1`.
    pub fn uniform(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Self::new(vec![t0]);
        }
        let h = (t1 - t0) / steps as f64;
        Self::new((0..=steps).map(|k| if k == steps { t1 } else { t0 + k as f64 * h }).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn first(&self) -> f64 {
        self.times[0]
    }

    pub fn last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    fn tol(&self) -> f64 {
        1e-12 * self.times.iter().fold(1.0f64, |m, t| m.max(t.abs()))
    }

    /// Index of a grid time equal to `t` up to rounding.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = self.tol();
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Largest index whose time is `≤ t` (up to rounding).
    pub fn snap_down(&self, t: f64) -> Result<usize> {
        let tol = self.tol();
        let k = self.times.partition_point(|&s| s <= t + tol);
        if k == 0 {
            return Err(Error::TimeOutOfRange(t));
        }
        Ok(k - 1)
    }

    pub fn min_gap(&self) -> Option<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
    }

    /// Local spacing of index `i`: half of each adjacent gap.
    pub fn local_weight(&self, i: usize) -> f64 {
        let left = if i > 0 { self.times[i] - self.times[i - 1] } else { 0.0 };
        let right = if i + 1 < self.len() { self.times[i + 1] - self.times[i] } else { 0.0 };
        0.5 * (left + right)
    }

    /// `|E|` for a set of grid indices.
    pub fn weight(&self, e: &[usize]) -> f64 {
        e.iter().fold(0.0, |acc, &i| acc + self.local_weight(i))
    }

    /// Grid restricted to a sorted index subset.
    pub fn subgrid(&self, idx: &[usize]) -> Result<Self> {
        Self::new(idx.iter().map(|&i| self.times[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_increasing() {
        assert!(TimeGrid::new(vec![0.0, 0.0]).is_err());
        assert!(TimeGrid::new(vec![1.0, 0.5]).is_err());
        assert!(TimeGrid::new(vec![]).is_err());
    }

    #[test]
    fn weights_sum_to_length() {
        let g = TimeGrid::new(vec![0.0, 0.1, 0.4, 1.0]).unwrap();
        let all: Vec<usize> = (0..4).collect();
        assert!((g.weight(&all) - 1.0).abs() < 1e-15);
        assert!((g.local_weight(1) - 0.2).abs() < 1e-15);
        assert!((g.local_weight(0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn snapping() {
        let g = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        assert_eq!(g.snap_down(0.35).unwrap(), 3);
        assert_eq!(g.snap_down(0.3).unwrap(), 3);
        assert_eq!(g.snap_down(1.0).unwrap(), 10);
        assert!(g.snap_down(-0.1).is_err());
        assert_eq!(g.index_of(0.7), Some(7));
    }
}
