//! Approximate-midpoint diagnostic for finite metric spaces.

use crate::error::{Error, Result};
use crate::ot::FiniteMetricSpace;

#[derive(Debug, Clone)]
pub struct IntrinsicReport {
    pub eps: f64,
    /// Pairs `(x1, x2)` without a point `z` with `max d(x_i, z) ≤ d(x1,x2)/2 + ε`.
    pub failing_pairs: Vec<(usize, usize)>,
    /// `max over pairs of min over z of (max_i d(x_i, z) − d(x1,x2)/2)`.
    pub worst_defect: f64,
}

impl IntrinsicReport {
    pub fn is_intrinsic(&self) -> bool {
        self.failing_pairs.is_empty()
    }
}

pub fn intrinsic_diagnostic(space: &FiniteMetricSpace, eps: f64) -> Result<IntrinsicReport> {
    if !(eps > 0.0) {
        return Err(Error::Input(format!("ε = {eps} must be positive")));
    }
    let n = space.len();
    let mut failing = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for a in 0..n {
        for b in (a + 1)..n {
            let half = 0.5 * space.d(a, b);
            let defect = (0..n)
                .map(|z| space.d(a, z).max(space.d(b, z)) - half)
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(defect);
            if defect > eps {
                failing.push((a, b));
            }
        }
    }
    Ok(IntrinsicReport { eps, failing_pairs: failing, worst_defect: worst.max(0.0) })
}
