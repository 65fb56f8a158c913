//! Discrete metric flows: a time grid, one metric space per time, and
//! conjugate heat kernels `ν_{x;s}` stored as row-stochastic matrices.
//!
//! The kernel for times `s < t` has shape `n_t × n_s`; row `x` is `ν_{x;s}`.
//! Flows built in Markov mode keep only adjacent-time kernels and compose
//! the rest, so the reproduction formula holds by construction.

use std::borrow::Cow;

use ndarray::Array2;

use super::grid::TimeGrid;
use crate::error::{Error, Result};
use crate::ot::{FiniteMetricSpace, ProbMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// Adjacent kernels only; others are products.
    Markov,
    /// Every pair `s < t` stored explicitly.
    Full,
}

#[derive(Debug, Clone)]
pub struct MetricFlow {
    grid: TimeGrid,
    slices: Vec<FiniteMetricSpace>,
    mode: KernelMode,
    /// Pair `(s, t)`, `s < t`, lives at `pair_index(s, t)`.
    kernels: Vec<Array2<f64>>,
    /// Set for flows that only approximate the axioms (sampled kernels).
    pub approximate: bool,
    /// Free-form provenance tags.
    pub tags: Vec<(String, String)>,
}

fn pair_index(n: usize, s: usize, t: usize) -> usize {
    debug_assert!(s < t && t < n);
    // Row-major upper triangle without diagonal.
    s * n - s * (s + 1) / 2 + (t - s - 1)
}

fn check_kernel_shape(k: &Array2<f64>, rows: usize, cols: usize, s: usize, t: usize) -> Result<()> {
    if k.dim() != (rows, cols) {
        return Err(Error::Structural(format!(
            "kernel ({s},{t}) has shape {:?}, expected ({rows}, {cols})",
            k.dim()
        )));
    }
    if k.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Structural(format!("kernel ({s},{t}) has negative or non-finite entries")));
    }
    Ok(())
}

impl MetricFlow {
    /// `adjacent[k]` is the kernel from time `k+1` back to time `k`.
    pub fn markov(grid: TimeGrid, slices: Vec<FiniteMetricSpace>, adjacent: Vec<Array2<f64>>) -> Result<Self> {
        let n = grid.len();
        if slices.len() != n {
            return Err(Error::Structural(format!("{} slices for {} times", slices.len(), n)));
        }
        if adjacent.len() + 1 != n {
            return Err(Error::Structural(format!("{} adjacent kernels for {} times", adjacent.len(), n)));
        }
        for (k, m) in adjacent.iter().enumerate() {
            check_kernel_shape(m, slices[k + 1].len(), slices[k].len(), k, k + 1)?;
        }
        let mut kernels = vec![Array2::zeros((0, 0)); n * n.saturating_sub(1) / 2];
        for s in 0..n {
            for t in (s + 1)..n {
                let k = if t == s + 1 {
                    adjacent[s].clone()
                } else {
                    adjacent[t - 1].dot(&kernels[pair_index(n, s, t - 1)])
                };
                kernels[pair_index(n, s, t)] = k;
            }
        }
        Ok(Self { grid, slices, mode: KernelMode::Markov, kernels, approximate: false, tags: Vec::new() })
    }

    /// `kernel(s, t)` supplies the `n_t × n_s` matrix for every `s < t`.
    pub fn full(
        grid: TimeGrid,
        slices: Vec<FiniteMetricSpace>,
        mut kernel: impl FnMut(usize, usize) -> Result<Array2<f64>>,
    ) -> Result<Self> {
        let n = grid.len();
        if slices.len() != n {
            return Err(Error::Structural(format!("{} slices for {} times", slices.len(), n)));
        }
        let mut kernels = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for s in 0..n {
            for t in (s + 1)..n {
                let k = kernel(s, t)?;
                check_kernel_shape(&k, slices[t].len(), slices[s].len(), s, t)?;
                kernels.push(k);
            }
        }
        Ok(Self { grid, slices, mode: KernelMode::Full, kernels, approximate: false, tags: Vec::new() })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_times(&self) -> usize {
        self.grid.len()
    }

    pub fn slice(&self, t: usize) -> &FiniteMetricSpace {
        &self.slices[t]
    }

    pub fn slices(&self) -> &[FiniteMetricSpace] {
        &self.slices
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn time(&self, t: usize) -> f64 {
        self.grid.t(t)
    }

    pub fn with_tag(mut self, key: &str, value: impl ToString) -> Self {
        self.tags.push((key.to_string(), value.to_string()));
        self
    }

    /// Kernel matrix for `s ≤ t`; the identity when `s == t`.
    pub fn kernel(&self, s: usize, t: usize) -> Cow<'_, Array2<f64>> {
        assert!(s <= t && t < self.n_times(), "kernel({s},{t}) out of range");
        if s == t {
            Cow::Owned(Array2::eye(self.slices[t].len()))
        } else {
            Cow::Borrowed(&self.kernels[pair_index(self.n_times(), s, t)])
        }
    }

    /// Adjacent kernel `(k, k+1)`.
    pub fn adjacent_kernel(&self, k: usize) -> &Array2<f64> {
        &self.kernels[pair_index(self.n_times(), k, k + 1)]
    }

    /// `ν_{x;s}` for `x ∈ X_t`, as a raw weight row.
    pub fn nu_row(&self, t: usize, x: usize, s: usize) -> Vec<f64> {
        if s == t {
            let mut w = vec![0.0; self.slices[t].len()];
            w[x] = 1.0;
            w
        } else {
            self.kernels[pair_index(self.n_times(), s, t)].row(x).to_vec()
        }
    }

    /// `ν_{x;s}` as a validated probability measure.
    pub fn nu(&self, t: usize, x: usize, s: usize) -> Result<ProbMeasure> {
        ProbMeasure::new(self.nu_row(t, x, s))
    }

    /// Replaces one stored kernel row; used to build corrupted fixtures.
    /// For Markov flows only adjacent kernels may be edited and later products
    /// are recomputed.
    pub fn set_kernel_row(&mut self, s: usize, t: usize, x: usize, row: &[f64]) -> Result<()> {
        if s >= t || t >= self.n_times() {
            return Err(Error::Input(format!("no kernel for ({s},{t})")));
        }
        let n = self.n_times();
        if self.mode == KernelMode::Markov && t != s + 1 {
            return Err(Error::Input("Markov flows store adjacent kernels only".into()));
        }
        let k = &mut self.kernels[pair_index(n, s, t)];
        if row.len() != k.ncols() {
            return Err(Error::Structural("row length mismatch".into()));
        }
        k.row_mut(x).iter_mut().zip(row).for_each(|(a, b)| *a = *b);
        if self.mode == KernelMode::Markov {
            for s2 in 0..n {
                for t2 in (s2 + 2)..n {
                    if s2 <= s && t2 >= t {
                        let prod = self.kernels[pair_index(n, t2 - 1, t2)].dot(&self.kernels[pair_index(n, s2, t2 - 1)]);
                        self.kernels[pair_index(n, s2, t2)] = prod;
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest entrywise residual of `K(t1,t3) = K(t2,t3) K(t1,t2)` over all triples.
    pub fn reproduction_residual(&self) -> (f64, Option<(usize, usize, usize)>) {
        let n = self.n_times();
        let mut worst = 0.0;
        let mut at = None;
        for t1 in 0..n {
            for t2 in (t1 + 1)..n {
                for t3 in (t2 + 1)..n {
                    let composed = self.kernel(t2, t3).dot(&*self.kernel(t1, t2));
                    let direct = self.kernel(t1, t3);
                    let r = (&composed - &*direct).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
                    if r > worst {
                        worst = r;
                        at = Some((t1, t2, t3));
                    }
                }
            }
        }
        (worst, at)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_slices(n: usize) -> Vec<FiniteMetricSpace> {
        (0..n).map(|_| FiniteMetricSpace::line(2, 1.0).unwrap()).collect()
    }

    #[test]
    fn pair_indexing_is_dense() {
        let n = 6;
        let mut seen = vec![false; n * (n - 1) / 2];
        for s in 0..n {
            for t in (s + 1)..n {
                let k = pair_index(n, s, t);
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn markov_composition_is_reproductive() {
        let g = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let p = array![[0.9, 0.1], [0.2, 0.8]];
        let f = MetricFlow::markov(g, two_slices(5), vec![p.clone(); 4]).unwrap();
        assert!(f.reproduction_residual().0 <= 1e-15);
        assert_eq!(*f.kernel(0, 2), p.dot(&p));
        assert_eq!(*f.kernel(3, 3), Array2::eye(2));
    }

    #[test]
    fn corrupting_an_adjacent_row_propagates() {
        let g = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        let p = array![[0.9, 0.1], [0.2, 0.8]];
        let mut f = MetricFlow::markov(g, two_slices(3), vec![p.clone(); 2]).unwrap();
        f.set_kernel_row(0, 1, 0, &[0.5, 0.4]).unwrap();
        assert!((f.kernel(0, 2)[[0, 0]] - (0.9 * 0.5 + 0.1 * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let g = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        assert!(MetricFlow::markov(g.clone(), two_slices(2), vec![Array2::zeros((3, 2))]).is_err());
        assert!(MetricFlow::markov(g, two_slices(2), vec![array![[1.0, -0.1], [0.0, 1.0]]]).is_err());
    }
}
