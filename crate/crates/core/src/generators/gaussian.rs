//! Sampled heat kernels on a cubical grid in `ℝⁿ`.
//!
//! The grid `[−L, L]ⁿ` with spacing `h` carries the Euclidean metric and the
//! kernels are row-normalized samples of `exp(−|x − y|²/(4τ))`. The result
//! only approximates the flow axioms (truncation and sampling), so it is
//! marked approximate and paired with the continuous closed forms.

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{MetricFlow, TimeGrid};
use crate::ot::{w1_value, FiniteMetricSpace, ProbMeasure};

/// Continuous reference values for the sampled Gaussian flow.
#[derive(Debug, Clone)]
pub struct GaussianSidecar {
    pub dim: usize,
    pub half_width: f64,
    pub spacing: f64,
    /// Coordinates of every grid point, row-major over dimensions.
    pub points: Vec<Vec<f64>>,
    /// `L < 5√(max time gap)`: kernels lose visible mass to truncation.
    pub truncation_warning: bool,
    pub reproduction_residual: f64,
}

impl GaussianSidecar {
    /// `Var(ν_{x;s}, ν_{x′;s}) = |x − x′|² + 4n(t − s)`.
    pub fn exact_variance(&self, x: usize, xp: usize, lag: f64) -> f64 {
        self.sq_dist(x, xp) + 4.0 * self.dim as f64 * lag
    }

    /// `d_W1(ν_{x;s}, ν_{x′;s}) = |x − x′|` (translates of one Gaussian).
    pub fn exact_w1(&self, x: usize, xp: usize) -> f64 {
        self.sq_dist(x, xp).sqrt()
    }

    pub fn sq_dist(&self, x: usize, xp: usize) -> f64 {
        self.points[x].iter().zip(&self.points[xp]).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Indices of points with every coordinate in `[−r, r]`.
    pub fn within(&self, r: f64) -> Vec<usize> {
        let tol = 1e-9 * self.spacing;
        (0..self.points.len()).filter(|&i| self.points[i].iter().all(|c| c.abs() <= r + tol)).collect()
    }

    /// Index of the point closest to `coords`.
    pub fn nearest(&self, coords: &[f64]) -> usize {
        (0..self.points.len())
            .min_by(|&a, &b| {
                let da: f64 = self.points[a].iter().zip(coords).map(|(p, c)| (p - c) * (p - c)).sum();
                let db: f64 = self.points[b].iter().zip(coords).map(|(p, c)| (p - c) * (p - c)).sum();
                da.total_cmp(&db)
            })
            .expect("non-empty grid")
    }
}

fn lattice(dim: usize, half_width: f64, spacing: f64) -> Result<Vec<Vec<f64>>> {
    let per_axis = (2.0 * half_width / spacing + 1e-9).floor() as usize + 1;
    let total = per_axis.checked_pow(dim as u32).filter(|&t| t <= 20_000);
    let Some(total) = total else {
        return Err(Error::Input(format!("{per_axis}^{dim} grid points exceed the supported size")));
    };
    Ok((0..total)
        .map(|mut k| {
            let mut c = vec![0.0; dim];
            for slot in c.iter_mut().rev() {
                *slot = -half_width + (k % per_axis) as f64 * spacing;
                k /= per_axis;
            }
            c
        })
        .collect())
}

fn sampled_kernel(points: &[Vec<f64>], tau: f64) -> Array2<f64> {
    let m = points.len();
    let mut k = Array2::zeros((m, m));
    k.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(x, mut row)| {
        for (y, v) in row.iter_mut().enumerate() {
            let d2: f64 = points[x].iter().zip(&points[y]).map(|(a, b)| (a - b) * (a - b)).sum();
            *v = (-d2 / (4.0 * tau)).exp();
        }
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    });
    k
}

/// Sampled Gaussian flow on `[−L, L]ⁿ` with spacing `h`, all pairs stored.
pub fn gaussian_flow_discrete(dim: usize, half_width: f64, spacing: f64, grid: TimeGrid) -> Result<(MetricFlow, GaussianSidecar)> {
    if dim == 0 || !(half_width > 0.0) || !(spacing > 0.0) {
        return Err(Error::Input("dimension, half-width and spacing must be positive".into()));
    }
    let tau_min = grid.min_gap().ok_or_else(|| Error::Input("the Gaussian flow needs at least two times".into()))?;
    if spacing * spacing > tau_min {
        return Err(Error::Input(format!(
            "grid too coarse: h² = {} exceeds the smallest lag {tau_min}",
            spacing * spacing
        )));
    }
    let max_gap = grid.last() - grid.first();
    let points = lattice(dim, half_width, spacing)?;
    let m = points.len();
    let dist = Array2::from_shape_fn((m, m), |(a, b)| {
        points[a].iter().zip(&points[b]).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
    });
    let labels = points
        .iter()
        .map(|c| {
            let parts: Vec<String> = c.iter().map(|v| format!("{v:.6}")).collect();
            if dim == 1 {
                parts[0].clone()
            } else {
                format!("({})", parts.join(","))
            }
        })
        .collect();
    let space = FiniteMetricSpace::new(labels, dist)?;
    let times = grid.times().to_vec();
    let n = times.len();
    let mut flow = MetricFlow::full(grid, vec![space; n], |s, t| Ok(sampled_kernel(&points, times[t] - times[s])))?
        .with_tag("generator", "gaussian")
        .with_tag("dim", dim)
        .with_tag("L", half_width)
        .with_tag("h", spacing);
    flow.approximate = true;
    let sidecar = GaussianSidecar {
        dim,
        half_width,
        spacing,
        points,
        truncation_warning: half_width < 5.0 * max_gap.sqrt(),
        reproduction_residual: flow.reproduction_residual().0,
    };
    Ok((flow, sidecar))
}

/// Errors of one sampled flow against the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianErrors {
    pub spacing: f64,
    /// Largest `|Var − (|x−x′|² + 4nτ)| / (|x−x′|² + 4nτ)`.
    pub max_rel_variance_error: f64,
    /// Largest `|d_W1 − |x−x′||` over the W1 probe pairs.
    pub max_w1_error: f64,
}

/// Compares kernels from time index 0 against the closed forms: variances for all
/// pairs with coordinates in `[−window, window]`, W1 for pairs `(0, w)` with
/// `w ∈ w1_offsets` (one dimension only).
pub fn gaussian_errors(flow: &MetricFlow, side: &GaussianSidecar, window: f64, w1_offsets: &[f64]) -> Result<GaussianErrors> {
    let inner = side.within(window);
    let dist = flow.slice(0).dist();
    let d2 = dist.mapv(|v| v * v);
    let mut max_rel = 0.0f64;
    let mut max_w1 = 0.0f64;
    for t in 1..flow.n_times() {
        let lag = flow.time(t) - flow.time(0);
        let k = flow.kernel(0, t);
        let rows = k.select(Axis(0), &inner);
        // (D² Kᵀ) restricted to the inner columns, then Var = K D² Kᵀ.
        let right = d2.dot(&rows.t());
        let vm = rows.dot(&right);
        for (a, &x) in inner.iter().enumerate() {
            for (b, &xp) in inner.iter().enumerate() {
                let exact = side.exact_variance(x, xp, lag);
                max_rel = max_rel.max((vm[[a, b]] - exact).abs() / exact);
            }
        }
        if side.dim == 1 {
            let origin = side.nearest(&[0.0]);
            for &w in w1_offsets {
                let other = side.nearest(&[w]);
                let mu1 = ProbMeasure::new(k.row(origin).to_owned())?;
                let mu2 = ProbMeasure::new(k.row(other).to_owned())?;
                let w1 = w1_value(flow.slice(0), &mu1, &mu2)?;
                max_w1 = max_w1.max((w1 - side.exact_w1(origin, other)).abs());
            }
        }
    }
    Ok(GaussianErrors { spacing: side.spacing, max_rel_variance_error: max_rel, max_w1_error: max_w1 })
}

#[derive(Debug, Clone)]
pub struct RefinementStudy {
    pub levels: Vec<GaussianErrors>,
    /// `log₂(e_k / e_{k+1})` for the variance errors.
    pub variance_orders: Vec<f64>,
    /// Same for the W1 errors.
    pub w1_orders: Vec<f64>,
}

/// Runs `gaussian_errors` at spacings `h, h/2, …` (`levels` of them).
pub fn refinement_study(
    dim: usize,
    half_width: f64,
    spacing: f64,
    grid: &TimeGrid,
    levels: usize,
    window: f64,
    w1_offsets: &[f64],
) -> Result<RefinementStudy> {
    let mut out = Vec::with_capacity(levels);
    for k in 0..levels {
        let h = spacing / f64::powi(2.0, k as i32);
        let (flow, side) = gaussian_flow_discrete(dim, half_width, h, grid.clone())?;
        out.push(gaussian_errors(&flow, &side, window, w1_offsets)?);
    }
    let order = |f: fn(&GaussianErrors) -> f64| -> Vec<f64> { out.windows(2).map(|w| (f(&w[0]) / f(&w[1])).log2()).collect() };
    let variance_orders = order(|e| e.max_rel_variance_error);
    let w1_orders = order(|e| e.max_w1_error);
    Ok(RefinementStudy { levels: out, variance_orders, w1_orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::h_concentration_constant;

    fn grid() -> TimeGrid {
        TimeGrid::new(vec![0.0, 0.5, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn undersampling_is_rejected() {
        let g = TimeGrid::new(vec![0.0, 0.001]).unwrap();
        assert!(gaussian_flow_discrete(1, 2.0, 0.1, g).is_err());
    }

    #[test]
    fn reflection_symmetry() {
        let (f, side) = gaussian_flow_discrete(1, 3.0, 0.25, grid()).unwrap();
        let m = side.points.len();
        let k = f.kernel(0, 2);
        for x in 0..m {
            for y in 0..m {
                assert!((k[[x, y]] - k[[m - 1 - x, m - 1 - y]]).abs() < 1e-15);
            }
        }
        assert!(f.approximate);
    }

    #[test]
    fn variance_matches_closed_form_in_the_bulk() {
        let (f, side) = gaussian_flow_discrete(1, 12.0, 0.1, grid()).unwrap();
        let e = gaussian_errors(&f, &side, 3.0, &[]).unwrap();
        assert!(e.max_rel_variance_error <= 0.02, "{e:?}");
    }

    #[test]
    fn concentration_constant_near_4n() {
        let (f, _) = gaussian_flow_discrete(1, 12.0, 0.1, grid()).unwrap();
        let h = h_concentration_constant(&f).h_min;
        assert!((h - 4.0).abs() <= 0.05 * 4.0, "H_min = {h}");
    }

    #[test]
    fn two_dimensional_lattice() {
        let g = TimeGrid::new(vec![0.0, 0.3]).unwrap();
        let (f, side) = gaussian_flow_discrete(2, 1.0, 0.5, g).unwrap();
        assert_eq!(side.points.len(), 25);
        assert!((f.slice(0).d(0, 24) - 8f64.sqrt()).abs() < 1e-15);
        assert!(side.truncation_warning);
    }
}
