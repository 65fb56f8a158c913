//! Static flows: one metric space for all times and kernels that depend on
//! the lag only, `K(s, t) = P(t − s)`.

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::flow::{MetricFlow, TimeGrid};
use crate::ot::FiniteMetricSpace;

/// Semigroup tolerance on the grid's lag set.
pub const SEMIGROUP_TOL: f64 = 1e-10;

/// Builds the flow with `K(s, t) = P(t_t − t_s)` and checks `P(τ₁)P(τ₂) = P(τ₁ + τ₂)`
/// on every grid triple.
pub fn static_flow(
    space: FiniteMetricSpace,
    semigroup: impl Fn(f64) -> Array2<f64>,
    grid: TimeGrid,
) -> Result<MetricFlow> {
    let n = grid.len();
    let times = grid.times().to_vec();
    let flow = MetricFlow::full(grid, vec![space; n], |s, t| Ok(semigroup(times[t] - times[s])))?;
    let (residual, at) = flow.reproduction_residual();
    if residual > SEMIGROUP_TOL {
        let (a, b, c) = at.expect("residual location");
        return Err(Error::Input(format!(
            "semigroup property fails for lags {} and {} (residual {residual:e})",
            times[c] - times[b],
            times[b] - times[a]
        )));
    }
    Ok(flow.with_tag("static", "true"))
}

/// `P(τ) = exp(τQ)` for a generator `Q` with non-negative off-diagonal
/// entries and zero row sums.
pub fn generator_semigroup(q: &Array2<f64>) -> Result<impl Fn(f64) -> Array2<f64>> {
    let (r, c) = q.dim();
    if r != c {
        return Err(Error::Input("generator must be square".into()));
    }
    for i in 0..r {
        let sum: f64 = q.row(i).sum();
        let off_ok = (0..c).all(|j| i == j || q[[i, j]] >= 0.0);
        if !off_ok || sum.abs() > 1e-12 * q.row(i).mapv(f64::abs).sum().max(1.0) {
            return Err(Error::Input(format!("row {i} of the generator is not a rate row")));
        }
    }
    let m = DMatrix::from_fn(r, c, |i, j| q[[i, j]]);
    Ok(move |tau: f64| {
        let p = (&m * tau).exp();
        // Clip rounding negatives and renormalize rows.
        let mut out = Array2::from_shape_fn((r, c), |(i, j)| p[(i, j)].max(0.0));
        for mut row in out.rows_mut() {
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        out
    })
}

/// Continuous-time random walk on the complete graph with rate `kappa` per edge:
/// `P(τ) = 1/m + (I − 1/m) e^{−m κ τ}`.
pub fn complete_graph_semigroup(m: usize, kappa: f64) -> impl Fn(f64) -> Array2<f64> {
    move |tau| {
        let e = (-(m as f64) * kappa * tau).exp();
        let base = (1.0 - e) / m as f64;
        Array2::from_shape_fn((m, m), |(i, j)| if i == j { base + e } else { base })
    }
}

/// Birth-death generator on a path of `m` states with rate `kappa` to each neighbour.
pub fn path_generator(m: usize, kappa: f64) -> Array2<f64> {
    let mut q = Array2::zeros((m, m));
    for i in 0..m {
        if i > 0 {
            q[[i, i - 1]] = kappa;
        }
        if i + 1 < m {
            q[[i, i + 1]] = kappa;
        }
        q[[i, i]] = -q.row(i).sum();
    }
    q
}

/// Whether every kernel of the flow depends only on the lag (to `tol`).
pub fn is_static(flow: &MetricFlow, tol: f64) -> bool {
    let n = flow.n_times();
    let first = flow.slice(0);
    if flow.slices().iter().any(|s| s.dist() != first.dist()) {
        return false;
    }
    let mut seen: Vec<(f64, Array2<f64>)> = Vec::new();
    for s in 0..n {
        for t in (s + 1)..n {
            let lag = flow.time(t) - flow.time(s);
            let k = flow.kernel(s, t);
            match seen.iter().find(|(l, _)| (l - lag).abs() <= 1e-12 * lag.max(1.0)) {
                Some((_, k0)) => {
                    if (&*k - k0).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b)) > tol {
                        return false;
                    }
                }
                None => seen.push((lag, k.into_owned())),
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::h_concentration_constant;

    #[test]
    fn identity_semigroup_is_frozen() {
        let g = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let f = static_flow(FiniteMetricSpace::line(3, 1.0).unwrap(), |_| Array2::eye(3), g).unwrap();
        assert_eq!(h_concentration_constant(&f).h_min, 0.0);
        assert_eq!(f.nu_row(4, 1, 0), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn expm_matches_complete_graph_closed_form() {
        let m = 4;
        let mut q = Array2::from_elem((m, m), 0.7);
        for i in 0..m {
            q[[i, i]] = -0.7 * (m - 1) as f64;
        }
        let p = generator_semigroup(&q).unwrap();
        let exact = complete_graph_semigroup(m, 0.7);
        for tau in [0.01, 0.3, 2.0] {
            let diff = (&p(tau) - &exact(tau)).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            assert!(diff < 1e-13, "τ={tau}: {diff:e}");
        }
    }

    #[test]
    fn path_chain_is_static_and_reproductive() {
        let g = TimeGrid::new(vec![0.0, 0.1, 0.35, 0.5, 1.0]).unwrap();
        let p = generator_semigroup(&path_generator(5, 2.0)).unwrap();
        let f = static_flow(FiniteMetricSpace::line(5, 1.0).unwrap(), p, g).unwrap();
        assert!(f.reproduction_residual().0 <= SEMIGROUP_TOL);
        assert!(is_static(&f, 1e-15));
    }

    #[test]
    fn non_semigroup_is_rejected() {
        let g = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        // Linear interpolation towards uniform is not a semigroup.
        let bad = |tau: f64| {
            let a = (1.0 - tau).max(0.0);
            Array2::from_shape_fn((2, 2), |(i, j)| if i == j { a + (1.0 - a) / 2.0 } else { (1.0 - a) / 2.0 })
        };
        let err = static_flow(FiniteMetricSpace::line(2, 1.0).unwrap(), bad, g).unwrap_err();
        assert!(matches!(err, Error::Input(ref m) if m.contains("lags")));
    }
}
