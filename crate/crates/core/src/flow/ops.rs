//! Restriction, parabolic rescaling, Cartesian products and supports.

use ndarray::Array2;

use super::grid::TimeGrid;
use super::heat::{conj_backward, ConjHeatFlowField};
use super::metric_flow::{KernelMode, MetricFlow};
use crate::error::{Error, Result};
use crate::ot::{product_space, ProbMeasure};

/// Keeps the listed grid indices (sorted, distinct) and the kernels between them.
pub fn restrict_flow(flow: &MetricFlow, keep: &[usize]) -> Result<MetricFlow> {
    if keep.is_empty() || keep.windows(2).any(|w| w[0] >= w[1]) || *keep.last().unwrap() >= flow.n_times() {
        return Err(Error::Input("sub-grid must be a strictly increasing list of grid indices".into()));
    }
    let grid = flow.grid().subgrid(keep)?;
    let slices = keep.iter().map(|&i| flow.slice(i).clone()).collect();
    let mut out = MetricFlow::full(grid, slices, |a, b| Ok(flow.kernel(keep[a], keep[b]).into_owned()))?;
    out.approximate = flow.approximate;
    out.tags = flow.tags.clone();
    Ok(out)
}

/// Times `t ↦ λ² t + t₀`, distances `d ↦ λ d`, kernels unchanged.
pub fn rescale_shift(flow: &MetricFlow, lambda: f64, t0: f64) -> Result<MetricFlow> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Input(format!("λ = {lambda} must be positive")));
    }
    let grid = TimeGrid::new(flow.grid().times().iter().map(|t| lambda * lambda * t + t0).collect())?;
    let slices = flow.slices().iter().map(|s| s.scaled(lambda)).collect::<Result<Vec<_>>>()?;
    let mut out = match flow.mode() {
        KernelMode::Markov => {
            let adj = (0..flow.n_times().saturating_sub(1)).map(|k| flow.adjacent_kernel(k).clone()).collect();
            MetricFlow::markov(grid, slices, adj)?
        }
        KernelMode::Full => MetricFlow::full(grid, slices, |s, t| Ok(flow.kernel(s, t).into_owned()))?,
    };
    out.approximate = flow.approximate;
    out.tags = flow.tags.clone();
    Ok(out)
}

fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(r, c)| a[[r / br, c / bc]] * b[[r % br, c % bc]])
}

/// Product flow on a common grid; point `(x1, x2)` has index `x1 · n₂ + x2`.
pub fn cartesian_product_flow(f1: &MetricFlow, f2: &MetricFlow) -> Result<MetricFlow> {
    if f1.grid() != f2.grid() {
        return Err(Error::GridMismatch("product factors must share the same time grid".into()));
    }
    let slices = (0..f1.n_times()).map(|t| product_space(f1.slice(t), f2.slice(t))).collect();
    let grid = f1.grid().clone();
    let mut out = if f1.mode() == KernelMode::Markov && f2.mode() == KernelMode::Markov {
        let adj = (0..f1.n_times().saturating_sub(1))
            .map(|k| kron(f1.adjacent_kernel(k), f2.adjacent_kernel(k)))
            .collect();
        MetricFlow::markov(grid, slices, adj)?
    } else {
        MetricFlow::full(grid, slices, |s, t| Ok(kron(&f1.kernel(s, t), &f2.kernel(s, t))))?
    };
    out.approximate = f1.approximate || f2.approximate;
    Ok(out)
}

/// `{x : μ_t(x) > 0}`; the whole slice at the final grid time.
pub fn support_at(flow: &MetricFlow, mu: &ConjHeatFlowField, t: usize) -> Result<Vec<usize>> {
    if t + 1 == flow.n_times() {
        return Ok((0..flow.slice(t).len()).collect());
    }
    let m = mu.at(t).ok_or_else(|| Error::Input(format!("conjugate heat flow undefined at index {t}")))?;
    Ok(m.support())
}

#[derive(Debug, Clone)]
pub struct SupportReport {
    pub support: Vec<usize>,
    /// Later times `t′` whose full-support conjugate heat flows disagreed on the support.
    pub disagreements: Vec<usize>,
}

/// Support of `X_t` computed from conjugate heat flows started with full support at
/// every later time, using two different start measures each; all must agree.
pub fn slice_support(flow: &MetricFlow, t: usize) -> Result<SupportReport> {
    let n = flow.n_times();
    if t >= n {
        return Err(Error::Input(format!("time index {t} out of range")));
    }
    if t + 1 == n {
        return Ok(SupportReport { support: (0..flow.slice(t).len()).collect(), disagreements: Vec::new() });
    }
    let mut reference: Option<Vec<usize>> = None;
    let mut disagreements = Vec::new();
    for top in (t + 1)..n {
        let m = flow.slice(top).len();
        let uniform = ProbMeasure::uniform(m);
        let tilted = ProbMeasure::normalized((1..=m).map(|i| i as f64).collect::<Vec<_>>())?;
        for start in [uniform, tilted] {
            let field = conj_backward(flow, top, &start)?;
            let supp = support_at(flow, &field, t)?;
            match &reference {
                None => reference = Some(supp),
                Some(r) if *r != supp && !disagreements.contains(&top) => disagreements.push(top),
                _ => {}
            }
        }
    }
    Ok(SupportReport { support: reference.unwrap_or_default(), disagreements })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::concentration::h_concentration_constant;
    use crate::ot::FiniteMetricSpace;
    use ndarray::array;

    fn chain(steps: usize) -> MetricFlow {
        let g = TimeGrid::uniform(0.0, 1.0, steps).unwrap();
        let p = array![[0.8, 0.2, 0.0], [0.1, 0.8, 0.1], [0.0, 0.3, 0.7]];
        MetricFlow::markov(g, vec![FiniteMetricSpace::line(3, 1.0).unwrap(); steps + 1], vec![p; steps]).unwrap()
    }

    #[test]
    fn identity_rescale() {
        let f = chain(3);
        let g = rescale_shift(&f, 1.0, 0.0).unwrap();
        assert_eq!(g.grid(), f.grid());
        assert_eq!(*g.kernel(0, 3), *f.kernel(0, 3));
    }

    #[test]
    fn rescaling_keeps_concentration_constant() {
        let f = chain(4);
        let g = rescale_shift(&f, 1.7, -3.0).unwrap();
        let (a, b) = (h_concentration_constant(&f).h_min, h_concentration_constant(&g).h_min);
        assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn restriction_keeps_kernels() {
        let f = chain(4);
        let r = restrict_flow(&f, &[0, 2, 4]).unwrap();
        assert_eq!(*r.kernel(0, 1), *f.kernel(0, 2));
        assert!(r.reproduction_residual().0 <= 1e-15);
        assert!(restrict_flow(&f, &[2, 1]).is_err());
    }

    #[test]
    fn product_with_point_flow() {
        let f = chain(2);
        let g = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        let point = MetricFlow::markov(g, vec![FiniteMetricSpace::single_point(); 3], vec![Array2::eye(1); 2]).unwrap();
        let p = cartesian_product_flow(&f, &point).unwrap();
        assert_eq!(*p.kernel(0, 2), *f.kernel(0, 2));
        assert_eq!(p.slice(1).dist(), f.slice(1).dist());
    }

    #[test]
    fn zero_column_is_outside_support() {
        let g = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        // Nothing flows back into point 2 of the earlier slices.
        let p = array![[0.7, 0.3, 0.0], [0.4, 0.6, 0.0], [0.5, 0.5, 0.0]];
        let f = MetricFlow::markov(g, vec![FiniteMetricSpace::line(3, 1.0).unwrap(); 3], vec![p; 2]).unwrap();
        let r = slice_support(&f, 0).unwrap();
        assert_eq!(r.support, vec![0, 1]);
        assert!(r.disagreements.is_empty());
        assert_eq!(slice_support(&f, 2).unwrap().support, vec![0, 1, 2]);
    }
}
