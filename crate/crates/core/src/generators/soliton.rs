//! Self-similar flows and the fixed point of the soliton map
//! `F(μ′) = ∫ ν_{x;t₀} d((ψ_{1/2})_* μ′)(x)`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{MetricFlow, TimeGrid};
use crate::ot::{w1_value, FiniteMetricSpace, ProbMeasure};

/// Tolerance for the self-similarity checks on distances and kernels.
pub const SELF_SIMILARITY_TOL: f64 = 1e-9;

/// Flow on times `t₀ 4^{−k}`, `k = 0..=levels`, with slices `2^{−k} · space` and the
/// same adjacent kernel at every step. `ψ_{1/2}` is the identity on indices.
pub fn self_similar_chain(space: &FiniteMetricSpace, step: Array2<f64>, levels: usize, t0: f64) -> Result<MetricFlow> {
    if !(t0 < 0.0) {
        return Err(Error::Input(format!("t₀ = {t0} must be negative")));
    }
    if levels == 0 {
        return Err(Error::Input("at least one level is needed".into()));
    }
    let times: Vec<f64> = (0..=levels).map(|k| t0 * 0.25f64.powi(k as i32)).collect();
    let slices = (0..=levels).map(|k| space.scaled(0.5f64.powi(k as i32))).collect::<Result<Vec<_>>>()?;
    Ok(MetricFlow::markov(TimeGrid::new(times)?, slices, vec![step; levels])?.with_tag("generator", "self-similar"))
}

#[derive(Debug, Clone)]
pub struct SolitonResult {
    pub measure: ProbMeasure,
    /// `d_W1(μ_k, μ_{k+1})` along the iteration.
    pub trace: Vec<f64>,
    /// `d_W1(μ′, F(μ′))`.
    pub residual: f64,
}

/// The map `F` for a verified self-similarity.
#[derive(Debug, Clone)]
pub struct SolitonMap<'a> {
    flow: &'a MetricFlow,
    t0: usize,
    quarter: usize,
    psi: Vec<usize>,
}

fn time_index(flow: &MetricFlow, target: f64) -> Option<usize> {
    flow.grid().times().iter().position(|&t| (t - target).abs() <= 1e-12 * target.abs().max(1e-300))
}

/// `ψ_{1/2}` as index maps: `psi[k]` sends `X_{t_k}` to `X_{t_k/4}`; it is empty
/// when `t_k/4` is not a grid time. Index-preserving maps suit [`self_similar_chain`].
pub fn identity_self_similarity(flow: &MetricFlow) -> Vec<Vec<usize>> {
    (0..flow.n_times())
        .map(|k| match time_index(flow, flow.time(k) / 4.0) {
            Some(_) => (0..flow.slice(k).len()).collect(),
            None => Vec::new(),
        })
        .collect()
}

impl<'a> SolitonMap<'a> {
    /// Checks that every supplied `ψ` is a bijection onto the slice at a quarter of
    /// the time that halves distances, and that kernels between mapped times agree:
    /// `K(k/4, j/4)[ψ x, ψ y] = K(k, j)[x, y]`.
    pub fn new(flow: &'a MetricFlow, t0: usize, psi: &[Vec<usize>]) -> Result<Self> {
        let n = flow.n_times();
        if psi.len() != n {
            return Err(Error::Input(format!("ψ needs one map per grid time ({n})")));
        }
        if !(flow.time(t0) < 0.0) {
            return Err(Error::Input(format!("t₀ = {} must be negative", flow.time(t0))));
        }
        let mut quarter = vec![None; n];
        for k in 0..n {
            if psi[k].is_empty() {
                continue;
            }
            let q = time_index(flow, flow.time(k) / 4.0)
                .ok_or_else(|| Error::Input(format!("t/4 = {} is not a grid time", flow.time(k) / 4.0)))?;
            let (xs, xq) = (flow.slice(k), flow.slice(q));
            if psi[k].len() != xs.len() || xq.len() != xs.len() {
                return Err(Error::Input(format!("ψ at index {k} must be a bijection between equally sized slices")));
            }
            let mut hit = vec![false; xq.len()];
            for &p in &psi[k] {
                if p >= xq.len() || std::mem::replace(&mut hit[p], true) {
                    return Err(Error::Input(format!("ψ at index {k} is not a bijection")));
                }
            }
            for x in 0..xs.len() {
                for y in 0..xs.len() {
                    let (want, got) = (0.5 * xs.d(x, y), xq.d(psi[k][x], psi[k][y]));
                    if (want - got).abs() > SELF_SIMILARITY_TOL * want.max(1.0) {
                        return Err(Error::Input(format!("ψ does not halve d({x},{y}) at index {k}: {got} vs {want}")));
                    }
                }
            }
            quarter[k] = Some(q);
        }
        let q0 = quarter[t0].ok_or_else(|| Error::Input("ψ must be given at t₀ and t₀/4 must be a grid time".into()))?;
        for k in 0..n {
            for j in (k + 1)..n {
                let (Some(kq), Some(jq)) = (quarter[k], quarter[j]) else { continue };
                let (a, b) = (flow.kernel(k, j), flow.kernel(kq, jq));
                for x in 0..a.nrows() {
                    for y in 0..a.ncols() {
                        if (b[[psi[j][x], psi[k][y]]] - a[[x, y]]).abs() > SELF_SIMILARITY_TOL {
                            return Err(Error::Input(format!("kernels ({k},{j}) are not self-similar at ({x},{y})")));
                        }
                    }
                }
            }
        }
        Ok(Self { flow, t0, quarter: q0, psi: psi[t0].clone() })
    }

    /// `F(μ′)`.
    pub fn apply(&self, mu: &ProbMeasure) -> Result<ProbMeasure> {
        let mut pushed = vec![0.0; self.psi.len()];
        for (x, &p) in self.psi.iter().enumerate() {
            pushed[p] += mu.w(x);
        }
        let k = self.flow.kernel(self.t0, self.quarter);
        let out = k.t().dot(&ndarray::Array1::from(pushed));
        ProbMeasure::normalized(out)
    }

    fn space(&self) -> &FiniteMetricSpace {
        self.flow.slice(self.t0)
    }

    /// Iterates `F` from `start` until consecutive iterates are within `1e-14`
    /// (at most `max_iter` steps).
    pub fn fixed_point(&self, start: &ProbMeasure, max_iter: usize) -> Result<SolitonResult> {
        let mut mu = start.clone();
        let mut trace = Vec::new();
        for _ in 0..max_iter {
            let next = self.apply(&mu)?;
            let step = w1_value(self.space(), &mu, &next)?;
            trace.push(step);
            mu = next;
            if step <= 1e-14 {
                break;
            }
        }
        let residual = w1_value(self.space(), &mu, &self.apply(&mu)?)?;
        Ok(SolitonResult { measure: mu, trace, residual })
    }

    /// Largest `d_W1(Fμ, Fν) / d_W1(μ, ν)` over `pairs` random pairs.
    pub fn contraction_factor(&self, pairs: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.psi.len();
        let mut worst = 0.0f64;
        let random_measure = |rng: &mut ChaCha8Rng| -> Result<ProbMeasure> {
            // Sparse supports stress the extreme points of the simplex.
            let w: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { -rng.random::<f64>().max(1e-300).ln() })
                .collect();
            if w.iter().all(|&v| v == 0.0) {
                return Ok(ProbMeasure::dirac(n, rng.random_range(0..n)));
            }
            ProbMeasure::normalized(w)
        };
        for _ in 0..pairs {
            let a = random_measure(&mut rng)?;
            let b = random_measure(&mut rng)?;
            let before = w1_value(self.space(), &a, &b)?;
            if before <= 1e-12 {
                continue;
            }
            let after = w1_value(self.space(), &self.apply(&a)?, &self.apply(&b)?)?;
            worst = worst.max(after / before);
        }
        Ok(worst)
    }
}

/// Fixed point of `F` from the uniform start, plus the measured contraction factor.
pub fn soliton_fixed_point<'a>(flow: &'a MetricFlow, t0: usize, psi: &[Vec<usize>]) -> Result<(SolitonResult, SolitonMap<'a>)> {
    let map = SolitonMap::new(flow, t0, psi)?;
    let n = flow.slice(t0).len();
    let res = map.fixed_point(&ProbMeasure::uniform(n), 500)?;
    Ok((res, map))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `P_x = ½ δ_{max(x−1,0)} + ½ π`: W1-Lipschitz with constant ½.
    fn drift_chain() -> MetricFlow {
        let space = FiniteMetricSpace::line(6, 1.0).unwrap();
        let pi = [1.0, 2.0, 3.0, 3.0, 2.0, 1.0].map(|v| v / 12.0);
        let step = Array2::from_shape_fn((6, 6), |(x, y)| 0.5 * pi[y] + if y == x.saturating_sub(1) { 0.5 } else { 0.0 });
        self_similar_chain(&space, step, 3, -1.0).unwrap()
    }

    #[test]
    fn single_point_fixed_point() {
        let f = self_similar_chain(&FiniteMetricSpace::single_point(), Array2::eye(1), 2, -1.0).unwrap();
        let (r, _) = soliton_fixed_point(&f, 0, &identity_self_similarity(&f)).unwrap();
        assert_eq!(r.measure.as_slice(), &[1.0]);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn drift_chain_contracts_and_converges() {
        let f = drift_chain();
        let (r, map) = soliton_fixed_point(&f, 0, &identity_self_similarity(&f)).unwrap();
        assert!(r.residual <= 1e-10, "{}", r.residual);
        for w in r.trace.windows(2) {
            if w[0] > 1e-13 {
                assert!(w[1] <= 0.5 * w[0] + 1e-12, "{w:?}");
            }
        }
        assert!(map.contraction_factor(100, 7).unwrap() <= 0.5 + 1e-9);
    }

    #[test]
    fn broken_scaling_is_rejected() {
        let space = FiniteMetricSpace::line(3, 1.0).unwrap();
        let g = TimeGrid::new(vec![-1.0, -0.25]).unwrap();
        // Distances not halved.
        let f = MetricFlow::markov(g, vec![space.clone(), space], vec![Array2::eye(3)]).unwrap();
        assert!(SolitonMap::new(&f, 0, &identity_self_similarity(&f)).is_err());
        let f = drift_chain();
        let mut psi = identity_self_similarity(&f);
        assert!(SolitonMap::new(&f, 1, &psi).is_ok());
        psi[0] = vec![0, 0, 1, 2, 3, 4];
        assert!(SolitonMap::new(&f, 0, &psi).is_err());
        // Swapping two points breaks kernel compatibility while halving distances
        // only if the metric is symmetric under the swap; the reflection does both.
        psi[0] = (0..6).rev().collect();
        assert!(SolitonMap::new(&f, 0, &psi).is_err());
    }
}
