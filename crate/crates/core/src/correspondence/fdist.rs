//! The F-distance between two metric flow pairs within a fixed correspondence.
//!
//! For an exceptional set `E` and every `t ∉ E` the coupling `q_t` of `μ¹_t, μ²_t`
//! solves the min-max LP
//!
//! ```text
//! minimize r_t  subject to  Σ q_t · c_{s,t} ≤ r_t  for all s ≤ t, s ∉ E,
//! ```
//!
//! where `c_{s,t}(x¹, x²)` is the W1 distance on `Z_s` between the pushed-forward
//! kernels `ν¹_{x¹;s}` and `ν²_{x²;s}`. The value for `E` is
//! `max(√|E|, max_t r_t)`, minimized over the admitted sets `E`.

use std::collections::HashMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use super::ambient::{slice_index, Correspondence};
use crate::error::{Error, Result};
use crate::flow::{ConjHeatFlowField, MetricFlow, TimeGrid};
use crate::ot::lp::{LinearProgram, Relation};
use crate::ot::{glue_couplings, outer_marginal, w1_value, Coupling, FiniteMetricSpace, ProbMeasure};

/// Slack on certified integrals, `|E| ≤ r²` and the triangle inequality.
pub const CERT_SLACK: f64 = 1e-9;
/// Largest `I″` for the exhaustive search over `E`.
pub const EXHAUSTIVE_MAX_TIMES: usize = 12;

/// A metric flow with a conjugate heat flow on it.
#[derive(Debug, Clone, Copy)]
pub struct FlowPair<'a> {
    pub flow: &'a MetricFlow,
    pub mu: &'a ConjHeatFlowField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EMode {
    /// `E = ∅`.
    Empty,
    /// Every `E ⊆ I″ ∖ J` with at most half of the times.
    Exhaustive,
    /// Repeatedly drop the time with the largest `r_t` while the value improves.
    Greedy,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairIntegral {
    pub s: f64,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FDistanceReport {
    pub r: f64,
    pub mode: EMode,
    /// Set when the value is only an upper bound over `E` (greedy search).
    pub upper_bound_only: bool,
    pub exceptional_times: Vec<f64>,
    /// `|E|` with each time weighted by half of its adjacent gaps in `I″`.
    pub e_measure: f64,
    /// `(t, r_t)` for `t ∉ E`.
    pub r_t: Vec<(f64, f64)>,
    /// `(t, q_t)` for `t ∉ E`.
    pub couplings: Vec<(f64, Array2<f64>)>,
    pub per_pair_integrals: Vec<PairIntegral>,
    /// `(t, d_W1^{Z_t}(φ¹_*μ¹_t, φ²_*μ²_t))` for `t ∉ E`.
    pub diagonal_w1: Vec<(f64, f64)>,
    /// Failed invariants; empty for a certified report.
    pub violations: Vec<String>,
}

impl FDistanceReport {
    pub fn certified(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn coupling_at(&self, t: f64) -> Option<&Array2<f64>> {
        self.couplings.iter().find(|(s, _)| *s == t).map(|(_, q)| q)
    }
}

/// Everything the LPs need, indexed by positions in `I″`.
struct Problem<'a> {
    c: &'a Correspondence,
    grid: TimeGrid,
    mu1: Vec<ProbMeasure>,
    mu2: Vec<ProbMeasure>,
    /// `cost[(a, b)]` for positions `a ≤ b`, shape `n¹_b × n²_b`.
    cost: HashMap<(usize, usize), Array2<f64>>,
}

fn push(weights: &[f64], embed: &[usize], n: usize) -> Result<ProbMeasure> {
    let mut w = vec![0.0; n];
    for (i, &e) in embed.iter().enumerate() {
        w[e] += weights[i];
    }
    ProbMeasure::new(w)
}

fn measure_at(pair: &FlowPair<'_>, time: f64) -> Result<ProbMeasure> {
    let k = slice_index(pair.flow, time)?;
    pair.mu
        .at(k)
        .cloned()
        .ok_or_else(|| Error::Input(format!("conjugate heat flow undefined at time {time}")))
}

impl<'a> Problem<'a> {
    fn new(c: &'a Correspondence, p1: FlowPair<'_>, p2: FlowPair<'_>, which: (usize, usize)) -> Result<Self> {
        let times = &c.times;
        let idx1: Vec<usize> = times.iter().map(|&t| slice_index(p1.flow, t)).collect::<Result<_>>()?;
        let idx2: Vec<usize> = times.iter().map(|&t| slice_index(p2.flow, t)).collect::<Result<_>>()?;
        let mu1 = times.iter().map(|&t| measure_at(&p1, t)).collect::<Result<Vec<_>>>()?;
        let mu2 = times.iter().map(|&t| measure_at(&p2, t)).collect::<Result<Vec<_>>>()?;
        let n = times.len();
        let jobs: Vec<(usize, usize, usize, usize)> = (0..n)
            .flat_map(|b| (0..=b).map(move |a| (a, b)))
            .flat_map(|(a, b)| {
                let (m1, m2) = (p1.flow.slice(idx1[b]).len(), p2.flow.slice(idx2[b]).len());
                (0..m1).flat_map(move |x1| (0..m2).map(move |x2| (a, b, x1, x2)))
            })
            .collect();
        let values: Vec<f64> = jobs
            .par_iter()
            .map(|&(a, b, x1, x2)| {
                let amb = &c.ambients[a];
                let z: &FiniteMetricSpace = &amb.space;
                let n1 = push(&p1.flow.nu_row(idx1[b], x1, idx1[a]), &amb.embeds[which.0], z.len())?;
                let n2 = push(&p2.flow.nu_row(idx2[b], x2, idx2[a]), &amb.embeds[which.1], z.len())?;
                w1_value(z, &n1, &n2)
            })
            .collect::<Result<_>>()?;
        let mut cost = HashMap::new();
        let mut it = jobs.iter().zip(values);
        for b in 0..n {
            for a in 0..=b {
                let (m1, m2) = (p1.flow.slice(idx1[b]).len(), p2.flow.slice(idx2[b]).len());
                let mut m = Array2::zeros((m1, m2));
                for _ in 0..m1 * m2 {
                    let (&(_, _, x1, x2), v) = it.next().expect("one value per job");
                    m[[x1, x2]] = v;
                }
                cost.insert((a, b), m);
            }
        }
        Ok(Self { c, grid: TimeGrid::new(times.clone())?, mu1, mu2, cost })
    }

    fn n(&self) -> usize {
        self.c.times.len()
    }

    /// Min-max LP at position `b` over the constraint positions `ss`.
    fn solve_t(&self, b: usize, ss: &[usize]) -> Result<(f64, Array2<f64>)> {
        let (m1, m2) = (self.mu1[b].len(), self.mu2[b].len());
        let nv = m1 * m2 + 1;
        let r_var = m1 * m2;
        let mut obj = vec![0.0; nv];
        obj[r_var] = 1.0;
        let mut lp = LinearProgram::minimize(obj);
        for x1 in 0..m1 {
            let terms: Vec<(usize, f64)> = (0..m2).map(|x2| (x1 * m2 + x2, 1.0)).collect();
            lp.constrain_sparse(&terms, Relation::Eq, self.mu1[b].w(x1));
        }
        for x2 in 0..m2 {
            let terms: Vec<(usize, f64)> = (0..m1).map(|x1| (x1 * m2 + x2, 1.0)).collect();
            lp.constrain_sparse(&terms, Relation::Eq, self.mu2[b].w(x2));
        }
        for &a in ss {
            let c = &self.cost[&(a, b)];
            let mut terms: Vec<(usize, f64)> = c.indexed_iter().map(|((i, j), &v)| (i * m2 + j, v)).collect();
            terms.push((r_var, -1.0));
            lp.constrain_sparse(&terms, Relation::Le, 0.0);
        }
        let sol = lp.solve()?;
        let q = Array2::from_shape_fn((m1, m2), |(i, j)| sol.x[i * m2 + j]);
        // Certify with the integrals of the returned coupling, not the LP variable.
        let r = ss.iter().map(|&a| (&q * &self.cost[&(a, b)]).sum()).fold(0.0, f64::max);
        Ok((r, q))
    }
}

/// LP results per `(t, constraint mask)`, shared across candidate sets `E`.
struct Solver<'a> {
    p: Problem<'a>,
    memo: HashMap<(usize, u64), (f64, Array2<f64>)>,
}

impl Solver<'_> {
    fn r_t(&mut self, b: usize, e: u64) -> Result<(f64, Array2<f64>)> {
        let mask = e & ((1u64 << (b + 1)) - 1);
        if let Some(v) = self.memo.get(&(b, mask)) {
            return Ok(v.clone());
        }
        let ss: Vec<usize> = (0..=b).filter(|&a| mask & (1 << a) == 0).collect();
        let v = self.p.solve_t(b, &ss)?;
        self.memo.insert((b, mask), v.clone());
        Ok(v)
    }

    fn e_measure(&self, e: u64) -> f64 {
        let idx: Vec<usize> = (0..self.p.n()).filter(|&a| e & (1 << a) != 0).collect();
        self.p.grid.weight(&idx)
    }

    /// `(value, per-time r_t)` for the set `E` given as a bit mask.
    fn value(&mut self, e: u64) -> Result<(f64, Vec<(usize, f64)>)> {
        let mut rs = Vec::new();
        let mut worst = self.e_measure(e).sqrt();
        for b in 0..self.p.n() {
            if e & (1 << b) == 0 {
                let (r, _) = self.r_t(b, e)?;
                worst = worst.max(r);
                rs.push((b, r));
            }
        }
        Ok((worst, rs))
    }
}

/// F-distance of `(f1, μ¹)` and `(f2, μ²)` within the first two embeddings of `c`
/// (or the embeddings `which`), with `J` given as times of `I″`.
pub fn f_distance_within(c: &Correspondence, p1: FlowPair<'_>, p2: FlowPair<'_>, j: &[f64], mode: EMode) -> Result<FDistanceReport> {
    f_distance_embedded(c, (0, 1), p1, p2, j, mode)
}

pub fn f_distance_embedded(
    c: &Correspondence,
    which: (usize, usize),
    p1: FlowPair<'_>,
    p2: FlowPair<'_>,
    j: &[f64],
    mode: EMode,
) -> Result<FDistanceReport> {
    if which.0 >= c.n_flows() || which.1 >= c.n_flows() {
        return Err(Error::Input("correspondence lacks the requested embeddings".into()));
    }
    let n = c.times.len();
    if n == 0 || n > 63 {
        return Err(Error::Input(format!("{n} correspondence times are not supported")));
    }
    let j_pos: Vec<usize> = j
        .iter()
        .map(|&t| c.position(t).ok_or_else(|| Error::Input(format!("J contains {t}, which is not in I″"))))
        .collect::<Result<_>>()?;
    let j_mask: u64 = j_pos.iter().fold(0, |m, &a| m | (1 << a));
    let mut solver = Solver { p: Problem::new(c, p1, p2, which)?, memo: HashMap::new() };

    let (best_e, upper_bound_only) = match mode {
        EMode::Empty => (0u64, false),
        EMode::Exhaustive => {
            if n > EXHAUSTIVE_MAX_TIMES {
                return Err(Error::Input(format!("exhaustive E-search supports at most {EXHAUSTIVE_MAX_TIMES} times")));
            }
            let mut best = (f64::INFINITY, 0u64);
            for e in 0u64..(1 << n) {
                if e & j_mask != 0 || e.count_ones() as usize > n / 2 {
                    continue;
                }
                let (v, _) = solver.value(e)?;
                if v < best.0 {
                    best = (v, e);
                }
            }
            (best.1, false)
        }
        EMode::Greedy => {
            let mut e = 0u64;
            let (mut v, mut rs) = solver.value(e)?;
            while let Some(&(worst_b, _)) =
                rs.iter().filter(|(b, _)| j_mask & (1 << b) == 0).max_by(|x, y| x.1.total_cmp(&y.1))
            {
                let cand = e | (1 << worst_b);
                let (cv, crs) = solver.value(cand)?;
                if cv < v {
                    (e, v, rs) = (cand, cv, crs);
                } else {
                    break;
                }
            }
            (e, true)
        }
    };

    build_report(&mut solver, best_e, j_mask, mode, upper_bound_only, which)
}

fn build_report(solver: &mut Solver<'_>, e: u64, j_mask: u64, mode: EMode, upper_bound_only: bool, which: (usize, usize)) -> Result<FDistanceReport> {
    let n = solver.p.n();
    let times = solver.p.c.times.clone();
    let (r, rs) = solver.value(e)?;
    let e_measure = solver.e_measure(e);
    let mut couplings = Vec::new();
    let mut integrals = Vec::new();
    let mut diagonal = Vec::new();
    let mut violations = Vec::new();
    for b in (0..n).filter(|&b| e & (1 << b) == 0) {
        let (_, q) = solver.r_t(b, e)?;
        for a in (0..=b).filter(|&a| e & (1 << a) == 0) {
            let v = (&q * &solver.p.cost[&(a, b)]).sum();
            if v > r + CERT_SLACK {
                violations.push(format!("integral at ({}, {}) is {v} > r = {r}", times[a], times[b]));
            }
            integrals.push(PairIntegral { s: times[a], t: times[b], value: v });
        }
        let amb = &solver.p.c.ambients[b];
        let z = &amb.space;
        let m1 = push(solver.p.mu1[b].as_slice(), &amb.embeds[which.0], z.len())?;
        let m2 = push(solver.p.mu2[b].as_slice(), &amb.embeds[which.1], z.len())?;
        let w = w1_value(z, &m1, &m2)?;
        if w > r + CERT_SLACK {
            violations.push(format!("d_W1 of the pushforwards at {} is {w} > r = {r}", times[b]));
        }
        diagonal.push((times[b], w));
        let marg = Coupling::new(q.clone()).map(|c| c.marginal_error(&solver.p.mu1[b], &solver.p.mu2[b]));
        match marg {
            Ok(err) if err <= 1e-9 => {}
            Ok(err) => violations.push(format!("coupling at {} misses its marginals by {err:e}", times[b])),
            Err(err) => violations.push(format!("coupling at {} is invalid: {err}", times[b])),
        }
        couplings.push((times[b], q));
    }
    if e_measure > r * r + CERT_SLACK {
        violations.push(format!("|E| = {e_measure} exceeds r² = {}", r * r));
    }
    if e & j_mask != 0 {
        violations.push("E meets J".into());
    }
    Ok(FDistanceReport {
        r,
        mode,
        upper_bound_only,
        exceptional_times: (0..n).filter(|&a| e & (1 << a) != 0).map(|a| times[a]).collect(),
        e_measure,
        r_t: rs.into_iter().map(|(b, v)| (times[b], v)).collect(),
        couplings,
        per_pair_integrals: integrals,
        diagonal_w1: diagonal,
        violations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TriangleReport {
    pub d12: f64,
    pub d23: f64,
    pub d13: f64,
    pub holds: bool,
    /// Value certified for the pair (1, 3) by gluing the optimal couplings of
    /// (1, 2) and (2, 3) with `E = E¹² ∪ E²³`.
    pub glued_value: f64,
    /// Glued couplings have the right marginals and integrals within `d12 + d23`.
    pub glued_certificate_ok: bool,
}

/// `d(1,3) ≤ d(1,2) + d(2,3)` within a three-way correspondence.
pub fn f_triangle_check(c: &Correspondence, pairs: [FlowPair<'_>; 3], j: &[f64], mode: EMode) -> Result<TriangleReport> {
    if c.n_flows() != 3 {
        return Err(Error::Input("the triangle check needs a three-way correspondence".into()));
    }
    let r12 = f_distance_embedded(c, (0, 1), pairs[0], pairs[1], j, mode)?;
    let r23 = f_distance_embedded(c, (1, 2), pairs[1], pairs[2], j, mode)?;
    let r13 = f_distance_embedded(c, (0, 2), pairs[0], pairs[2], j, mode)?;
    let (d12, d23, d13) = (r12.r, r23.r, r13.r);

    // Proof certificate: glue q¹²_t and q²³_t along μ²_t and evaluate on (1, 3).
    let mut e_times: Vec<f64> = r12.exceptional_times.iter().chain(&r23.exceptional_times).copied().collect();
    e_times.sort_by(f64::total_cmp);
    e_times.dedup();
    let p = Problem::new(c, pairs[0], pairs[2], (0, 2))?;
    let n = c.times.len();
    let in_e = |a: usize| e_times.contains(&c.times[a]);
    let mut glued_value = p.grid.weight(&(0..n).filter(|&a| in_e(a)).collect::<Vec<_>>()).sqrt();
    let mut ok = true;
    for b in (0..n).filter(|&b| !in_e(b)) {
        let t = c.times[b];
        let (Some(q12), Some(q23)) = (r12.coupling_at(t), r23.coupling_at(t)) else {
            ok = false;
            continue;
        };
        let q12 = Coupling::new(q12.clone())?;
        let q23 = Coupling::new(q23.clone())?;
        let q13 = match glue_couplings(&q12, &q23) {
            Ok(q123) => outer_marginal(&q123),
            Err(_) => {
                ok = false;
                continue;
            }
        };
        if Coupling::new(q13.clone()).map(|q| q.marginal_error(&p.mu1[b], &p.mu2[b])).unwrap_or(f64::INFINITY) > 1e-9 {
            ok = false;
        }
        for a in (0..=b).filter(|&a| !in_e(a)) {
            let v = (&q13 * &p.cost[&(a, b)]).sum();
            glued_value = glued_value.max(v);
        }
    }
    ok &= glued_value <= d12 + d23 + CERT_SLACK;
    Ok(TriangleReport { d12, d23, d13, holds: d13 <= d12 + d23 + CERT_SLACK, glued_value, glued_certificate_ok: ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::{combine_correspondences, identity_correspondence};
    use crate::flow::conj_backward;
    use crate::generators::two_point_flow;

    fn flow(d: f64, steps: usize) -> MetricFlow {
        two_point_flow(20.0, d, TimeGrid::uniform(0.0, 1.0, steps).unwrap()).unwrap()
    }

    fn uniform_top(f: &MetricFlow) -> ConjHeatFlowField {
        conj_backward(f, f.n_times() - 1, &ProbMeasure::uniform(2)).unwrap()
    }

    #[test]
    fn self_distance_is_zero() {
        let f = flow(1.0, 4);
        let mu = uniform_top(&f);
        let (c, _) = identity_correspondence(&f, &f).unwrap();
        let p = FlowPair { flow: &f, mu: &mu };
        for mode in [EMode::Empty, EMode::Greedy, EMode::Exhaustive] {
            let r = f_distance_within(&c, p, p, &[], mode).unwrap();
            assert!(r.r.abs() <= 1e-12, "{mode:?}: {}", r.r);
            assert!(r.certified(), "{:?}", r.violations);
        }
    }

    #[test]
    fn symmetric_under_swap() {
        let (f1, f2) = (flow(1.0, 3), flow(1.3, 3));
        let (m1, m2) = (uniform_top(&f1), uniform_top(&f2));
        let (c, _) = identity_correspondence(&f1, &f2).unwrap();
        let a = f_distance_within(&c, FlowPair { flow: &f1, mu: &m1 }, FlowPair { flow: &f2, mu: &m2 }, &[], EMode::Empty).unwrap();
        let b = f_distance_within(&c.swapped().unwrap(), FlowPair { flow: &f2, mu: &m2 }, FlowPair { flow: &f1, mu: &m1 }, &[], EMode::Empty)
            .unwrap();
        assert!((a.r - b.r).abs() <= 1e-10);
        // Half the distortion at t = 0; later times add the mismatch in mixing rates.
        assert!((a.r_t[0].1 - 0.15).abs() <= 1e-12);
        assert!(a.r >= 0.15 && a.r < 0.3);
    }

    #[test]
    fn corrupted_slice_is_excluded() {
        let g = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let f1 = flow(1.0, 4);
        // Same kernels, but the slice at t = 0.5 is stretched.
        let slices: Vec<FiniteMetricSpace> =
            (0..5).map(|k| if k == 2 { f1.slice(k).scaled(6.0).unwrap() } else { f1.slice(k).clone() }).collect();
        let f2 = MetricFlow::full(g, slices, |s, t| Ok(f1.kernel(s, t).into_owned())).unwrap();
        let (m1, m2) = (uniform_top(&f1), uniform_top(&f2));
        let (c, _) = identity_correspondence(&f1, &f2).unwrap();
        let (p1, p2) = (FlowPair { flow: &f1, mu: &m1 }, FlowPair { flow: &f2, mu: &m2 });
        let empty = f_distance_within(&c, p1, p2, &[], EMode::Empty).unwrap();
        let ex = f_distance_within(&c, p1, p2, &[], EMode::Exhaustive).unwrap();
        assert!(ex.r < empty.r);
        assert_eq!(ex.exceptional_times, vec![0.5]);
        assert!(ex.e_measure <= ex.r * ex.r + CERT_SLACK && ex.certified());
        // Protecting the corrupted time with J forbids the exclusion.
        let pinned = f_distance_within(&c, p1, p2, &[0.5], EMode::Exhaustive).unwrap();
        assert!(pinned.r >= ex.r);
        assert!(f_distance_within(&c, p1, p2, &[0.3], EMode::Empty).is_err());
    }

    #[test]
    fn triangle_on_three_two_point_flows() {
        let fs: Vec<MetricFlow> = [1.0, 1.1, 1.2].iter().map(|&d| flow(d, 3)).collect();
        let ms: Vec<ConjHeatFlowField> = fs.iter().map(uniform_top).collect();
        let (c12, _) = identity_correspondence(&fs[0], &fs[1]).unwrap();
        let (c23, _) = identity_correspondence(&fs[1], &fs[2]).unwrap();
        let c = combine_correspondences(&c12, &c23).unwrap();
        let pairs = [0, 1, 2].map(|i| FlowPair { flow: &fs[i], mu: &ms[i] });
        let rep = f_triangle_check(&c, pairs, &[], EMode::Empty).unwrap();
        assert!(rep.holds, "{rep:?}");
        assert!(rep.glued_certificate_ok, "{rep:?}");
    }
}
