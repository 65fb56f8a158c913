//! Verification of the metric flow axioms on a finite grid.
//!
//! Structural properties (metric slices, stochastic kernels, Dirac kernels at
//! the own time, reproduction) are checked exactly up to fixed tolerances.
//! The Φ-gradient property quantifies over all Lipschitz initial data, so it
//! is decided completely only when the earlier slice has two points; other
//! slices get a necessary-condition battery of cone functions, random maxima
//! of cones, and unrestricted data for `T = 0`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::metric_flow::MetricFlow;
use super::phi::{phi, phi_inv_pair};
use crate::ot::measure::MASS_TOL;
use crate::ot::MetricReport;

/// Reproduction residual tolerance.
pub const REPRODUCTION_TOL: f64 = 1e-10;
/// Slack on the Lipschitz ratio of `Φ⁻¹ ∘ u_t`.
pub const RATIO_TOL: f64 = 1e-9;
/// Bound on `|Φ⁻¹ ∘ u_s|` for the battery's test data.
const DATA_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientMode {
    /// Complete parameter sweep on two-point slices (step in `(0,1)` for each
    /// compactified parameter); the randomized battery elsewhere.
    Exhaustive2pt { step: f64, seeds: usize },
    /// Necessary-condition battery everywhere.
    Randomized { seeds: usize },
    /// Skip the gradient property.
    Skip,
}

impl Default for GradientMode {
    fn default() -> Self {
        GradientMode::Exhaustive2pt { step: 1e-3, seeds: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Complete,
    NecessaryOnly,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Complete => "complete",
            Verdict::NecessaryOnly => "necessary-only",
        }
    }
}

/// Worst Lipschitz ratio `|Φ⁻¹u_t(x) − Φ⁻¹u_t(y)| √(t−s+T) / d_t(x,y)` for one time pair.
#[derive(Debug, Clone)]
pub struct GradientRecord {
    pub s: usize,
    pub t: usize,
    pub worst_ratio: f64,
    /// `T` attaining the worst ratio (0 for the unrestricted family).
    pub worst_t_param: f64,
    pub verdict: Verdict,
    pub evaluations: usize,
}

impl GradientRecord {
    pub fn passed(&self) -> bool {
        self.worst_ratio <= 1.0 + RATIO_TOL
    }
}

#[derive(Debug, Clone)]
pub enum AxiomViolation {
    SliceNotMetric { t: usize, report: MetricReport },
    KernelRowSum { s: usize, t: usize, x: usize, sum: f64 },
    Reproduction { t1: usize, t2: usize, t3: usize, residual: f64 },
    Gradient { s: usize, t: usize, ratio: f64, t_param: f64 },
}

#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub violations: Vec<AxiomViolation>,
    pub reproduction_residual: f64,
    pub max_row_sum_error: f64,
    pub gradient: Vec<GradientRecord>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn worst_gradient_ratio(&self) -> f64 {
        self.gradient.iter().map(|g| g.worst_ratio).fold(0.0, f64::max)
    }

    /// True when every gradient record came from a complete sweep.
    pub fn gradient_complete(&self) -> bool {
        !self.gradient.is_empty() && self.gradient.iter().all(|g| g.verdict == Verdict::Complete)
    }
}

pub fn verify_flow_axioms(flow: &MetricFlow, mode: GradientMode, seed: u64) -> AxiomReport {
    let mut violations = Vec::new();
    for t in 0..flow.n_times() {
        let report = flow.slice(t).check_metric_axioms();
        if !report.is_valid() {
            violations.push(AxiomViolation::SliceNotMetric { t, report });
        }
    }
    let n = flow.n_times();
    let mut max_row_sum_error = 0.0f64;
    for s in 0..n {
        for t in (s + 1)..n {
            let k = flow.kernel(s, t);
            for (x, row) in k.rows().into_iter().enumerate() {
                let sum: f64 = row.sum();
                max_row_sum_error = max_row_sum_error.max((sum - 1.0).abs());
                if (sum - 1.0).abs() > MASS_TOL {
                    violations.push(AxiomViolation::KernelRowSum { s, t, x, sum });
                }
            }
        }
    }
    let (reproduction_residual, at) = flow.reproduction_residual();
    if reproduction_residual > REPRODUCTION_TOL {
        let (t1, t2, t3) = at.expect("residual location");
        violations.push(AxiomViolation::Reproduction { t1, t2, t3, residual: reproduction_residual });
    }

    let gradient = match mode {
        GradientMode::Skip => Vec::new(),
        _ => gradient_records(flow, mode, seed),
    };
    for g in &gradient {
        if !g.passed() {
            violations.push(AxiomViolation::Gradient { s: g.s, t: g.t, ratio: g.worst_ratio, t_param: g.worst_t_param });
        }
    }
    AxiomReport { violations, reproduction_residual, max_row_sum_error, gradient }
}

fn gradient_records(flow: &MetricFlow, mode: GradientMode, seed: u64) -> Vec<GradientRecord> {
    let n = flow.n_times();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|s| ((s + 1)..n).map(move |t| (s, t))).collect();
    let sweep = match mode {
        GradientMode::Exhaustive2pt { step, .. } if (0..n).any(|s| flow.slice(s).len() == 2) => {
            Some(SweepTables::new(step))
        }
        _ => None,
    };
    let Some(tables) = sweep.filter(|_| matches!(mode, GradientMode::Exhaustive2pt { .. })) else {
        return pairs.par_iter().map(|&(s, t)| battery_for(flow, mode, s, t, seed)).collect();
    };
    // The complete sweep depends only on the kernel, both slice metrics and the
    // lag; static flows repeat these across many pairs, so each distinct input
    // is swept once.
    let keys: Vec<Option<Vec<u64>>> = pairs
        .iter()
        .map(|&(s, t)| (flow.slice(s).len() == 2).then(|| sweep_key(flow, s, t)))
        .collect();
    let mut unique: Vec<usize> = Vec::new();
    let mut slot = vec![usize::MAX; pairs.len()];
    for (i, key) in keys.iter().enumerate() {
        if let Some(key) = key {
            match unique.iter().position(|&j| keys[j].as_ref() == Some(key)) {
                Some(u) => slot[i] = u,
                None => {
                    slot[i] = unique.len();
                    unique.push(i);
                }
            }
        }
    }
    let swept: Vec<GradientRecord> = unique
        .par_iter()
        .map(|&i| two_point_sweep(flow, pairs[i].0, pairs[i].1, &tables))
        .collect();
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, &(s, t))| match swept.get(slot[i]) {
            Some(rec) => GradientRecord { s, t, ..rec.clone() },
            None => battery_for(flow, mode, s, t, seed),
        })
        .collect()
}

fn battery_for(flow: &MetricFlow, mode: GradientMode, s: usize, t: usize, seed: u64) -> GradientRecord {
    let seeds = match mode {
        GradientMode::Exhaustive2pt { seeds, .. } | GradientMode::Randomized { seeds } => seeds,
        GradientMode::Skip => unreachable!("gradient check skipped"),
    };
    battery(flow, s, t, seeds, seed ^ ((s as u64) << 32 | t as u64))
}

/// Bit pattern of every input the two-point sweep reads.
fn sweep_key(flow: &MetricFlow, s: usize, t: usize) -> Vec<u64> {
    let k = flow.kernel(s, t);
    let mut key = vec![k.nrows() as u64, flow.slice(s).d(0, 1).to_bits(), (flow.time(t) - flow.time(s)).to_bits()];
    key.extend(k.iter().map(|v| v.to_bits()));
    key.extend(flow.slice(t).dist().iter().map(|v| v.to_bits()));
    key
}

/// Evaluates the Lipschitz ratio of `Φ⁻¹ ∘ u_t` given `u_t` and `1 − u_t`.
/// Returns infinity when `u_t` reaches 0 or 1 without being constant.
#[inline]
fn ratio_on_slice(ut: &[f64], utc: &[f64], f: &mut [f64], dist: &Array2<f64>, scale: f64) -> f64 {
    let n = ut.len();
    let (lo, hi) = ut.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo == hi {
        return 0.0;
    }
    for x in 0..n {
        match phi_inv_pair(ut[x], utc[x]) {
            Some(v) => f[x] = v,
            None => return f64::INFINITY,
        }
    }
    let mut worst = 0.0f64;
    for x in 0..n {
        for y in (x + 1)..n {
            let d = dist[[x, y]];
            let diff = (f[x] - f[y]).abs();
            let r = if d > 0.0 { diff / d } else if diff > 0.0 { f64::INFINITY } else { 0.0 };
            worst = worst.max(r);
        }
    }
    worst * scale
}

/// Precomputed `Φ(c ± A)` on the compactified grid `c = Φ⁻¹(v)`, `A = a/(1−a)`.
struct SweepTables {
    /// Per grid point: `(Φ(c+A), Φ(−c−A), Φ(c−A), Φ(−c+A), A)`.
    entries: Vec<[f64; 5]>,
    /// Unrestricted data for `T = 0`: a square grid on `[0,1]²`.
    square: Vec<f64>,
}

impl SweepTables {
    fn new(step: f64) -> Self {
        let k = (1.0 / step).round() as usize;
        let interior: Vec<f64> = (1..k).map(|i| i as f64 / k as f64).collect();
        let centers: Vec<f64> = interior.iter().map(|&v| super::phi::phi_inv(v).expect("interior")).collect();
        let mut entries = Vec::with_capacity(interior.len() * interior.len());
        for &c in &centers {
            for &a in &interior {
                let h = a / (1.0 - a);
                entries.push([phi(c + h), phi(-c - h), phi(c - h), phi(-c + h), h]);
            }
        }
        let square = (0..=k).map(|i| i as f64 / k as f64).collect();
        Self { entries, square }
    }
}

fn two_point_sweep(flow: &MetricFlow, s: usize, t: usize, tables: &SweepTables) -> GradientRecord {
    let k = flow.kernel(s, t);
    let dt = flow.slice(t).dist();
    let ds = flow.slice(s).d(0, 1);
    let lag = flow.time(t) - flow.time(s);
    let nt = k.nrows();
    let (k0, k1): (Vec<f64>, Vec<f64>) = (0..nt).map(|x| (k[[x, 0]], k[[x, 1]])).unzip();
    let mut ut = vec![0.0; nt];
    let mut utc = vec![0.0; nt];
    let mut f = vec![0.0; nt];
    let mut worst = 0.0f64;
    let mut worst_t = 0.0;
    let mut evals = 0usize;

    // T > 0 on the Lipschitz boundary |f(a) − f(b)| = d_s / √T, i.e. half-spread
    // A = d_s / (2√T). Interior data are boundary data for a larger T, whose
    // requirement is stronger, so the boundary family is complete. The mirrored
    // orientation is the complement u ↦ 1 − u of the grid point at −c.
    if ds > 0.0 {
        for e in &tables.entries {
            let [ua, uac, ub, ubc, h] = *e;
            for x in 0..nt {
                ut[x] = k0[x] * ua + k1[x] * ub;
                utc[x] = k0[x] * uac + k1[x] * ubc;
            }
            let tp = (ds / (2.0 * h)).powi(2);
            let r = ratio_on_slice(&ut, &utc, &mut f, dt, (lag + tp).sqrt());
            evals += 1;
            if r > worst {
                worst = r;
                worst_t = tp;
            }
        }
    }
    // T = 0: any data with values in [0, 1].
    let scale0 = lag.sqrt();
    for &a in &tables.square {
        for &b in &tables.square {
            for x in 0..nt {
                ut[x] = k0[x] * a + k1[x] * b;
                utc[x] = k0[x] * (1.0 - a) + k1[x] * (1.0 - b);
            }
            let r = ratio_on_slice(&ut, &utc, &mut f, dt, scale0);
            evals += 1;
            if r > worst {
                worst = r;
                worst_t = 0.0;
            }
        }
    }
    GradientRecord { s, t, worst_ratio: worst, worst_t_param: worst_t, verdict: Verdict::Complete, evaluations: evals }
}

fn battery(flow: &MetricFlow, s: usize, t: usize, seeds: usize, seed: u64) -> GradientRecord {
    let k = flow.kernel(s, t);
    let xs = flow.slice(s);
    let dt = flow.slice(t).dist();
    let lag = flow.time(t) - flow.time(s);
    let (nt, ns) = k.dim();
    let diam = xs.diameter().max(f64::MIN_POSITIVE);
    let mut t_params: Vec<f64> = [1.0 / 16.0, 0.25, 1.0, 4.0, 16.0].iter().map(|m| m * lag).collect();
    t_params.extend([1.0 / 16.0, 0.25, 1.0, 4.0].iter().map(|m| m * diam * diam));
    let offsets: Vec<f64> = (0..=12).map(|i| -3.0 + 0.5 * i as f64).collect();

    let mut us = vec![0.0; ns];
    let mut usc = vec![0.0; ns];
    let mut ut = vec![0.0; nt];
    let mut utc = vec![0.0; nt];
    let mut f = vec![0.0; nt];
    let mut worst = 0.0f64;
    let mut worst_t = 0.0;
    let mut evals = 0usize;

    let mut eval = |us: &[f64], usc: &[f64], tp: f64, worst: &mut f64, worst_t: &mut f64| {
        for x in 0..nt {
            let row = k.row(x);
            ut[x] = row.iter().zip(us).map(|(a, b)| a * b).sum();
            utc[x] = row.iter().zip(usc).map(|(a, b)| a * b).sum();
        }
        let r = ratio_on_slice(&ut, &utc, &mut f, dt, (lag + tp).sqrt());
        evals += 1;
        if r > *worst {
            *worst = r;
            *worst_t = tp;
        }
    };

    // Clamping keeps the Lipschitz constant and both tails of Φ normal.
    let set_from_f = |fv: &[f64], us: &mut [f64], usc: &mut [f64]| {
        for y in 0..fv.len() {
            let v = fv[y].clamp(-DATA_CLAMP, DATA_CLAMP);
            us[y] = phi(v);
            usc[y] = phi(-v);
        }
    };

    let mut fs = vec![0.0; ns];
    for &tp in &t_params {
        let slope = tp.powf(-0.5);
        for y0 in 0..ns {
            for sign in [1.0, -1.0] {
                for &c in &offsets {
                    for (y, f) in fs.iter_mut().enumerate() {
                        *f = sign * slope * xs.d(y, y0) + c;
                    }
                    set_from_f(&fs, &mut us, &mut usc);
                    eval(&us, &usc, tp, &mut worst, &mut worst_t);
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..seeds {
        let tp = t_params[rng.random_range(0..t_params.len())];
        let slope = tp.powf(-0.5);
        let cones = rng.random_range(1..=3);
        fs.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
        for _ in 0..cones {
            let y0 = rng.random_range(0..ns);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let c = rng.random_range(-3.0..3.0);
            for (y, f) in fs.iter_mut().enumerate() {
                *f = f.max(sign * slope * xs.d(y, y0) + c);
            }
        }
        set_from_f(&fs, &mut us, &mut usc);
        eval(&us, &usc, tp, &mut worst, &mut worst_t);
    }

    // T = 0: indicator functions of subsets (small slices) and random data.
    if ns <= 12 {
        for mask in 1u32..((1u32 << ns) - 1) {
            for y in 0..ns {
                let bit = ((mask >> y) & 1) as f64;
                us[y] = bit;
                usc[y] = 1.0 - bit;
            }
            eval(&us, &usc, 0.0, &mut worst, &mut worst_t);
        }
    }
    for _ in 0..seeds {
        for y in 0..ns {
            let v: f64 = rng.random();
            us[y] = v;
            usc[y] = 1.0 - v;
        }
        eval(&us, &usc, 0.0, &mut worst, &mut worst_t);
    }
    GradientRecord { s, t, worst_ratio: worst, worst_t_param: worst_t, verdict: Verdict::NecessaryOnly, evaluations: evals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::grid::TimeGrid;
    use crate::ot::FiniteMetricSpace;
    use ndarray::array;

    fn symmetric_two_point(c: f64, steps: usize) -> MetricFlow {
        let g = TimeGrid::uniform(0.0, 1.0, steps).unwrap();
        let h = 1.0 / steps as f64;
        let p = 0.5 + 0.5 * (-c * h).exp();
        let k = array![[p, 1.0 - p], [1.0 - p, p]];
        MetricFlow::markov(g, vec![FiniteMetricSpace::line(2, 1.0).unwrap(); steps + 1], vec![k; steps]).unwrap()
    }

    #[test]
    fn corrupted_row_is_reported() {
        let mut f = symmetric_two_point(100.0, 2);
        f.set_kernel_row(0, 1, 0, &[0.8, 0.1]).unwrap();
        let r = verify_flow_axioms(&f, GradientMode::Skip, 0);
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, AxiomViolation::KernelRowSum { s: 0, t: 1, x: 0, .. })));
    }

    #[test]
    fn frozen_flow_fails_gradient() {
        let g = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let f = MetricFlow::markov(g, vec![FiniteMetricSpace::line(3, 1.0).unwrap(); 2], vec![Array2::eye(3)]).unwrap();
        let r = verify_flow_axioms(&f, GradientMode::Randomized { seeds: 8 }, 1);
        assert!(r.gradient[0].worst_ratio.is_infinite());
        assert!(!r.passed());
    }

    #[test]
    fn strong_mixing_passes_coarse_sweep() {
        let f = symmetric_two_point(100.0, 2);
        let r = verify_flow_axioms(&f, GradientMode::Exhaustive2pt { step: 0.02, seeds: 16 }, 0);
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.gradient_complete());
    }
}
