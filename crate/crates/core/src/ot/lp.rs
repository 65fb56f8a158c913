//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Sized for the small min-max programs that appear in flow comparisons and
//! for cross-checking the transportation solver. All variables are nonnegative.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

const PIVOT_EPS: f64 = 1e-11;

impl LinearProgram {
    /// Minimize `objective · x` subject to constraints added later, `x ≥ 0`.
    pub fn minimize(objective: Vec<f64>) -> Self {
        Self { objective, rows: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.objective.len(), "constraint width");
        self.rows.push((coeffs, rel, rhs));
        self
    }

    /// Sparse helper: `Σ coeff · x[index]  rel  rhs`.
    pub fn constrain_sparse(&mut self, terms: &[(usize, f64)], rel: Relation, rhs: f64) -> &mut Self {
        let mut row = vec![0.0; self.n_vars()];
        for &(i, c) in terms {
            row[i] += c;
        }
        self.constrain(row, rel, rhs)
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// `m` constraint rows then the objective row; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_orig: usize,
    n_cols: usize,
    artificial_start: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let m = lp.rows.len();
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|(a, rel, b)| {
                if *b < 0.0 {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|x| -x).collect(), flipped, -b)
                } else {
                    (a.clone(), *rel, *b)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let artificial_start = n + n_slack;
        let n_cols = artificial_start + n_art;
        let mut t = vec![vec![0.0; n_cols + 1]; m + 1];
        let mut basis = vec![0; m];
        let (mut s, mut a) = (n, artificial_start);
        for (r, (coeffs, rel, rhs)) in rows.drain(..).enumerate() {
            t[r][..n].copy_from_slice(&coeffs);
            t[r][n_cols] = rhs;
            match rel {
                Relation::Le => {
                    t[r][s] = 1.0;
                    basis[r] = s;
                    s += 1;
                }
                Relation::Ge => {
                    t[r][s] = -1.0;
                    s += 1;
                    t[r][a] = 1.0;
                    basis[r] = a;
                    a += 1;
                }
                Relation::Eq => {
                    t[r][a] = 1.0;
                    basis[r] = a;
                    a += 1;
                }
            }
        }
        Self { t, basis, n_orig: n, n_cols, artificial_start }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Loads `cost` (over all columns) into the objective row in reduced form.
    fn set_objective(&mut self, cost: &[f64]) {
        let m = self.m();
        let mut z = vec![0.0; self.n_cols + 1];
        z[..cost.len()].copy_from_slice(cost);
        for r in 0..m {
            let cb = cost.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (zv, tv) in z.iter_mut().zip(&self.t[r]) {
                    *zv -= cb * tv;
                }
            }
        }
        self.t[m] = z;
    }

    /// Bland's rule iterations over columns `< col_limit`.
    fn iterate(&mut self, col_limit: usize) -> Result<()> {
        let m = self.m();
        let rhs = self.n_cols;
        let limit = 50_000 + 100 * (m + 1) * (self.n_cols + 1);
        for _ in 0..limit {
            let Some(enter) = (0..col_limit).find(|&j| self.t[m][j] < -PIVOT_EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.t[r][enter];
                if a > PIVOT_EPS {
                    let ratio = self.t[r][rhs] / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-14
                                || (ratio <= lratio + 1e-14 && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, enter);
        }
        Err(Error::IterationLimit("dense simplex"))
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let m = self.m();
        let rhs = self.n_cols;
        if self.artificial_start < self.n_cols {
            let mut phase1 = vec![0.0; self.n_cols];
            for c in phase1.iter_mut().skip(self.artificial_start) {
                *c = 1.0;
            }
            self.set_objective(&phase1);
            self.iterate(self.n_cols)?;
            let infeas = -self.t[m][rhs];
            let scale = 1.0 + (0..m).map(|r| self.t[r][rhs].abs()).fold(0.0, f64::max);
            if infeas > 1e-9 * scale {
                return Err(Error::Infeasible);
            }
            // Drive zero-level artificials out; rows where that is impossible are redundant.
            let mut r = 0;
            while r < self.m() {
                if self.basis[r] >= self.artificial_start {
                    let col = (0..self.artificial_start).find(|&j| self.t[r][j].abs() > 1e-9);
                    match col {
                        Some(j) => {
                            self.pivot(r, j);
                            r += 1;
                        }
                        None => {
                            self.t.remove(r);
                            self.basis.remove(r);
                        }
                    }
                } else {
                    r += 1;
                }
            }
        }
        let m = self.m();
        self.set_objective(&lp.objective);
        self.iterate(self.artificial_start)?;
        let mut x = vec![0.0; self.n_orig];
        for r in 0..m {
            if self.basis[r] < self.n_orig {
                x[self.basis[r]] = self.t[r][rhs].max(0.0);
            }
        }
        let value = lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
        Ok(LpSolution { x, value })
    }
}
