//! Transportation simplex for dense rectangular cost matrices.
//!
//! The basis is a spanning tree on the bipartite row/column graph. Each pivot
//! prices all non-basic cells, pushes flow around the unique tree cycle, and
//! repairs the potentials. Zero-mass rows and columns are removed before the
//! solve and receive c-transform potentials afterwards.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Optimal plan with dual potentials `u`, `v` such that `u_i + v_j ≤ c_ij`.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub value: f64,
    pub plan: Array2<f64>,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub pivots: usize,
}

impl TransportPlan {
    pub fn dual_value(&self, a: &[f64], b: &[f64]) -> f64 {
        self.u.iter().zip(a).map(|(u, a)| u * a).sum::<f64>()
            + self.v.iter().zip(b).map(|(v, b)| v * b).sum::<f64>()
    }
}

struct Tree {
    m: usize,
    /// Basic cells as (row, col).
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// For each node (rows then columns) the incident basic cell ids.
    adj: Vec<Vec<usize>>,
}

impl Tree {
    fn other(&self, node: usize, cell: usize) -> usize {
        let (i, j) = self.cells[cell];
        if node < self.m {
            self.m + j
        } else {
            i
        }
    }

    fn add(&mut self, i: usize, j: usize, x: f64) -> usize {
        let id = self.cells.len();
        self.cells.push((i, j));
        self.flow.push(x);
        self.adj[i].push(id);
        self.adj[self.m + j].push(id);
        id
    }

    fn replace(&mut self, leaving: usize, i: usize, j: usize, x: f64) {
        let (li, lj) = self.cells[leaving];
        self.adj[li].retain(|&c| c != leaving);
        let m = self.m;
        self.adj[m + lj].retain(|&c| c != leaving);
        self.cells[leaving] = (i, j);
        self.flow[leaving] = x;
        self.adj[i].push(leaving);
        self.adj[m + j].push(leaving);
    }

    fn potentials(&self, cost: &Array2<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
        let m = self.m;
        let mut pot = vec![f64::NAN; m + n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &c in &self.adj[node] {
                let other = self.other(node, c);
                if pot[other].is_nan() {
                    let (i, j) = self.cells[c];
                    // u_i + v_j = c_ij on basic cells.
                    pot[other] = cost[[i, j]] - pot[node];
                    queue.push_back(other);
                }
            }
        }
        let v = pot.split_off(m);
        (pot, v)
    }

    /// Cells on the tree path from `from` to `to`, in order.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let total = self.adj.len();
        let mut via = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &c in &self.adj[node] {
                let other = self.other(node, c);
                if !seen[other] {
                    seen[other] = true;
                    via[other] = c;
                    queue.push_back(other);
                }
            }
        }
        let mut out = Vec::new();
        let mut node = to;
        while node != from {
            let c = via[node];
            out.push(c);
            node = self.other(node, c);
        }
        out.reverse();
        out
    }
}

const MAX_PIVOTS_PER_CELL: usize = 50;

/// Minimizes `Σ c_ij x_ij` over nonnegative `x` with row sums `a` and column sums `b`.
///
/// `a` and `b` must be nonnegative with equal totals (within `1e-10`).
pub fn solve_transport(cost: &Array2<f64>, a: &[f64], b: &[f64]) -> Result<TransportPlan> {
    let (n1, n2) = cost.dim();
    if a.len() != n1 || b.len() != n2 {
        return Err(Error::Input(format!(
            "cost is {n1}x{n2} but marginals have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Input("marginals must be finite and nonnegative".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Input("cost matrix has non-finite entries".into()));
    }
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    if (sa - sb).abs() > 1e-10 * sa.max(sb).max(1.0) {
        return Err(Error::Input(format!("marginal totals differ: {sa} vs {sb}")));
    }

    let rows: Vec<usize> = (0..n1).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n2).filter(|&j| b[j] > 0.0).collect();
    let mut plan = Array2::zeros((n1, n2));
    if rows.is_empty() || cols.is_empty() {
        return Ok(TransportPlan {
            value: 0.0,
            plan,
            u: Array1::zeros(n1),
            v: Array1::zeros(n2),
            pivots: 0,
        });
    }
    let (m, n) = (rows.len(), cols.len());
    let c = Array2::from_shape_fn((m, n), |(i, j)| cost[[rows[i], cols[j]]]);
    let scale = c.iter().fold(0.0f64, |s, &x| s.max(x.abs())).max(1.0);
    let tol = 1e-12 * scale;

    let mut tree = Tree { m, cells: Vec::with_capacity(m + n - 1), flow: Vec::new(), adj: vec![Vec::new(); m + n] };
    initial_basis(&mut tree, &c, &rows.iter().map(|&i| a[i]).collect::<Vec<_>>(), &cols.iter().map(|&j| b[j]).collect::<Vec<_>>());

    let max_pivots = MAX_PIVOTS_PER_CELL * (m * n).max(16);
    let mut pivots = 0usize;
    let mut degenerate_run = 0usize;
    let mut in_basis = Array2::from_elem((m, n), false);
    for &(i, j) in &tree.cells {
        in_basis[[i, j]] = true;
    }
    loop {
        let (u, v) = tree.potentials(&c, n);
        // Dantzig pricing; after a long run of degenerate pivots switch to
        // first-improving (Bland) order, which cannot cycle.
        let bland = degenerate_run > 2 * (m + n);
        let mut best: Option<(usize, usize, f64)> = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if in_basis[[i, j]] {
                    continue;
                }
                let rc = c[[i, j]] - u[i] - v[j];
                if rc < -tol && best.is_none_or(|(_, _, r)| rc < r) {
                    best = Some((i, j, rc));
                    if bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some((ei, ej, _)) = best else {
            for (k, &(i, j)) in tree.cells.iter().enumerate() {
                plan[[rows[i], cols[j]]] = tree.flow[k].max(0.0);
            }
            let mut uf = Array1::from_elem(n1, f64::NAN);
            let mut vf = Array1::from_elem(n2, f64::NAN);
            for (k, &i) in rows.iter().enumerate() {
                uf[i] = u[k];
            }
            for (k, &j) in cols.iter().enumerate() {
                vf[j] = v[k];
            }
            // Inactive rows and columns get c-transform potentials, which keep
            // u_i + v_j ≤ c_ij without changing the dual objective.
            for i in 0..n1 {
                if uf[i].is_nan() {
                    uf[i] = cols.iter().map(|&j| cost[[i, j]] - vf[j]).fold(f64::INFINITY, f64::min);
                }
            }
            for j in 0..n2 {
                if vf[j].is_nan() {
                    vf[j] = (0..n1).map(|i| cost[[i, j]] - uf[i]).fold(f64::INFINITY, f64::min);
                }
            }
            let value = (&plan * cost).sum();
            return Ok(TransportPlan { value, plan, u: uf, v: vf, pivots });
        };

        // Cycle: entering cell (+), then alternating signs along the tree path
        // from column ej back to row ei.
        let path = tree.path(m + ej, ei);
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 && tree.flow[cell] < theta {
                theta = tree.flow[cell];
                leaving = cell;
            }
        }
        let theta = theta.max(0.0);
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 {
                tree.flow[cell] -= theta;
            } else {
                tree.flow[cell] += theta;
            }
        }
        let (li, lj) = tree.cells[leaving];
        in_basis[[li, lj]] = false;
        in_basis[[ei, ej]] = true;
        tree.replace(leaving, ei, ej, theta);

        degenerate_run = if theta <= 0.0 { degenerate_run + 1 } else { 0 };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::IterationLimit("transportation simplex"));
        }
    }
}

/// Least-cost-first feasible spanning tree with exactly `m + n - 1` cells.
fn initial_basis(tree: &mut Tree, c: &Array2<f64>, a: &[f64], b: &[f64]) {
    let (m, n) = c.dim();
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    let mut row_open = vec![true; m];
    let mut col_open = vec![true; n];
    let (mut rows_left, mut cols_left) = (m, n);
    let mut order: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    order.sort_by(|p, q| c[[p.0, p.1]].total_cmp(&c[[q.0, q.1]]).then(p.cmp(q)));
    for (i, j) in order {
        if !row_open[i] || !col_open[j] {
            continue;
        }
        let x = ra[i].min(rb[j]);
        tree.add(i, j, x);
        ra[i] -= x;
        rb[j] -= x;
        // Close exactly one line per cell (except for the last), so the result
        // is a spanning tree even when both lines are exhausted together.
        if rows_left == 1 && cols_left == 1 {
            break;
        }
        let close_row = if rows_left == 1 {
            false
        } else if cols_left == 1 {
            true
        } else {
            ra[i] <= rb[j]
        };
        if close_row {
            row_open[i] = false;
            rows_left -= 1;
        } else {
            col_open[j] = false;
            cols_left -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_by_two_excess_mass() {
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        let p = solve_transport(&c, &[0.7, 0.3], &[0.3, 0.7]).unwrap();
        assert!((p.value - 0.4).abs() < 1e-15);
        assert!((p.plan[[0, 1]] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_rows_are_skipped() {
        let c = array![[0.0, 2.0, 3.0], [2.0, 0.0, 1.0], [3.0, 1.0, 0.0]];
        let p = solve_transport(&c, &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.value, 3.0);
        for i in 0..3 {
            for j in 0..3 {
                assert!(p.u[i] + p.v[j] <= c[[i, j]] + 1e-12);
            }
        }
    }

    #[test]
    fn duals_are_feasible_and_tight() {
        let c = array![[4.0, 1.0, 3.0, 2.0], [2.0, 5.0, 1.0, 4.0], [3.0, 2.0, 6.0, 1.0]];
        let a = [0.3, 0.5, 0.2];
        let b = [0.1, 0.4, 0.25, 0.25];
        let p = solve_transport(&c, &a, &b).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                assert!(p.u[i] + p.v[j] <= c[[i, j]] + 1e-12);
            }
        }
        assert!((p.dual_value(&a, &b) - p.value).abs() < 1e-12);
    }

    #[test]
    fn unequal_totals_rejected() {
        let c = array![[0.0]];
        assert!(solve_transport(&c, &[1.0], &[0.5]).is_err());
    }
}
