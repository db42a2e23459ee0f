//! Exact transportation problem solver (primal transportation simplex).
//!
//! The basis is a spanning tree over the `m + n` row and column nodes.
//! Pivoting first runs on costs scaled by 10^6 and rounded, where reduced
//! costs are exact integers, then continues on the unscaled costs with a
//! tight tolerance until no improving cell remains. Entering cells follow
//! Dantzig's rule; after a long run of pivots the solver falls back to
//! Bland's rule, which cannot cycle.

use std::collections::VecDeque;

const COST_SCALE: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `(row, column, flow)` for every basic cell, including zero flows.
    pub cells: Vec<(usize, usize, f64)>,
    /// Total cost under the unscaled costs.
    pub cost: f64,
}

struct Basis {
    m: usize,
    n: usize,
    /// Basic cells: (row, col, flow). Always `m + n - 1` entries.
    cells: Vec<(usize, usize, f64)>,
    in_basis: Vec<bool>,
}

impl Basis {
    fn northwest(supply: &[f64], demand: &[f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut a = supply.to_vec();
        let mut b = demand.to_vec();
        let mut cells = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            if i == m - 1 && j == n - 1 {
                // absorbs rounding mismatch between the two totals
                cells.push((i, j, a[i].max(0.0)));
                break;
            }
            let x = a[i].min(b[j]).max(0.0);
            cells.push((i, j, x));
            a[i] -= x;
            b[j] -= x;
            if (a[i] <= b[j] && i < m - 1) || j == n - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        let mut in_basis = vec![false; m * n];
        for &(i, j, _) in &cells {
            in_basis[i * n + j] = true;
        }
        Basis {
            m,
            n,
            cells,
            in_basis,
        }
    }

    /// Node ids: rows `0..m`, columns `m..m + n`. Adjacency lists hold (node, cell).
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j, _)) in self.cells.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    /// Dual potentials with `u[0] = 0`.
    fn potentials(&self, adj: &[Vec<(usize, usize)>], cost: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut pot = vec![f64::NAN; self.m + self.n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0]);
        while let Some(v) = queue.pop_front() {
            for &(w, k) in &adj[v] {
                if pot[w].is_nan() {
                    let (i, j, _) = self.cells[k];
                    let c = cost[i * self.n + j];
                    // u_i + v_j = c_ij
                    pot[w] = c - pot[v];
                    queue.push_back(w);
                }
            }
        }
        let v = pot.split_off(self.m);
        (pot, v)
    }

    /// Cells on the tree path from column node of `col` to row node of `row`,
    /// in order starting next to the column.
    fn path(&self, adj: &[Vec<(usize, usize)>], row: usize, col: usize) -> Vec<usize> {
        let start = self.m + col;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            if v == row {
                break;
            }
            for &(w, k) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((v, k));
                    queue.push_back(w);
                }
            }
        }
        let mut cells = Vec::new();
        let mut v = row;
        while let Some((p, k)) = parent[v] {
            cells.push(k);
            v = p;
        }
        cells.reverse();
        cells
    }

    /// Pivots until no cell has reduced cost below `-tol`.
    fn optimize(&mut self, cost: &[f64], tol: f64) {
        let max_dantzig = 50 * (self.m + self.n) + 1000;
        let mut iterations = 0usize;
        loop {
            let adj = self.adjacency();
            let (u, v) = self.potentials(&adj, cost);
            let bland = iterations > max_dantzig;
            let mut entering = None;
            let mut best = -tol;
            'scan: for i in 0..self.m {
                for j in 0..self.n {
                    if self.in_basis[i * self.n + j] {
                        continue;
                    }
                    let r = cost[i * self.n + j] - u[i] - v[j];
                    if r < best {
                        entering = Some((i, j));
                        if bland {
                            break 'scan;
                        }
                        best = r;
                    }
                }
            }
            let Some((ei, ej)) = entering else {
                return;
            };
            iterations += 1;

            // cycle: entering (+), then path cells alternate -, +, -, ...
            let path = self.path(&adj, ei, ej);
            let mut leave = None;
            let mut theta = f64::INFINITY;
            for (pos, &k) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    let (i, j, x) = self.cells[k];
                    let better = x < theta
                        || (x == theta
                            && leave.is_some_and(|l: usize| {
                                let (li, lj, _) = self.cells[l];
                                i * self.n + j < li * self.n + lj
                            }));
                    if better {
                        theta = x;
                        leave = Some(k);
                    }
                }
            }
            let leave = leave.expect("cycle has a decreasing cell");
            for (pos, &k) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    self.cells[k].2 -= theta;
                } else {
                    self.cells[k].2 += theta;
                }
            }
            let (li, lj, _) = self.cells[leave];
            self.in_basis[li * self.n + lj] = false;
            self.in_basis[ei * self.n + ej] = true;
            self.cells[leave] = (ei, ej, theta);
        }
    }
}

/// Solves `min sum c_ij x_ij` subject to row sums `supply`, column sums
/// `demand`, `x >= 0`. `cost` is row-major `supply.len() x demand.len()`.
/// The two totals must agree up to rounding.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> TransportPlan {
    let (m, n) = (supply.len(), demand.len());
    assert_eq!(cost.len(), m * n, "cost matrix shape");
    if m == 0 || n == 0 {
        return TransportPlan {
            cells: Vec::new(),
            cost: 0.0,
        };
    }
    let mut basis = Basis::northwest(supply, demand);
    let scaled: Vec<f64> = cost.iter().map(|c| (c * COST_SCALE).round()).collect();
    basis.optimize(&scaled, 0.5);
    let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    basis.optimize(cost, 1e-13 * max_cost.max(1.0));
    let total = basis
        .cells
        .iter()
        .map(|&(i, j, x)| x * cost[i * n + j])
        .sum();
    TransportPlan {
        cells: basis.cells,
        cost: total,
    }
}
