//! Transportation simplex on the bipartite row/column graph.
//!
//! The basis is a spanning tree with `n + m - 1` cells (degenerate zero
//! flows allowed). Entering cells follow the most negative reduced cost,
//! ties going to the first cell in row-major order; after a run of
//! degenerate pivots the rule falls back to Bland's (first improving cell),
//! and leaving cells are always the smallest index among the minimum-flow
//! candidates. The pivot sequence, and hence the returned vertex, depends
//! only on the inputs.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::{check_inputs, OtSolution};
use crate::error::{Error, Result};

const DEGENERATE_RUN_BEFORE_BLAND: usize = 32;

/// Exact optimal transport between `alpha` and `beta` under `cost`.
pub fn exact_ot(
    alpha: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    cost: ArrayView2<f64>,
) -> Result<OtSolution> {
    check_inputs(alpha, beta, cost)?;
    let (plan, pivots) = TransportSimplex::new(alpha, beta, cost).solve()?;
    let value = plan.iter().zip(cost.iter()).map(|(p, c)| p * c).sum();
    Ok(OtSolution {
        value,
        plan,
        duals: None,
        iterations: pivots,
        converged: true,
        epsilon: 0.0,
        marginal_error: 0.0,
    })
}

struct TransportSimplex<'a> {
    n: usize,
    m: usize,
    cost: ArrayView2<'a, f64>,
    flow: Array2<f64>,
    basic: Array2<bool>,
    basis: Vec<(usize, usize)>,
    tol: f64,
}

impl<'a> TransportSimplex<'a> {
    fn new(alpha: ArrayView1<f64>, beta: ArrayView1<f64>, cost: ArrayView2<'a, f64>) -> Self {
        let (n, m) = cost.dim();
        let sa: f64 = alpha.sum();
        let sb: f64 = beta.sum();
        // Rescale the columns so both sides carry the same total mass.
        let mut supply: Vec<f64> = alpha.to_vec();
        let mut demand: Vec<f64> = beta.iter().map(|b| b * sa / sb).collect();

        let mut flow = Array2::zeros((n, m));
        let mut basic = Array2::from_elem((n, m), false);
        let mut basis = Vec::with_capacity(n + m - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let q = supply[i].min(demand[j]);
            flow[[i, j]] = q;
            basic[[i, j]] = true;
            basis.push((i, j));
            supply[i] -= q;
            demand[j] -= q;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 || supply[i] <= demand[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        let cmax = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        Self {
            n,
            m,
            cost,
            flow,
            basic,
            basis,
            tol: 1e-12 * cmax.max(1.0),
        }
    }

    /// Tree adjacency: nodes `0..n` are rows, `n..n+m` columns.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n + self.m];
        for &(i, j) in &self.basis {
            adj[i].push(self.n + j);
            adj[self.n + j].push(i);
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
        let (n, m) = (self.n, self.m);
        let mut u = vec![f64::NAN; n];
        let mut v = vec![f64::NAN; m];
        u[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &next in &adj[node] {
                if node < n {
                    let j = next - n;
                    if v[j].is_nan() {
                        v[j] = self.cost[[node, j]] - u[node];
                        queue.push_back(next);
                    }
                } else {
                    let i = next;
                    if u[i].is_nan() {
                        u[i] = self.cost[[i, node - n]] - v[node - n];
                        queue.push_back(next);
                    }
                }
            }
        }
        (u, v)
    }

    /// Path of tree edges (as cells) from row node `i` to column node `n + j`.
    fn tree_path(&self, adj: &[Vec<usize>], i: usize, j: usize) -> Vec<(usize, usize)> {
        let n = self.n;
        let total = n + self.m;
        let mut parent = vec![usize::MAX; total];
        parent[i] = i;
        let mut queue = VecDeque::from([i]);
        let target = n + j;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &next in &adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != i {
            let p = parent[node];
            let cell = if node < n {
                (node, p - n)
            } else {
                (p, node - n)
            };
            path.push(cell);
            node = p;
        }
        path.reverse();
        path
    }

    fn solve(mut self) -> Result<(Array2<f64>, usize)> {
        let max_pivots = 50 * (self.n + self.m) * (self.n + self.m) + 1000;
        let mut pivots = 0;
        let mut degenerate_run = 0;
        loop {
            let adj = self.adjacency();
            let (u, v) = self.potentials(&adj);
            let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
            let mut entering: Option<(usize, usize)> = None;
            let mut best = -self.tol;
            #[allow(clippy::needless_range_loop)]
            'scan: for i in 0..self.n {
                for j in 0..self.m {
                    if self.basic[[i, j]] {
                        continue;
                    }
                    let r = self.cost[[i, j]] - u[i] - v[j];
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
                break;
            };
            if pivots >= max_pivots {
                return Err(Error::PreconditionViolated(format!(
                    "transport simplex exceeded {max_pivots} pivots"
                )));
            }
            pivots += 1;

            // Along the tree path from row ei the cells alternate -, +, -, ...
            let path = self.tree_path(&adj, ei, ej);
            let mut theta = f64::INFINITY;
            let mut leaving = (usize::MAX, usize::MAX);
            for (k, &cell) in path.iter().enumerate() {
                if k % 2 == 0 {
                    let f = self.flow[cell];
                    if f < theta || (f == theta && cell < leaving) {
                        theta = f;
                        leaving = cell;
                    }
                }
            }
            if theta > 0.0 {
                degenerate_run = 0;
                for (k, &cell) in path.iter().enumerate() {
                    if k % 2 == 0 {
                        self.flow[cell] -= theta;
                    } else {
                        self.flow[cell] += theta;
                    }
                }
            } else {
                degenerate_run += 1;
            }
            self.flow[(ei, ej)] = theta;
            self.flow[leaving] = 0.0;
            self.basic[leaving] = false;
            self.basic[(ei, ej)] = true;
            let pos = self
                .basis
                .iter()
                .position(|&c| c == leaving)
                .expect("leaving cell is basic");
            self.basis[pos] = (ei, ej);
        }
        Ok((self.flow, pivots))
    }
}
