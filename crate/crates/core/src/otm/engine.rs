//! Cellwise sweeps and the discounted WL drivers built on them.
//!
//! One sweep maps a matrix `M` to
//! `next[i, j] = w_base * C[i, j] + w_ot * OT(m^X_i, m^Y_j; M)`.
//! Cells are independent and solved in parallel; results are collected in
//! row-major order so the output does not depend on scheduling.

use ndarray::Array2;
use rayon::prelude::*;

use super::{check_shapes, sup_norm, Depth, DiscountParams, FixedPointResult, Init};
use crate::chains::MarkovChain;
use crate::error::{Error, Result};
use crate::ot::{self, OtSolution, SinkhornOptions};

pub struct SweepOutput {
    pub next: Array2<f64>,
    /// Row-major cell solutions (restricted coordinates on the sparse path).
    pub solutions: Vec<OtSolution>,
    pub all_converged: bool,
    /// Number of cost entries handed to the cell solvers.
    pub work: u64,
}

enum Layout {
    Dense,
    Sparse {
        rows: Vec<Vec<usize>>,
        cols: Vec<Vec<usize>>,
    },
}

impl Layout {
    fn sparse(x: &MarkovChain, y: &MarkovChain) -> Self {
        Layout::Sparse {
            rows: (0..x.n_states()).map(|i| x.support(i)).collect(),
            cols: (0..y.n_states()).map(|j| y.support(j)).collect(),
        }
    }
}

struct CellProblem<'a> {
    x: &'a MarkovChain,
    y: &'a MarkovChain,
    base: &'a Array2<f64>,
    base_weight: f64,
    ot_weight: f64,
    epsilon: f64,
    opts: SinkhornOptions,
    layout: &'a Layout,
}

impl CellProblem<'_> {
    fn run(&self, current: &Array2<f64>, warm: Option<&[OtSolution]>) -> Result<SweepOutput> {
        let (n, m) = current.dim();
        let solved: Vec<(OtSolution, u64)> = (0..n * m)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / m, idx % m);
                let warm = warm.and_then(|w| w.get(idx)).and_then(|s| s.duals.as_ref());
                let alpha = self.x.kernel().row(i);
                let beta = self.y.kernel().row(j);
                match self.layout {
                    Layout::Dense => {
                        let sol =
                            ot::solve(alpha, beta, current.view(), self.epsilon, &self.opts, warm)?;
                        Ok((sol, (n * m) as u64))
                    }
                    Layout::Sparse { rows, cols } => {
                        let r = ot::solve_restricted(
                            alpha,
                            beta,
                            current.view(),
                            &rows[i],
                            &cols[j],
                            self.epsilon,
                            &self.opts,
                            warm,
                        )?;
                        let work = (rows[i].len() * cols[j].len()) as u64;
                        Ok((r.solution, work))
                    }
                }
            })
            .collect::<Result<_>>()?;

        let mut next = Array2::zeros((n, m));
        let mut all_converged = true;
        let mut work = 0;
        let mut solutions = Vec::with_capacity(n * m);
        for (idx, (sol, w)) in solved.into_iter().enumerate() {
            let (i, j) = (idx / m, idx % m);
            next[[i, j]] = self.base_weight * self.base[[i, j]] + self.ot_weight * sol.value;
            all_converged &= sol.converged;
            work += w;
            solutions.push(sol);
        }
        Ok(SweepOutput {
            next,
            solutions,
            all_converged,
            work,
        })
    }
}

/// One dense sweep: `next = base_weight * base + ot_weight * OT_cells(current)`.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    x: &MarkovChain,
    y: &MarkovChain,
    base: &Array2<f64>,
    current: &Array2<f64>,
    base_weight: f64,
    ot_weight: f64,
    epsilon: f64,
    opts: &SinkhornOptions,
) -> Result<SweepOutput> {
    check_shapes(x, y, base)?;
    check_shapes(x, y, current)?;
    CellProblem {
        x,
        y,
        base,
        base_weight,
        ot_weight,
        epsilon,
        opts: *opts,
        layout: &Layout::Dense,
    }
    .run(current, None)
}

/// `2 (1 - δ)^k / δ · ‖C‖∞`, the distance of the k-th iterate to the fixed point.
pub fn rate_bound(delta: f64, k: usize, cost_norm: f64) -> f64 {
    2.0 * (1.0 - delta).powi(k as i32) / delta * cost_norm
}

/// Smallest `k` with `rate_bound(delta, k, cost_norm) <= tol`.
pub fn rate_bound_iterations(delta: f64, tol: f64, cost_norm: f64) -> usize {
    if cost_norm == 0.0 || delta >= 1.0 {
        return 1;
    }
    let k = (tol * delta / (2.0 * cost_norm)).ln() / (1.0 - delta).ln();
    (k.ceil().max(1.0)) as usize
}

fn final_solve(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    params: &DiscountParams,
) -> Result<OtSolution> {
    ot::solve(
        x.initial().view(),
        y.initial().view(),
        cost.view(),
        params.epsilon,
        &params.sinkhorn,
        None,
    )
}

fn run_finite(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    params: &DiscountParams,
    layout: Layout,
) -> Result<FixedPointResult> {
    params.validate()?;
    check_shapes(x, y, cost)?;
    let Depth::Finite(depth) = params.depth else {
        return Err(Error::InvalidParameter("finite depth required".into()));
    };
    let problem = CellProblem {
        x,
        y,
        base: cost,
        base_weight: params.delta,
        ot_weight: 1.0 - params.delta,
        epsilon: params.epsilon,
        opts: params.sinkhorn,
        layout: &layout,
    };
    let mut current = cost.clone();
    let mut cost_input = cost.clone();
    let mut iterates = Vec::new();
    if params.record_iterates {
        iterates.push(current.clone());
    }
    let mut trace = Vec::with_capacity(depth);
    let mut cells: Vec<OtSolution> = Vec::new();
    let mut converged = true;
    let mut work = 0;
    for _ in 0..depth {
        let out = problem.run(&current, (!cells.is_empty()).then_some(cells.as_slice()))?;
        trace.push(sup_norm(&(&out.next - &current)));
        converged &= out.all_converged;
        work += out.work;
        cost_input = std::mem::replace(&mut current, out.next);
        cells = out.solutions;
        if params.record_iterates {
            iterates.push(current.clone());
        }
    }
    let final_ot = final_solve(x, y, &current, params)?;
    converged &= final_ot.converged;
    if matches!(layout, Layout::Sparse { .. }) {
        cells.clear();
    }
    Ok(FixedPointResult {
        value: final_ot.value,
        cost_final: current,
        iterations: depth,
        residual: trace.last().copied().unwrap_or(0.0),
        residual_trace: trace,
        cell_solutions: cells,
        cost_input,
        final_ot,
        converged,
        params: *params,
        cell_work: work,
        iterates,
    })
}

/// Depth-k WL distance: `k` undiscounted sweeps, then OT between the
/// initial distributions. Exact OT when `epsilon == 0`.
pub fn wl_depth_k(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    k: usize,
    epsilon: f64,
) -> Result<FixedPointResult> {
    dwl_depth_k(x, y, cost, &DiscountParams::finite(0.0, epsilon, k))
}

/// Depth-k discounted WL distance, starting from `C^(0) = C`.
pub fn dwl_depth_k(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    params: &DiscountParams,
) -> Result<FixedPointResult> {
    run_finite(x, y, cost, params, Layout::Dense)
}

/// Depth-k discounted WL with each cell restricted to
/// `supp m^X_i x supp m^Y_j`. Forward value only: no cell cache is kept.
pub fn dwl_depth_k_sparse(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    params: &DiscountParams,
) -> Result<FixedPointResult> {
    run_finite(x, y, cost, params, Layout::sparse(x, y))
}

/// Depth-infinity discounted WL distance (`delta > 0`).
///
/// Iterates from `params.init` until the ∞-norm step is at most the
/// tolerance, or until the analytic rate bound certifies it, then re-solves
/// every cell at full Sinkhorn tolerance and keeps the plans and duals.
/// Non-convergence is returned as [`Error::NotConverged`] carrying the
/// partial result.
pub fn dwl_infinity(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    params: &DiscountParams,
) -> Result<FixedPointResult> {
    params.validate()?;
    check_shapes(x, y, cost)?;
    if params.delta <= 0.0 {
        return Err(Error::InvalidParameter(
            "dwl_infinity requires delta > 0; use wl_infinity for the undiscounted limit".into(),
        ));
    }
    let delta = params.delta;
    let cost_norm = sup_norm(cost);
    let tol = params.effective_tol(cost);
    let certified_after = rate_bound_iterations(delta, tol, cost_norm);
    let layout = Layout::Dense;
    let mut problem = CellProblem {
        x,
        y,
        base: cost,
        base_weight: delta,
        ot_weight: 1.0 - delta,
        epsilon: params.epsilon,
        opts: params.sinkhorn,
        layout: &layout,
    };
    let scheduled = params.schedule > 0 && params.epsilon > 0.0;
    let mut cap = if scheduled {
        1
    } else {
        params.sinkhorn.max_iter
    };

    let mut current = match params.init {
        Init::DeltaC => cost * delta,
        Init::C => cost.clone(),
        Init::Zero => Array2::zeros(cost.dim()),
    };
    let mut iterates = Vec::new();
    if params.record_iterates {
        iterates.push(current.clone());
    }
    let mut trace = Vec::new();
    let mut cells: Vec<OtSolution> = Vec::new();
    let mut work = 0;
    let mut iterations = 0;
    let mut loop_converged = false;
    while iterations < params.max_iter {
        problem.opts = params.sinkhorn.capped(cap);
        let out = problem.run(&current, (!cells.is_empty()).then_some(cells.as_slice()))?;
        let residual = sup_norm(&(&out.next - &current));
        trace.push(residual);
        iterations += 1;
        work += out.work;
        current = out.next;
        cells = out.solutions;
        if params.record_iterates {
            iterates.push(current.clone());
        }
        if out.all_converged && (residual <= tol || iterations >= certified_after) {
            loop_converged = true;
            break;
        }
        if scheduled && !out.all_converged {
            cap = (cap + params.schedule).min(params.sinkhorn.max_iter);
        }
    }

    // Final sweep at full tolerance: these plans and duals feed the gradient.
    problem.opts = params.sinkhorn;
    let out = problem.run(&current, (!cells.is_empty()).then_some(cells.as_slice()))?;
    let residual = sup_norm(&(&out.next - &current));
    work += out.work;
    let cost_input = std::mem::replace(&mut current, out.next);
    if params.record_iterates {
        iterates.push(current.clone());
    }
    let final_ot = final_solve(x, y, &current, params)?;
    let converged = loop_converged && out.all_converged && final_ot.converged;
    log::debug!(
        "dwl_infinity: delta={delta} eps={} iterations={iterations} residual={residual:.3e}",
        params.epsilon
    );
    FixedPointResult {
        value: final_ot.value,
        cost_final: current,
        iterations,
        residual,
        residual_trace: trace,
        cell_solutions: out.solutions,
        cost_input,
        final_ot,
        converged,
        params: *params,
        cell_work: work,
        iterates,
    }
    .ensure_converged()
}
