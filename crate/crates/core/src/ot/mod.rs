//! Discrete optimal transport between two probability vectors.
//!
//! Two solvers share one result type: [`exact_ot`] (a transportation simplex
//! with deterministic pivoting) and [`sinkhorn`] (log-domain entropic OT).
//! The entropic objective is `<P, C> - ε H(P)` with `H(P) = -Σ P log P`.
//!
//! Entropic duals are reported in the gauge where they are the partial
//! derivatives of the value with respect to the marginals, shifted so that
//! `f` has mean zero over the active (positive-mass) rows.

mod exact;
mod restricted;
mod sinkhorn;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};

pub use exact::exact_ot;
pub use restricted::{solve_restricted, RestrictedSolution};
pub use sinkhorn::{sinkhorn, sinkhorn_warm, SinkhornOptions};

/// Tolerance on the total mass of a marginal.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Gauge {
    /// `mean(f) = 0` over active rows; `g` absorbs the constant.
    MeanZeroF,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPair {
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub gauge: Gauge,
    /// `true` for rows with positive mass; inactive duals are reported as 0.
    pub row_active: Vec<bool>,
    pub col_active: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OtSolution {
    pub value: f64,
    pub plan: Array2<f64>,
    pub duals: Option<DualPair>,
    pub iterations: usize,
    pub converged: bool,
    pub epsilon: f64,
    /// L1 violation of the row marginal (columns are matched exactly by the
    /// last Sinkhorn half-step; both are ~0 on the exact path).
    pub marginal_error: f64,
}

impl OtSolution {
    pub fn is_entropic(&self) -> bool {
        self.epsilon > 0.0
    }

    /// Entropy `-Σ P log P` of the plan.
    pub fn plan_entropy(&self) -> f64 {
        entropy(&self.plan.view())
    }

    /// Largest L1 violation of either marginal.
    pub fn max_marginal_violation(&self, alpha: ArrayView1<f64>, beta: ArrayView1<f64>) -> f64 {
        let rows = (&self.plan.sum_axis(ndarray::Axis(1)) - &alpha)
            .mapv(f64::abs)
            .sum();
        let cols = (&self.plan.sum_axis(ndarray::Axis(0)) - &beta)
            .mapv(f64::abs)
            .sum();
        rows.max(cols)
    }
}

pub(crate) fn entropy(plan: &ArrayView2<f64>) -> f64 {
    -plan
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Solves entropic OT when `epsilon > 0`, exact OT when `epsilon == 0`.
pub fn solve(
    alpha: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    cost: ArrayView2<f64>,
    epsilon: f64,
    opts: &SinkhornOptions,
    warm: Option<&DualPair>,
) -> Result<OtSolution> {
    if epsilon == 0.0 {
        exact_ot(alpha, beta, cost)
    } else {
        sinkhorn_warm(alpha, beta, cost, epsilon, opts, warm)
    }
}

pub(crate) fn check_inputs(
    alpha: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    cost: ArrayView2<f64>,
) -> Result<()> {
    if cost.nrows() != alpha.len() || cost.ncols() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "cost is {}x{}, marginals have lengths {} and {}",
            cost.nrows(),
            cost.ncols(),
            alpha.len(),
            beta.len()
        )));
    }
    if alpha.is_empty() || beta.is_empty() {
        return Err(Error::DimensionMismatch("empty marginal".into()));
    }
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if let Some((i, &x)) = v.iter().enumerate().find(|(_, &x)| !(x >= 0.0)) {
            return Err(Error::NegativeEntry {
                location: format!("{name}[{i}]"),
                value: x,
            });
        }
        let s = v.sum();
        if (s - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::MarginalNotNormalized(s));
        }
    }
    for ((i, j), &c) in cost.indexed_iter() {
        if !c.is_finite() {
            return Err(Error::NonFiniteCost(i, j));
        }
    }
    Ok(())
}
