//! Optimal transport Markov distances.
//!
//! Every distance here is computed by sweeping cellwise OT over a cost
//! matrix: cell `(i, j)` of the next iterate is a transport cost between
//! the transition rows `m^X_i` and `m^Y_j` under the current iterate.
//!
//! | Function | Distance |
//! |----------|----------|
//! | [`wl_depth_k`] | depth-k WL (undiscounted recursion) |
//! | [`dwl_depth_k`] | depth-k discounted WL |
//! | [`dwl_infinity`] | discounted WL at infinite depth (unique fixed point) |
//! | [`dwl_depth_k_sparse`] | depth-k discounted WL on kernel supports only |
//! | [`wl_infinity`] | depth-infinity WL for irreducible aperiodic chains |
//! | [`otm_general_p`] | OTM distance for a finite-support horizon law |
//! | [`otc_estimate`] | small-discount sequence approximating OTC |
//!
//! With `epsilon > 0` every cell solve is entropic.

mod coupling;
mod engine;
mod horizon;
mod otc;
mod wl_infinity;

use ndarray::Array2;
use serde::Serialize;

use crate::chains::MarkovChain;
use crate::error::{Error, Result};
use crate::ot::{OtSolution, SinkhornOptions};

pub use coupling::{extract_optimal_coupling, CouplingPolicy};
pub use engine::{
    dwl_depth_k, dwl_depth_k_sparse, dwl_infinity, rate_bound, rate_bound_iterations, sweep,
    wl_depth_k, SweepOutput,
};
pub use horizon::{otm_general_p, truncated_geometric, HorizonDistribution};
pub use otc::{otc_estimate, OtcEntry, OtcEstimate, STATIONARITY_THRESHOLD};
pub use wl_infinity::{wl_infinity, WlInfinityResult};

/// Default fixed-point tolerance relative to `‖C‖∞`.
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Depth {
    Finite(usize),
    Infinite,
}

/// Starting matrix of the infinite-depth iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum Init {
    #[default]
    DeltaC,
    C,
    Zero,
}

impl std::str::FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deltaC" => Ok(Init::DeltaC),
            "C" => Ok(Init::C),
            "zero" => Ok(Init::Zero),
            other => Err(Error::Parse(format!("unknown init '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscountParams {
    pub delta: f64,
    pub epsilon: f64,
    pub depth: Depth,
    /// Fixed-point residual tolerance (∞-norm). `None` means
    /// `DEFAULT_RELATIVE_TOL * ‖C‖∞`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Sinkhorn iteration-cap growth per sweep; 0 disables scheduling.
    pub schedule: usize,
    pub init: Init,
    #[serde(skip)]
    pub sinkhorn: SinkhornOptions,
    /// Keep every iterate matrix in the result (diagnostics).
    pub record_iterates: bool,
}

impl Default for DiscountParams {
    fn default() -> Self {
        Self {
            delta: 0.5,
            epsilon: 0.0,
            depth: Depth::Infinite,
            tol: None,
            max_iter: 1_000_000,
            schedule: 0,
            init: Init::DeltaC,
            sinkhorn: SinkhornOptions::default(),
            record_iterates: false,
        }
    }
}

impl DiscountParams {
    pub fn infinite(delta: f64, epsilon: f64) -> Self {
        Self {
            delta,
            epsilon,
            ..Self::default()
        }
    }

    pub fn finite(delta: f64, epsilon: f64, depth: usize) -> Self {
        Self {
            delta,
            epsilon,
            depth: Depth::Finite(depth),
            ..Self::default()
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = Some(tol);
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_schedule(mut self, step: usize) -> Self {
        self.schedule = step;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_sinkhorn(mut self, opts: SinkhornOptions) -> Self {
        self.sinkhorn = opts;
        self
    }

    pub fn recording_iterates(mut self) -> Self {
        self.record_iterates = true;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in [0, 1], got {}",
                self.delta
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "tol must be positive, got {tol}"
                )));
            }
        }
        Ok(())
    }

    /// Effective fixed-point tolerance for a cost matrix.
    pub fn effective_tol(&self, cost: &Array2<f64>) -> f64 {
        self.tol
            .unwrap_or_else(|| DEFAULT_RELATIVE_TOL * sup_norm(cost).max(f64::MIN_POSITIVE))
    }
}

/// Result of a cellwise recursion.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointResult {
    /// The final cost matrix (depth-k iterate or fixed-point approximation).
    pub cost_final: Array2<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Last ∞-norm step between iterates.
    pub residual: f64,
    pub residual_trace: Vec<f64>,
    /// Row-major `n x m` grid of the last sweep's cell solutions; empty when
    /// no sweep ran or for the sparse path.
    #[serde(skip)]
    pub cell_solutions: Vec<OtSolution>,
    /// The matrix the stored cell solutions were computed on.
    #[serde(skip)]
    pub cost_input: Array2<f64>,
    #[serde(skip)]
    pub final_ot: OtSolution,
    pub converged: bool,
    pub params: DiscountParams,
    /// Total number of cost entries touched by cell solves.
    pub cell_work: u64,
    /// Iterates `C^(0), C^(1), ...` when `record_iterates` was set.
    #[serde(skip)]
    pub iterates: Vec<Array2<f64>>,
}

impl FixedPointResult {
    pub fn shape(&self) -> (usize, usize) {
        self.cost_final.dim()
    }

    pub fn cell(&self, i: usize, j: usize) -> &OtSolution {
        let m = self.cost_final.ncols();
        &self.cell_solutions[i * m + j]
    }

    /// Turns a non-converged result into [`Error::NotConverged`].
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.residual,
                partial: Some(Box::new(self)),
            })
        }
    }
}

pub fn sup_norm(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

pub(crate) fn check_shapes(x: &MarkovChain, y: &MarkovChain, cost: &Array2<f64>) -> Result<()> {
    if cost.dim() != (x.n_states(), y.n_states()) {
        return Err(Error::DimensionMismatch(format!(
            "cost is {:?}, chains have {} and {} states",
            cost.dim(),
            x.n_states(),
            y.n_states()
        )));
    }
    for ((i, j), &c) in cost.indexed_iter() {
        if !c.is_finite() {
            return Err(Error::NonFiniteCost(i, j));
        }
    }
    Ok(())
}
