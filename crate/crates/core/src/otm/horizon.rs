use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::engine::sweep;
use super::{check_shapes, sup_norm, DiscountParams, FixedPointResult};
use crate::chains::MarkovChain;
use crate::error::{Error, Result};
use crate::ot::{self, SinkhornOptions};

/// A horizon law with finite support `{0, ..., K}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HorizonDistribution {
    probs: Vec<f64>,
}

impl HorizonDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidHorizon("empty probability list".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidHorizon(format!("invalid mass {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidHorizon(format!("masses sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Point mass at `k`.
    pub fn dirac(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest horizon `K` carried by the list.
    pub fn max_horizon(&self) -> usize {
        self.probs.len() - 1
    }
}

impl TryFrom<Vec<f64>> for HorizonDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<HorizonDistribution> for Vec<f64> {
    fn from(h: HorizonDistribution) -> Self {
        h.probs
    }
}

/// Law of `min(T, k)` for `T` geometric with parameter `delta`:
/// `δ(1-δ)^t` for `t < k` and `(1-δ)^k` at `t = k`.
pub fn truncated_geometric(delta: f64, k: usize) -> Result<HorizonDistribution> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in [0, 1], got {delta}"
        )));
    }
    let mut probs = Vec::with_capacity(k + 1);
    let mut survive = 1.0;
    for _ in 0..k {
        probs.push(delta * survive);
        survive *= 1.0 - delta;
    }
    probs.push(survive);
    HorizonDistribution::new(probs)
}

/// OTM distance for a finite-support horizon law, by backward induction:
/// `V_K = p(K) C`, `V_t = p(t) C + OT_cells(V_{t+1})`, value `OT(ν^X, ν^Y; V_0)`.
pub fn otm_general_p(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    p: &HorizonDistribution,
    epsilon: f64,
) -> Result<FixedPointResult> {
    check_shapes(x, y, cost)?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    let opts = SinkhornOptions::default();
    let probs = p.probs();
    let horizon = p.max_horizon();
    let mut value_to_go = cost * probs[horizon];
    let mut cost_input = value_to_go.clone();
    let mut cells = Vec::new();
    let mut trace = Vec::with_capacity(horizon);
    let mut converged = true;
    let mut work = 0;
    for t in (0..horizon).rev() {
        let out = sweep(x, y, cost, &value_to_go, probs[t], 1.0, epsilon, &opts)?;
        trace.push(sup_norm(&(&out.next - &value_to_go)));
        converged &= out.all_converged;
        work += out.work;
        cost_input = std::mem::replace(&mut value_to_go, out.next);
        cells = out.solutions;
    }
    let final_ot = ot::solve(
        x.initial().view(),
        y.initial().view(),
        value_to_go.view(),
        epsilon,
        &opts,
        None,
    )?;
    converged &= final_ot.converged;
    Ok(FixedPointResult {
        value: final_ot.value,
        cost_final: value_to_go,
        iterations: horizon,
        residual: trace.last().copied().unwrap_or(0.0),
        residual_trace: trace,
        cell_solutions: cells,
        cost_input,
        final_ot,
        converged,
        params: DiscountParams {
            epsilon,
            depth: super::Depth::Finite(horizon),
            ..DiscountParams::default()
        },
        cell_work: work,
        iterates: Vec::new(),
    })
}
