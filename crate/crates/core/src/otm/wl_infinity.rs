use ndarray::Array2;
use serde::Serialize;

use super::check_shapes;
use super::engine::sweep;
use crate::chains::{structure_check, MarkovChain};
use crate::error::{Error, Result};
use crate::ot::SinkhornOptions;

/// Slack allowed when checking envelope monotonicity in floating point.
const ENVELOPE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct WlInfinityResult {
    /// Mean of the final (near-constant) matrix.
    pub value: f64,
    /// `max - min` of the final matrix.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `min C^(k)` for k = 0, 1, ...
    pub min_trace: Vec<f64>,
    /// `max C^(k)` for k = 0, 1, ...
    pub max_trace: Vec<f64>,
    /// True when every step kept `min` nondecreasing and `max` nonincreasing.
    pub envelopes_monotone: bool,
}

/// Depth-infinity WL distance for irreducible aperiodic chains.
///
/// Runs the undiscounted recursion with exact OT until the iterate is
/// constant to within `tol`; the common value does not depend on the initial
/// distributions.
pub fn wl_infinity(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<WlInfinityResult> {
    check_shapes(x, y, cost)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    for (name, chain) in [("X", x), ("Y", y)] {
        let report = structure_check(chain);
        if !report.wl_infinity_eligible() {
            return Err(Error::PreconditionViolated(format!(
                "chain {name} must be irreducible and aperiodic (irreducible={}, aperiodic={})",
                report.irreducible, report.aperiodic
            )));
        }
    }
    let extent = |c: &Array2<f64>| {
        c.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    };
    let opts = SinkhornOptions::default();
    let mut current = cost.clone();
    let (lo, hi) = extent(&current);
    let mut min_trace = vec![lo];
    let mut max_trace = vec![hi];
    let mut monotone = true;
    let mut iterations = 0;
    let scale = hi.abs().max(lo.abs()).max(1.0);
    while max_trace[iterations] - min_trace[iterations] > tol && iterations < max_iter {
        current = sweep(x, y, cost, &current, 0.0, 1.0, 0.0, &opts)?.next;
        iterations += 1;
        let (lo, hi) = extent(&current);
        monotone &= lo >= min_trace[iterations - 1] - ENVELOPE_SLACK * scale;
        monotone &= hi <= max_trace[iterations - 1] + ENVELOPE_SLACK * scale;
        min_trace.push(lo);
        max_trace.push(hi);
    }
    debug_assert!(monotone, "WL envelopes must be monotone");
    let gap = max_trace[iterations] - min_trace[iterations];
    let result = WlInfinityResult {
        value: current.mean().unwrap_or(0.0),
        gap,
        iterations,
        converged: gap <= tol,
        min_trace,
        max_trace,
        envelopes_monotone: monotone,
    };
    if !result.converged {
        return Err(Error::NotConverged {
            iterations,
            residual: gap,
            partial: None,
        });
    }
    Ok(result)
}
