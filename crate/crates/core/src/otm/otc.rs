use ndarray::Array2;
use serde::Serialize;

use super::{dwl_infinity, DiscountParams};
use crate::chains::MarkovChain;
use crate::error::{Error, Result};

/// Largest accepted L1 balance residual `‖νᵀK − νᵀ‖₁` for a chain to count
/// as stationary.
pub const STATIONARITY_THRESHOLD: f64 = 1e-8;

/// Smallest discount accepted in a schedule.
pub const MIN_DELTA: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct OtcEntry {
    pub delta: f64,
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OtcEstimate {
    pub entries: Vec<OtcEntry>,
    /// Value at the smallest discount.
    pub estimate: f64,
    /// Values never decrease as the discount shrinks (up to 1e-9).
    pub nondecreasing: bool,
}

/// Discounted distances along a decreasing discount schedule; the value at
/// the smallest discount is the OTC estimate. No extrapolation is applied.
///
/// `base` supplies tolerance, iteration caps and initialization; its
/// `delta` and `epsilon` are overridden.
pub fn otc_estimate(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    schedule: &[f64],
    epsilon: f64,
    base: &DiscountParams,
) -> Result<OtcEstimate> {
    for chain in [x, y] {
        let residual = chain.balance_residual();
        if residual > STATIONARITY_THRESHOLD {
            return Err(Error::NotStationary(residual));
        }
    }
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("empty discount schedule".into()));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "discount schedule must be strictly decreasing".into(),
        ));
    }
    if let Some(bad) = schedule.iter().find(|&&d| !(MIN_DELTA..=1.0).contains(&d)) {
        return Err(Error::InvalidParameter(format!(
            "discount {bad} outside [{MIN_DELTA}, 1]"
        )));
    }

    let mut entries = Vec::with_capacity(schedule.len());
    for &delta in schedule {
        let params = DiscountParams {
            delta,
            epsilon,
            ..*base
        };
        let entry = match dwl_infinity(x, y, cost, &params) {
            Ok(r) => OtcEntry {
                delta,
                value: r.value,
                iterations: r.iterations,
                residual: r.residual,
                converged: true,
            },
            Err(Error::NotConverged {
                partial: Some(r), ..
            }) => OtcEntry {
                delta,
                value: r.value,
                iterations: r.iterations,
                residual: r.residual,
                converged: false,
            },
            Err(e) => return Err(e),
        };
        entries.push(entry);
    }
    let nondecreasing = entries.windows(2).all(|w| w[1].value >= w[0].value - 1e-9);
    Ok(OtcEstimate {
        estimate: entries.last().map(|e| e.value).unwrap_or(0.0),
        entries,
        nondecreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_stationary() {
        let x = MarkovChain::new(array![[0.9, 0.1], [0.5, 0.5]], array![0.5, 0.5], None).unwrap();
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        let err = otc_estimate(&x, &x, &c, &[0.5], 0.0, &DiscountParams::default());
        assert!(matches!(err, Err(Error::NotStationary(_))));
    }

    #[test]
    fn rejects_bad_schedules() {
        let x = MarkovChain::new(array![[0.5, 0.5], [0.5, 0.5]], array![0.5, 0.5], None).unwrap();
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        let p = DiscountParams::default();
        assert!(otc_estimate(&x, &x, &c, &[0.1, 0.2], 0.0, &p).is_err());
        assert!(otc_estimate(&x, &x, &c, &[0.1, 1e-5], 0.0, &p).is_err());
        assert!(otc_estimate(&x, &x, &c, &[], 0.0, &p).is_err());
    }

    #[test]
    fn two_cycle_values_are_constant_in_delta() {
        // C* = [[0, 1], [1, 0]] for every delta; OT of uniform marginals is 0.
        let x = MarkovChain::new(array![[0.0, 1.0], [1.0, 0.0]], array![0.5, 0.5], None).unwrap();
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        let est = otc_estimate(
            &x,
            &x,
            &c,
            &[0.5, 0.1, 0.01],
            0.0,
            &DiscountParams::default(),
        )
        .unwrap();
        for e in &est.entries {
            assert!(e.value.abs() < 1e-9);
        }
        assert!(est.nondecreasing);
    }

    #[test]
    fn single_state() {
        let x = MarkovChain::new(array![[1.0]], array![1.0], None).unwrap();
        let est = otc_estimate(
            &x,
            &x,
            &array![[0.25]],
            &[0.5, 0.01],
            0.0,
            &DiscountParams::default().with_tol(1e-13),
        )
        .unwrap();
        assert!(est.entries.iter().all(|e| (e.value - 0.25).abs() < 1e-9));
    }
}
