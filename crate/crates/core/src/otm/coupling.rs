use ndarray::{Array1, Array2, Axis};
use serde::Serialize;

use super::FixedPointResult;
use crate::chains::MarkovChain;
use crate::error::{Error, Result};

/// Marginal tolerance for coupling plans.
pub const COUPLING_TOLERANCE: f64 = 1e-6;

/// Time-homogeneous joint chain on `X x Y`, states flattened as `i * m + j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingPolicy {
    pub n: usize,
    pub m: usize,
    pub joint_kernel: Array2<f64>,
    pub joint_initial: Array1<f64>,
}

impl CouplingPolicy {
    /// Largest marginal violation over all joint rows and the initial plan.
    pub fn max_marginal_violation(&self, x: &MarkovChain, y: &MarkovChain) -> f64 {
        let (n, m) = (self.n, self.m);
        let check = |flat: ndarray::ArrayView1<f64>,
                     a: ndarray::ArrayView1<f64>,
                     b: ndarray::ArrayView1<f64>| {
            let block = flat
                .to_owned()
                .into_shape_with_order((n, m))
                .expect("n*m entries");
            let rows = (&block.sum_axis(Axis(1)) - &a).mapv(f64::abs).sum();
            let cols = (&block.sum_axis(Axis(0)) - &b).mapv(f64::abs).sum();
            rows.max(cols)
        };
        let mut worst = check(
            self.joint_initial.view(),
            x.initial().view(),
            y.initial().view(),
        );
        for i in 0..n {
            for j in 0..m {
                let row = self.joint_kernel.row(i * m + j);
                worst = worst.max(check(row, x.kernel().row(i), y.kernel().row(j)));
            }
        }
        worst
    }
}

/// Assembles the optimal time-homogeneous coupling from a converged
/// infinite-depth result: joint row `(i, j)` is the cell plan `P_ij`, and the
/// joint initial law is the final `(ν^X, ν^Y)` plan.
pub fn extract_optimal_coupling(
    result: &FixedPointResult,
    x: &MarkovChain,
    y: &MarkovChain,
) -> Result<CouplingPolicy> {
    if !result.converged {
        return Err(Error::NotConverged {
            iterations: result.iterations,
            residual: result.residual,
            partial: None,
        });
    }
    let (n, m) = (x.n_states(), y.n_states());
    if result.shape() != (n, m) || result.cell_solutions.len() != n * m {
        return Err(Error::InvalidPolicy(
            "result carries no dense cell plans for these chains".into(),
        ));
    }
    let mut joint_kernel = Array2::zeros((n * m, n * m));
    for (idx, sol) in result.cell_solutions.iter().enumerate() {
        let flat = sol.plan.iter().copied();
        joint_kernel
            .row_mut(idx)
            .iter_mut()
            .zip(flat)
            .for_each(|(dst, v)| *dst = v);
    }
    let joint_initial = Array1::from_iter(result.final_ot.plan.iter().copied());
    let policy = CouplingPolicy {
        n,
        m,
        joint_kernel,
        joint_initial,
    };
    let violation = policy.max_marginal_violation(x, y);
    if violation > COUPLING_TOLERANCE {
        return Err(Error::InvalidPolicy(format!(
            "plan marginals violated by {violation:.3e}; decrease tolerance or epsilon"
        )));
    }
    Ok(policy)
}
