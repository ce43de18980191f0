use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::{solve, DualPair, OtSolution, SinkhornOptions};
use crate::error::{Error, Result};

/// An OT solution on `rows x cols`, with the maps back to full indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedSolution {
    pub solution: OtSolution,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl RestrictedSolution {
    /// The plan scattered back into an `n x m` matrix.
    pub fn dense_plan(&self, n: usize, m: usize) -> Array2<f64> {
        let mut plan = Array2::zeros((n, m));
        for (r, &i) in self.rows.iter().enumerate() {
            for (c, &j) in self.cols.iter().enumerate() {
                plan[[i, j]] = self.solution.plan[[r, c]];
            }
        }
        plan
    }
}

/// Solves OT restricted to `support_rows x support_cols`.
///
/// Transport never uses a row or column without mass, so when the supports
/// contain all of the mass the value equals the unrestricted one.
#[allow(clippy::too_many_arguments)]
pub fn solve_restricted(
    alpha: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    cost: ArrayView2<f64>,
    support_rows: &[usize],
    support_cols: &[usize],
    epsilon: f64,
    opts: &SinkhornOptions,
    warm: Option<&DualPair>,
) -> Result<RestrictedSolution> {
    let (n, m) = cost.dim();
    if alpha.len() != n || beta.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "cost is {n}x{m}, marginals have lengths {} and {}",
            alpha.len(),
            beta.len()
        )));
    }
    if support_rows.iter().any(|&i| i >= n) || support_cols.iter().any(|&j| j >= m) {
        return Err(Error::DimensionMismatch(
            "support index out of range".into(),
        ));
    }
    let mut in_rows = vec![false; n];
    support_rows.iter().for_each(|&i| in_rows[i] = true);
    let mut in_cols = vec![false; m];
    support_cols.iter().for_each(|&j| in_cols[j] = true);
    if let Some(i) = (0..n).find(|&i| alpha[i] > 0.0 && !in_rows[i]) {
        return Err(Error::SupportViolation(i));
    }
    if let Some(j) = (0..m).find(|&j| beta[j] > 0.0 && !in_cols[j]) {
        return Err(Error::SupportViolation(j));
    }

    let sub_alpha = Array1::from_iter(support_rows.iter().map(|&i| alpha[i]));
    let sub_beta = Array1::from_iter(support_cols.iter().map(|&j| beta[j]));
    let sub_cost = Array2::from_shape_fn((support_rows.len(), support_cols.len()), |(r, c)| {
        cost[[support_rows[r], support_cols[c]]]
    });
    let solution = solve(
        sub_alpha.view(),
        sub_beta.view(),
        sub_cost.view(),
        epsilon,
        opts,
        warm,
    )?;
    Ok(RestrictedSolution {
        solution,
        rows: support_rows.to_vec(),
        cols: support_cols.to_vec(),
    })
}
