//! Slow, independent oracles and stochastic cross-checks.

use ndarray::Array2;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chains::MarkovChain;
use crate::error::{Error, Result};
use crate::ot::{self, SinkhornOptions};
use crate::otm::{
    check_shapes, otm_general_p, wl_depth_k, CouplingPolicy, Depth, DiscountParams,
    HorizonDistribution,
};

/// Paths per RNG stream.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_paths)`.
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub horizon: usize,
    /// Bound on `|E[estimator] - discounted cost|` from truncation.
    pub truncation_bias: f64,
}

impl McEstimate {
    /// `|target - mean|` in standard errors (0 when both are equal).
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (target - self.mean).abs();
        if gap <= self.truncation_bias {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            (gap - self.truncation_bias) / self.std_error
        }
    }
}

/// Smallest `h` with `(1-δ)^h · spread <= target`.
pub fn truncation_horizon(delta: f64, spread: f64, target: f64) -> usize {
    if spread <= target || delta >= 1.0 {
        return 0;
    }
    ((target / spread).ln() / (1.0 - delta).ln()).ceil() as usize
}

/// Simulates the joint chain of `policy` and averages the cost at the
/// horizon `min(T, h)` with `T` geometric(`delta`):
/// `Σ_{t<h} δ(1-δ)^t C(X_t, Y_t) + (1-δ)^h C(X_h, Y_h)`.
///
/// Paths are split into fixed chunks, each with its own ChaCha8 stream of
/// `seed`, and reduced in chunk order, so the result depends only on the
/// arguments.
pub fn simulate_discounted_cost(
    policy: &CouplingPolicy,
    cost: &Array2<f64>,
    delta: f64,
    horizon: usize,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    let (n, m) = (policy.n, policy.m);
    if cost.dim() != (n, m) {
        return Err(Error::DimensionMismatch(format!(
            "cost is {:?}, policy is over {n} x {m} states",
            cost.dim()
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be positive".into()));
    }
    let sampler = |w: ndarray::ArrayView1<f64>, what: String| -> Result<WeightedIndex<f64>> {
        let total: f64 = w.sum();
        if (total - 1.0).abs() > 1e-6 || w.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidPolicy(format!("{what} sums to {total}")));
        }
        WeightedIndex::new(w.iter().copied()).map_err(|e| Error::InvalidPolicy(e.to_string()))
    };
    let start = sampler(policy.joint_initial.view(), "joint initial".into())?;
    let rows = policy
        .joint_kernel
        .rows()
        .into_iter()
        .enumerate()
        .map(|(s, row)| sampler(row, format!("joint row {s}")))
        .collect::<Result<Vec<_>>>()?;

    let flat_cost: Vec<f64> = cost.iter().copied().collect();
    let weights: Vec<f64> = (0..horizon)
        .map(|t| delta * (1.0 - delta).powi(t as i32))
        .collect();
    let tail = (1.0 - delta).powi(horizon as i32);

    let n_chunks = n_paths.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = CHUNK.min(n_paths - chunk * CHUNK);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..count {
                let mut state = start.sample(&mut rng);
                let mut total = 0.0;
                for &w in &weights {
                    total += w * flat_cost[state];
                    state = rows[state].sample(&mut rng);
                }
                total += tail * flat_cost[state];
                sum += total;
                sum_sq += total * total;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), &(s, q)| (a + s, b + q));
    let count = n_paths as f64;
    let mean = sum / count;
    let var = if n_paths > 1 {
        ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0)
    } else {
        0.0
    };
    let (lo, hi) = cost
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &c| {
            (l.min(c), h.max(c))
        });
    Ok(McEstimate {
        mean,
        std_error: (var / count).sqrt(),
        n_paths,
        seed,
        horizon,
        truncation_bias: tail * (hi - lo),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LowerBoundCheck {
    /// OTM distance for `p`.
    pub lhs: f64,
    /// `Σ_t p(t) · wl_depth_k(t)`.
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the OTM distance for `p` with the `p`-average of depth-t WL
/// distances (exact OT throughout).
pub fn lower_bound_check(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    p: &HorizonDistribution,
) -> Result<LowerBoundCheck> {
    let lhs = otm_general_p(x, y, cost, p, 0.0)?.value;
    let mut rhs = 0.0;
    for (t, &pt) in p.probs().iter().enumerate() {
        if pt > 0.0 {
            rhs += pt * wl_depth_k(x, y, cost, t, 0.0)?.value;
        }
    }
    Ok(LowerBoundCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-9,
    })
}

/// The plain finite-depth loop: sequential, dense, every cell solved from a
/// cold start to full tolerance.
pub fn naive_dense_recursion(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    params: &DiscountParams,
) -> Result<f64> {
    check_shapes(x, y, cost)?;
    let Depth::Finite(depth) = params.depth else {
        return Err(Error::InvalidParameter("finite depth required".into()));
    };
    let opts = SinkhornOptions {
        max_iter: params.sinkhorn.max_iter,
        tol: params.sinkhorn.tol,
    };
    let (n, m) = cost.dim();
    let mut current = cost.clone();
    for _ in 0..depth {
        let mut next = Array2::zeros((n, m));
        for i in 0..n {
            for j in 0..m {
                let sol = ot::solve(
                    x.kernel().row(i),
                    y.kernel().row(j),
                    current.view(),
                    params.epsilon,
                    &opts,
                    None,
                )?;
                next[[i, j]] = params.delta * cost[[i, j]] + (1.0 - params.delta) * sol.value;
            }
        }
        current = next;
    }
    Ok(ot::solve(
        x.initial().view(),
        y.initial().view(),
        current.view(),
        params.epsilon,
        &opts,
        None,
    )?
    .value)
}
