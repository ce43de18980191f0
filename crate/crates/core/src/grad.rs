//! Gradients of the entropic discounted WL distance.
//!
//! At the fixed point `C* = δC + (1-δ) T(C*)`, where `T` solves every cell
//! problem, the implicit function theorem gives
//!
//! ```text
//! K dC* = δ dC + (1-δ) (F dm^X + G dm^Y),    K = I - (1-δ) P
//! ```
//!
//! with `P` the stacked cell plans and `F`, `G` the stacked cell duals. A
//! loss with upstream `U = ∂L/∂C*` is pulled back by one adjoint solve
//! `Kᵀ w = U`. Indices: row of `P` = output cell `(i, j)`, column = input
//! cell `(k, l)`, both flattened row-major.
//!
//! [`backward`] returns raw partials in the mean-zero-f dual gauge. Only
//! directional derivatives along directions that keep rows (and initial
//! vectors) summing to one and keep the support are meaningful, so
//! [`GradientBundle`] reports the gauge-free tangent components. At a zero
//! entry the one-sided derivative is infinite (entropy term) and the
//! reported partial is 0.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chains::MarkovChain;
use crate::error::{Error, Result};
use crate::ot::{OtSolution, SinkhornOptions};
use crate::otm::{
    dwl_infinity, rate_bound_iterations, sup_norm, Depth, DiscountParams, FixedPointResult,
};

/// Above this many cells the adjoint system is solved by Neumann iteration
/// instead of dense LU.
pub const DENSE_SOLVE_LIMIT: usize = 1024;

/// Plans and duals of the last sweep, stacked.
#[derive(Debug, Clone)]
pub struct BackwardCache {
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    /// `(nm) x (nm)`, row `(i, j)` is the flattened plan `P_ij`.
    pub p: Array2<f64>,
    /// `(nm) x n`, row `(i, j)` is the f-dual of cell `(i, j)`.
    pub f_duals: Array2<f64>,
    /// `(nm) x m`, row `(i, j)` is the g-dual of cell `(i, j)`.
    pub g_duals: Array2<f64>,
    pub final_plan: Array2<f64>,
    pub final_f: Array1<f64>,
    pub final_g: Array1<f64>,
}

impl BackwardCache {
    pub fn from_result(result: &FixedPointResult) -> Result<Self> {
        if !result.converged {
            return Err(Error::NotConverged {
                iterations: result.iterations,
                residual: result.residual,
                partial: None,
            });
        }
        let params = &result.params;
        if params.epsilon == 0.0 {
            return Err(Error::EpsilonZero);
        }
        if !(params.delta > 0.0) {
            return Err(Error::InvalidParameter(
                "gradients require delta > 0".into(),
            ));
        }
        let (n, m) = result.shape();
        let nm = n * m;
        if result.cell_solutions.len() != nm {
            return Err(Error::InvalidParameter(
                "result carries no dense cell solutions; run dwl_infinity".into(),
            ));
        }
        let mut p = Array2::zeros((nm, nm));
        let mut f_duals = Array2::zeros((nm, n));
        let mut g_duals = Array2::zeros((nm, m));
        for (idx, sol) in result.cell_solutions.iter().enumerate() {
            let duals = sol.duals.as_ref().ok_or(Error::ExactPathUnsupported)?;
            p.row_mut(idx)
                .iter_mut()
                .zip(sol.plan.iter())
                .for_each(|(dst, &v)| *dst = v);
            f_duals.row_mut(idx).assign(&duals.f);
            g_duals.row_mut(idx).assign(&duals.g);
        }
        let final_duals = result
            .final_ot
            .duals
            .as_ref()
            .ok_or(Error::ExactPathUnsupported)?;
        let cache = Self {
            n,
            m,
            delta: params.delta,
            p,
            f_duals,
            g_duals,
            final_plan: result.final_ot.plan.clone(),
            final_f: final_duals.f.clone(),
            final_g: final_duals.g.clone(),
        };
        let margin = cache.dominance_margin();
        if margin < 0.5 * cache.delta {
            return Err(Error::PreconditionViolated(format!(
                "adjoint system not diagonally dominant (margin {margin:.3e})"
            )));
        }
        Ok(cache)
    }

    /// Smallest `|K_rr| - Σ_{s≠r} |K_rs|` over rows of `K = I - (1-δ)P`.
    pub fn dominance_margin(&self) -> f64 {
        let damp = 1.0 - self.delta;
        self.p
            .rows()
            .into_iter()
            .enumerate()
            .map(|(r, row)| {
                let diag = 1.0 - damp * row[r];
                let off: f64 = damp * (row.sum() - row[r]);
                diag.abs() - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Dense `(nm) x n²` tensor with `F[(i,j), (k,k')] = f_ij[k'] · 1[i = k]`.
    pub fn dense_f(&self) -> Array2<f64> {
        let (n, m) = (self.n, self.m);
        let mut out = Array2::zeros((n * m, n * n));
        for i in 0..n {
            for j in 0..m {
                for kp in 0..n {
                    out[[i * m + j, i * n + kp]] = self.f_duals[[i * m + j, kp]];
                }
            }
        }
        out
    }

    /// Dense `(nm) x m²` tensor with `G[(i,j), (l,l')] = g_ij[l'] · 1[j = l]`.
    pub fn dense_g(&self) -> Array2<f64> {
        let (n, m) = (self.n, self.m);
        let mut out = Array2::zeros((n * m, m * m));
        for i in 0..n {
            for j in 0..m {
                for lp in 0..m {
                    out[[i * m + j, j * m + lp]] = self.g_duals[[i * m + j, lp]];
                }
            }
        }
        out
    }

    /// Solves `Kᵀ w = rhs` (flattened row-major).
    pub fn adjoint_solve(&self, rhs: &Array1<f64>) -> Result<Array1<f64>> {
        if self.n * self.m <= DENSE_SOLVE_LIMIT {
            self.adjoint_solve_lu(rhs)
        } else {
            Ok(self.adjoint_solve_neumann(rhs))
        }
    }

    pub fn adjoint_solve_lu(&self, rhs: &Array1<f64>) -> Result<Array1<f64>> {
        let nm = self.n * self.m;
        let damp = 1.0 - self.delta;
        // Kᵀ[r, s] = 1[r = s] - (1-δ) P[s, r]
        let kt = DMatrix::from_fn(nm, nm, |r, s| {
            (if r == s { 1.0 } else { 0.0 }) - damp * self.p[[s, r]]
        });
        let b = DVector::from_iterator(nm, rhs.iter().copied());
        let w = kt
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::PreconditionViolated("singular adjoint system".into()))?;
        Ok(Array1::from_iter(w.iter().copied()))
    }

    /// `w = Σ_t ((1-δ) Pᵀ)^t rhs`, truncated by the geometric rate bound.
    pub fn adjoint_solve_neumann(&self, rhs: &Array1<f64>) -> Array1<f64> {
        let damp = 1.0 - self.delta;
        let norm = rhs.iter().map(|v| v.abs()).sum::<f64>();
        if norm == 0.0 {
            return Array1::zeros(rhs.len());
        }
        let tol = 1e-15 * norm;
        let cap = rate_bound_iterations(self.delta, tol, norm).max(1);
        let mut w = rhs.clone();
        let mut term = rhs.clone();
        for _ in 0..cap {
            term = self.p.t().dot(&term) * damp;
            w += &term;
            if term.iter().map(|v| v.abs()).sum::<f64>() <= tol {
                break;
            }
        }
        w
    }
}

/// Partials of the distance (or of a loss through `C*`).
#[derive(Debug, Clone, Serialize)]
pub struct GradientBundle {
    pub d_c: Array2<f64>,
    pub d_mx: Array2<f64>,
    pub d_my: Array2<f64>,
    pub d_nux: Array1<f64>,
    pub d_nuy: Array1<f64>,
}

impl GradientBundle {
    pub fn is_finite(&self) -> bool {
        self.d_c.iter().all(|v| v.is_finite())
            && self.d_mx.iter().all(|v| v.is_finite())
            && self.d_my.iter().all(|v| v.is_finite())
            && self.d_nux.iter().all(|v| v.is_finite())
            && self.d_nuy.iter().all(|v| v.is_finite())
    }
}

/// Pullbacks through the fixed point.
#[derive(Debug, Clone, Serialize)]
pub struct Backward {
    pub d_c: Array2<f64>,
    pub d_mx: Array2<f64>,
    pub d_my: Array2<f64>,
}

/// Pulls `upstream = ∂L/∂C*` back to the base cost and both kernels.
pub fn backward(result: &FixedPointResult, upstream: &Array2<f64>) -> Result<Backward> {
    let cache = BackwardCache::from_result(result)?;
    backward_with_cache(&cache, upstream.view())
}

pub fn backward_with_cache(cache: &BackwardCache, upstream: ArrayView2<f64>) -> Result<Backward> {
    let (n, m) = (cache.n, cache.m);
    if upstream.dim() != (n, m) {
        return Err(Error::DimensionMismatch(format!(
            "upstream is {:?}, expected ({n}, {m})",
            upstream.dim()
        )));
    }
    let rhs = Array1::from_iter(upstream.iter().copied());
    let w = cache.adjoint_solve(&rhs)?;
    let damp = 1.0 - cache.delta;

    let d_c = w
        .clone()
        .into_shape_with_order((n, m))
        .expect("n*m entries")
        * cache.delta;
    let mut d_mx = Array2::zeros((n, n));
    let mut d_my = Array2::zeros((m, m));
    for i in 0..n {
        for j in 0..m {
            let idx = i * m + j;
            let weight = damp * w[idx];
            if weight == 0.0 {
                continue;
            }
            d_mx.row_mut(i).scaled_add(weight, &cache.f_duals.row(idx));
            d_my.row_mut(j).scaled_add(weight, &cache.g_duals.row(idx));
        }
    }
    Ok(Backward { d_c, d_mx, d_my })
}

#[derive(Debug, Clone, Serialize)]
pub struct SinkhornVjp {
    pub d_cost: Array2<f64>,
    pub d_alpha: Array1<f64>,
    pub d_beta: Array1<f64>,
}

/// Pullback of a scalar upstream through one entropic solve: the plan for
/// the cost, the (mean-zero gauge) duals for the marginals.
pub fn sinkhorn_vjp(solution: &OtSolution, upstream: f64) -> Result<SinkhornVjp> {
    let duals = solution.duals.as_ref().ok_or(Error::ExactPathUnsupported)?;
    if !solution.is_entropic() {
        return Err(Error::ExactPathUnsupported);
    }
    Ok(SinkhornVjp {
        d_cost: &solution.plan * upstream,
        d_alpha: &duals.f * upstream,
        d_beta: &duals.g * upstream,
    })
}

/// Distance and all its partials.
pub fn full_gradient(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    params: &DiscountParams,
) -> Result<(FixedPointResult, GradientBundle)> {
    if params.depth != Depth::Infinite {
        return Err(Error::InvalidParameter(
            "gradients are computed for infinite depth only".into(),
        ));
    }
    if params.epsilon == 0.0 {
        return Err(Error::EpsilonZero);
    }
    let result = dwl_infinity(x, y, cost, params)?;
    let bundle = gradient_of(&result, x, y)?;
    Ok((result, bundle))
}

/// Gradient bundle of an already converged infinite-depth result.
///
/// Kernel and initial-distribution partials are reported as their tangent
/// components: each row is centered over the support of the corresponding
/// probability vector and zero off it. This removes the dual gauge.
pub fn gradient_of(
    result: &FixedPointResult,
    x: &MarkovChain,
    y: &MarkovChain,
) -> Result<GradientBundle> {
    let cache = BackwardCache::from_result(result)?;
    let top = sinkhorn_vjp(&result.final_ot, 1.0)?;
    let mut back = backward_with_cache(&cache, top.d_cost.view())?;
    let mut d_nux = top.d_alpha;
    let mut d_nuy = top.d_beta;
    for (mut row, p) in back.d_mx.rows_mut().into_iter().zip(x.kernel().rows()) {
        project_tangent(row.view_mut(), p);
    }
    for (mut row, p) in back.d_my.rows_mut().into_iter().zip(y.kernel().rows()) {
        project_tangent(row.view_mut(), p);
    }
    project_tangent(d_nux.view_mut(), x.initial().view());
    project_tangent(d_nuy.view_mut(), y.initial().view());
    Ok(GradientBundle {
        d_c: back.d_c,
        d_mx: back.d_mx,
        d_my: back.d_my,
        d_nux,
        d_nuy,
    })
}

/// Centers `grad` over `supp p` and zeroes it elsewhere.
pub fn project_tangent(mut grad: ndarray::ArrayViewMut1<f64>, p: ndarray::ArrayView1<f64>) {
    let support = p.iter().filter(|&&v| v > 0.0).count();
    let mean = grad
        .iter()
        .zip(p.iter())
        .filter(|(_, &pk)| pk > 0.0)
        .map(|(g, _)| g)
        .sum::<f64>()
        / support.max(1) as f64;
    for (g, &pk) in grad.iter_mut().zip(p.iter()) {
        *g = if pk > 0.0 { *g - mean } else { 0.0 };
    }
}

/// Which input a finite-difference direction perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FdTarget {
    Cost,
    KernelX,
    KernelY,
    InitialX,
    InitialY,
}

impl FdTarget {
    pub const ALL: [FdTarget; 5] = [
        FdTarget::Cost,
        FdTarget::KernelX,
        FdTarget::KernelY,
        FdTarget::InitialX,
        FdTarget::InitialY,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FdTarget::Cost => "C",
            FdTarget::KernelX => "mX",
            FdTarget::KernelY => "mY",
            FdTarget::InitialX => "nuX",
            FdTarget::InitialY => "nuY",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FdProbe {
    pub target: FdTarget,
    pub analytic: f64,
    pub numeric: f64,
    pub step: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FdReport {
    pub seed: u64,
    pub probes: Vec<FdProbe>,
    /// `(target name, max relative error)` in [`FdTarget::ALL`] order.
    pub max_rel_error: Vec<(String, f64)>,
}

impl FdReport {
    pub fn worst(&self) -> f64 {
        self.max_rel_error
            .iter()
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    }
}

/// Relative error with a floor on the scale: `|a - b| / max(|a|, |b|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Random row of a tangent direction supported where `p > 0`:
/// `d_k = p_k (r_k - <p, r> / Σp)`, so `Σ d = 0` and `|d_k| <= 2 p_k`.
fn weighted_tangent(p: ndarray::ArrayView1<f64>, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let r: Array1<f64> = p.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    let total = p.sum();
    let mean = p.dot(&r) / total;
    Array1::from_iter(p.iter().zip(r.iter()).map(|(&pk, &rk)| pk * (rk - mean)))
}

/// Forward runs used by the finite-difference check resolve every problem
/// tightly; the analytic gradient is taken at the same settings.
fn tight(params: &DiscountParams, cost: &Array2<f64>) -> DiscountParams {
    let fp_tol = 1e-13 * sup_norm(cost).max(1e-300);
    let tol = params.tol.map_or(fp_tol, |t| t.min(fp_tol));
    let sk_tol = params.sinkhorn.tol.min(1e-13);
    DiscountParams {
        tol: Some(tol),
        sinkhorn: SinkhornOptions {
            tol: sk_tol,
            max_iter: params.sinkhorn.max_iter.max(100_000),
        },
        ..*params
    }
}

/// Compares directional derivatives from [`full_gradient`] with central
/// differences along random tangent directions, keeping the best step from
/// `h_list` per direction.
pub fn finite_difference_check(
    x: &MarkovChain,
    y: &MarkovChain,
    cost: &Array2<f64>,
    params: &DiscountParams,
    n_directions: usize,
    h_list: &[f64],
    seed: u64,
) -> Result<FdReport> {
    let params = tight(params, cost);
    let (_, grad) = full_gradient(x, y, cost, &params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let value = |xx: &MarkovChain, yy: &MarkovChain, cc: &Array2<f64>| -> Result<f64> {
        dwl_infinity(xx, yy, cc, &params).map(|r| r.value)
    };
    let (n, m) = cost.dim();
    let mut probes = Vec::new();
    for target in FdTarget::ALL {
        for _ in 0..n_directions {
            let direction: Array2<f64> = match target {
                FdTarget::Cost => Array2::from_shape_fn((n, m), |_| rng.gen_range(-1.0..1.0)),
                FdTarget::KernelX | FdTarget::KernelY => {
                    let k = if target == FdTarget::KernelX {
                        x.kernel()
                    } else {
                        y.kernel()
                    };
                    let mut d = Array2::zeros(k.dim());
                    for (mut row, src) in d.rows_mut().into_iter().zip(k.rows()) {
                        row.assign(&weighted_tangent(src, &mut rng));
                    }
                    d
                }
                FdTarget::InitialX | FdTarget::InitialY => {
                    let nu = if target == FdTarget::InitialX {
                        x.initial()
                    } else {
                        y.initial()
                    };
                    weighted_tangent(nu.view(), &mut rng).insert_axis(ndarray::Axis(0))
                }
            };
            let analytic = match target {
                FdTarget::Cost => (&grad.d_c * &direction).sum(),
                FdTarget::KernelX => (&grad.d_mx * &direction).sum(),
                FdTarget::KernelY => (&grad.d_my * &direction).sum(),
                FdTarget::InitialX => grad.d_nux.dot(&direction.row(0)),
                FdTarget::InitialY => grad.d_nuy.dot(&direction.row(0)),
            };
            let eval = |h: f64| -> Result<f64> {
                match target {
                    FdTarget::Cost => value(x, y, &(cost + &(&direction * h))),
                    FdTarget::KernelX => {
                        value(&x.with_kernel(x.kernel() + &(&direction * h))?, y, cost)
                    }
                    FdTarget::KernelY => {
                        value(x, &y.with_kernel(y.kernel() + &(&direction * h))?, cost)
                    }
                    FdTarget::InitialX => {
                        let nu = x.initial() + &(&direction.row(0) * h);
                        value(&x.with_initial(nu)?, y, cost)
                    }
                    FdTarget::InitialY => {
                        let nu = y.initial() + &(&direction.row(0) * h);
                        value(x, &y.with_initial(nu)?, cost)
                    }
                }
            };
            let mut best: Option<FdProbe> = None;
            for &h in h_list {
                let numeric = (eval(h)? - eval(-h)?) / (2.0 * h);
                let rel_error = relative_error(analytic, numeric);
                if best.as_ref().is_none_or(|b| rel_error < b.rel_error) {
                    best = Some(FdProbe {
                        target,
                        analytic,
                        numeric,
                        step: h,
                        rel_error,
                    });
                }
            }
            probes.extend(best);
        }
    }
    let max_rel_error = FdTarget::ALL
        .iter()
        .map(|&t| {
            let worst = probes
                .iter()
                .filter(|p| p.target == t)
                .map(|p| p.rel_error)
                .fold(0.0, f64::max);
            (t.name().to_string(), worst)
        })
        .collect();
    Ok(FdReport {
        seed,
        probes,
        max_rel_error,
    })
}
