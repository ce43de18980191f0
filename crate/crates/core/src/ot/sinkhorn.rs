//! Log-domain Sinkhorn iterations with soft-min updates.
//!
//! Internally the potentials `(u, v)` parametrize the plan as
//! `P_ij = a_i b_j exp((u_i + v_j - C_ij) / ε)`, iterated only over the
//! positive-mass rows and columns. Solves that stall fall back to a dual
//! Newton polish. The reported duals are
//! `f_i = u_i + ε ln a_i + ε` and `g_j = v_j + ε ln b_j`, which are the
//! derivatives of `<P, C> - ε H(P)` with respect to the marginals.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::{check_inputs, DualPair, Gauge, OtSolution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Stop once the L1 row-marginal violation is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

impl SinkhornOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn capped(self, max_iter: usize) -> Self {
        Self { max_iter, ..self }
    }
}

/// Sinkhorn steps before a stalled solve switches to dual Newton.
const NEWTON_AFTER: usize = 1000;
/// Largest `rows + cols` handled by the dense Newton system.
const NEWTON_MAX_DIM: usize = 256;
/// Cap on one Newton step in units of ε.
const NEWTON_MAX_STEP: f64 = 20.0;

/// Damped Newton ascent on the dual `Σ a u + Σ b v - Σ P` (potentials over ε),
/// with `v` of the last column held fixed to remove the gauge direction.
/// Every Newton step is followed by an exact row and column balance.
fn newton_polish(
    u: &mut [f64],
    v: &mut [f64],
    scaled: &[f64],
    log_a: &[f64],
    log_b: &[f64],
    tol: f64,
) {
    let (na, ma) = (u.len(), v.len());
    let dim = na + ma - 1;
    let lse = |xs: &mut dyn Iterator<Item = f64>| {
        let xs: Vec<f64> = xs.collect();
        let mx = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
    };
    let balance = |u: &mut [f64], v: &mut [f64]| {
        for r in 0..na {
            u[r] = -lse(&mut (0..ma).map(|c| log_b[c] + v[c] - scaled[r * ma + c]));
        }
        for c in 0..ma {
            v[c] = -lse(&mut (0..na).map(|r| log_a[r] + u[r] - scaled[r * ma + c]));
        }
        // keep the last column potential fixed
        let shift = v[ma - 1];
        v.iter_mut().for_each(|x| *x -= shift);
        u.iter_mut().for_each(|x| *x += shift);
    };
    let stats = |u: &[f64], v: &[f64]| {
        let mut p = vec![0.0; na * ma];
        let mut rs = vec![0.0; na];
        let mut cs = vec![0.0; ma];
        let mut total = 0.0;
        for r in 0..na {
            for c in 0..ma {
                let x = (log_a[r] + log_b[c] + u[r] + v[c] - scaled[r * ma + c]).exp();
                p[r * ma + c] = x;
                rs[r] += x;
                cs[c] += x;
                total += x;
            }
        }
        let dual = (0..na).map(|r| log_a[r].exp() * u[r]).sum::<f64>()
            + (0..ma).map(|c| log_b[c].exp() * v[c]).sum::<f64>()
            - total;
        let gu: Vec<f64> = (0..na).map(|r| log_a[r].exp() - rs[r]).collect();
        let gv: Vec<f64> = (0..ma).map(|c| log_b[c].exp() - cs[c]).collect();
        (p, rs, cs, gu, gv, dual)
    };
    let l1 = |g: &[f64]| g.iter().map(|x| x.abs()).sum::<f64>();
    balance(u, v);
    for _ in 0..500 {
        let (p, rs, cs, gu, gv, dual) = stats(u, v);
        let gnorm = l1(&gu) + l1(&gv);
        if !gnorm.is_finite() || gnorm <= 0.1 * tol {
            break;
        }
        let mut h = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = nalgebra::DVector::<f64>::zeros(dim);
        for r in 0..na {
            h[(r, r)] = rs[r];
            rhs[r] = gu[r];
            for c in 0..ma - 1 {
                h[(r, na + c)] = p[r * ma + c];
                h[(na + c, r)] = p[r * ma + c];
            }
        }
        for c in 0..ma - 1 {
            h[(na + c, na + c)] = cs[c];
            rhs[na + c] = gv[c];
        }
        // nearly decoupled blocks make the Hessian singular; a ridge keeps
        // the step an ascent direction
        let mut ridge = 1e-12;
        let step = loop {
            let mut hr = h.clone();
            for k in 0..dim {
                hr[(k, k)] += ridge;
            }
            if let Some(ch) = hr.cholesky() {
                let s = ch.solve(&rhs);
                if s.iter().all(|x| x.is_finite()) {
                    break Some(s);
                }
            }
            ridge *= 100.0;
            if ridge > 1.0 {
                break None;
            }
        };
        let Some(mut step) = step else { break };
        let longest = step.amax();
        if longest > NEWTON_MAX_STEP {
            step *= NEWTON_MAX_STEP / longest;
        }
        let slope: f64 = step.dot(&rhs);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut nu: Vec<f64> = (0..na).map(|r| u[r] + t * step[r]).collect();
            let mut nv: Vec<f64> = (0..ma)
                .map(|c| {
                    if c + 1 < ma {
                        v[c] + t * step[na + c]
                    } else {
                        v[c]
                    }
                })
                .collect();
            let cand = stats(&nu, &nv);
            if cand.5.is_finite() {
                let cand_norm = l1(&cand.3) + l1(&cand.4);
                if cand.5 >= dual + 1e-4 * t * slope || cand_norm < 0.5 * gnorm {
                    balance(&mut nu, &mut nv);
                    u.copy_from_slice(&nu);
                    v.copy_from_slice(&nv);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
}

/// Entropic OT from a cold start.
pub fn sinkhorn(
    alpha: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    cost: ArrayView2<f64>,
    epsilon: f64,
    opts: &SinkhornOptions,
) -> Result<OtSolution> {
    sinkhorn_warm(alpha, beta, cost, epsilon, opts, None)
}

/// Entropic OT, optionally warm-started from the duals of a previous solve
/// with the same marginals.
///
/// Hitting `max_iter` is not an error: the solution comes back with
/// `converged = false`.
pub fn sinkhorn_warm(
    alpha: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    cost: ArrayView2<f64>,
    epsilon: f64,
    opts: &SinkhornOptions,
    warm: Option<&DualPair>,
) -> Result<OtSolution> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    check_inputs(alpha, beta, cost)?;
    let (n, m) = cost.dim();
    let rows: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
    let cols: Vec<usize> = (0..m).filter(|&j| beta[j] > 0.0).collect();
    let (na, ma) = (rows.len(), cols.len());
    let log_a: Vec<f64> = rows.iter().map(|&i| alpha[i].ln()).collect();
    let log_b: Vec<f64> = cols.iter().map(|&j| beta[j].ln()).collect();
    let a: Vec<f64> = rows.iter().map(|&i| alpha[i]).collect();

    // Active block of C / ε, row-major.
    let inv_eps = 1.0 / epsilon;
    let mut scaled = vec![0.0; na * ma];
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            scaled[r * ma + c] = cost[[i, j]] * inv_eps;
        }
    }

    // Potentials divided by ε.
    let (mut u, mut v) = match warm {
        Some(d) if d.f.len() == n && d.g.len() == m => (
            rows.iter()
                .zip(&log_a)
                .map(|(&i, la)| d.f[i] * inv_eps - la - 1.0)
                .collect::<Vec<_>>(),
            cols.iter()
                .zip(&log_b)
                .map(|(&j, lb)| d.g[j] * inv_eps - lb)
                .collect::<Vec<_>>(),
        ),
        _ => (vec![0.0; na], vec![0.0; ma]),
    };

    let mut row_lse = vec![0.0; na];
    let mut col_buf = vec![0.0; ma];
    let max_iter = opts.max_iter.max(1);
    let mut iterations = 0;
    let mut err = f64::INFINITY;

    let update_rows = |v: &[f64], out: &mut [f64], col_buf: &mut [f64]| {
        for c in 0..ma {
            col_buf[c] = log_b[c] + v[c];
        }
        for r in 0..na {
            let row = &scaled[r * ma..(r + 1) * ma];
            let mut mx = f64::NEG_INFINITY;
            for c in 0..ma {
                mx = mx.max(col_buf[c] - row[c]);
            }
            let mut s = 0.0;
            for c in 0..ma {
                s += (col_buf[c] - row[c] - mx).exp();
            }
            out[r] = mx + s.ln();
        }
    };

    // Scaling form: P = a·alpha · K · b·beta with K = exp(u + v - C/ε).
    // Iterations only multiply; the potentials are folded back into K when
    // the scalings drift too far or a sum degenerates.
    let mut kernel = vec![0.0; na * ma];
    let absorb = |u: &[f64], v: &[f64], kernel: &mut [f64]| {
        for r in 0..na {
            for c in 0..ma {
                kernel[r * ma + c] = (u[r] + v[c] - scaled[r * ma + c]).exp();
            }
        }
    };
    // row_sum[r] = Σ_c K[r, c] b[c] beta[c]
    let row_sums = |kernel: &[f64], bb: &[f64], out: &mut [f64]| {
        for r in 0..na {
            let row = &kernel[r * ma..(r + 1) * ma];
            out[r] = row.iter().zip(bb).map(|(k, x)| k * x).sum();
        }
    };
    let b: Vec<f64> = cols.iter().map(|&j| beta[j]).collect();
    let mut alpha_s = vec![1.0f64; na];
    let mut beta_s = vec![1.0f64; ma];
    let mut bb = b.clone();
    let mut row_sum = vec![0.0; na];
    let mut col_sum = vec![0.0; ma];
    let mut col_max = vec![f64::NEG_INFINITY; ma];
    let mut next_alpha = vec![1.0; na];
    let mut next_beta = vec![1.0; ma];

    // A cold start takes its first step in the log domain.
    let mut log_mode = warm.is_none();
    if log_mode {
        update_rows(&v, &mut row_lse, &mut col_buf);
    } else {
        absorb(&u, &v, &mut kernel);
        row_sums(&kernel, &bb, &mut row_sum);
    }
    const DRIFT: f64 = 1e50;
    let newton_ok = na + ma <= NEWTON_MAX_DIM && na > 0 && ma > 0;
    while iterations < max_iter {
        iterations += 1;
        if newton_ok && iterations == NEWTON_AFTER + 1 && err > opts.tol {
            // stalled: polish the potentials, then resume from the new point
            if !log_mode {
                for r in 0..na {
                    u[r] += alpha_s[r].ln();
                }
                for c in 0..ma {
                    v[c] += beta_s[c].ln();
                }
            }
            newton_polish(&mut u, &mut v, &scaled, &log_a, &log_b, opts.tol);
            update_rows(&v, &mut row_lse, &mut col_buf);
            log_mode = true;
        }
        if log_mode {
            for r in 0..na {
                u[r] = -row_lse[r];
            }
            col_max.iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
            for r in 0..na {
                let w = log_a[r] + u[r];
                let row = &scaled[r * ma..(r + 1) * ma];
                for c in 0..ma {
                    col_max[c] = col_max[c].max(w - row[c]);
                }
            }
            col_sum.iter_mut().for_each(|x| *x = 0.0);
            for r in 0..na {
                let w = log_a[r] + u[r];
                let row = &scaled[r * ma..(r + 1) * ma];
                for c in 0..ma {
                    col_sum[c] += (w - row[c] - col_max[c]).exp();
                }
            }
            for c in 0..ma {
                v[c] = -(col_max[c] + col_sum[c].ln());
            }
            update_rows(&v, &mut row_lse, &mut col_buf);
            err = (0..na)
                .map(|r| a[r] * ((u[r] + row_lse[r]).exp() - 1.0).abs())
                .sum();
            absorb(&u, &v, &mut kernel);
            alpha_s.iter_mut().for_each(|x| *x = 1.0);
            beta_s.iter_mut().for_each(|x| *x = 1.0);
            bb.copy_from_slice(&b);
            for r in 0..na {
                row_sum[r] = (u[r] + row_lse[r]).exp();
            }
            log_mode = false;
        } else {
            for r in 0..na {
                next_alpha[r] = 1.0 / row_sum[r];
            }
            col_sum.iter_mut().for_each(|x| *x = 0.0);
            for r in 0..na {
                let w = a[r] * next_alpha[r];
                let row = &kernel[r * ma..(r + 1) * ma];
                for c in 0..ma {
                    col_sum[c] += w * row[c];
                }
            }
            for c in 0..ma {
                next_beta[c] = 1.0 / col_sum[c];
            }
            let healthy = next_alpha
                .iter()
                .chain(next_beta.iter())
                .all(|&s| s.is_finite() && s > 1.0 / DRIFT && s < DRIFT);
            if !healthy {
                // fold the last good scalings and redo the step in the log domain
                for r in 0..na {
                    u[r] += alpha_s[r].ln();
                }
                for c in 0..ma {
                    v[c] += beta_s[c].ln();
                }
                update_rows(&v, &mut row_lse, &mut col_buf);
                log_mode = true;
                continue;
            }
            alpha_s.copy_from_slice(&next_alpha);
            beta_s.copy_from_slice(&next_beta);
            for c in 0..ma {
                bb[c] = b[c] * beta_s[c];
            }
            row_sums(&kernel, &bb, &mut row_sum);
            err = (0..na)
                .map(|r| a[r] * (alpha_s[r] * row_sum[r] - 1.0).abs())
                .sum();
        }
        if !err.is_finite() {
            return Err(Error::PreconditionViolated(
                "Sinkhorn potentials diverged".into(),
            ));
        }
        if err <= opts.tol {
            break;
        }
    }
    let scaled_form = !log_mode;
    if scaled_form {
        for r in 0..na {
            u[r] += alpha_s[r].ln();
        }
        for c in 0..ma {
            v[c] += beta_s[c].ln();
        }
    }
    let converged = err <= opts.tol;

    let mut plan = Array2::zeros((n, m));
    let mut value = 0.0;
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            let log_p = log_a[r] + log_b[c] + u[r] + v[c] - scaled[r * ma + c];
            let p = if scaled_form {
                a[r] * alpha_s[r] * kernel[r * ma + c] * bb[c]
            } else {
                log_p.exp()
            };
            plan[[i, j]] = p;
            if p > 0.0 {
                value += p * (cost[[i, j]] + epsilon * log_p);
            }
        }
    }

    let mut f = Array1::zeros(n);
    let mut g = Array1::zeros(m);
    for (r, &i) in rows.iter().enumerate() {
        f[i] = epsilon * (u[r] + log_a[r] + 1.0);
    }
    for (c, &j) in cols.iter().enumerate() {
        g[j] = epsilon * (v[c] + log_b[c]);
    }
    let shift = rows.iter().map(|&i| f[i]).sum::<f64>() / na as f64;
    for &i in &rows {
        f[i] -= shift;
    }
    for &j in &cols {
        g[j] += shift;
    }
    let mut row_active = vec![false; n];
    rows.iter().for_each(|&i| row_active[i] = true);
    let mut col_active = vec![false; m];
    cols.iter().for_each(|&j| col_active[j] = true);

    Ok(OtSolution {
        value,
        plan,
        duals: Some(DualPair {
            f,
            g,
            gauge: Gauge::MeanZeroF,
            row_active,
            col_active,
        }),
        iterations,
        converged,
        epsilon,
        marginal_error: err,
    })
}
