//! Limited-memory BFGS with the Moré-Thuente strong-Wolfe line search.
//!
//! The line search follows the MINPACK `cvsrch`/`cstep` scheme: a bracketing
//! phase with cubic/quadratic interpolation that returns a step satisfying
//! the strong Wolfe conditions with constants (`ls_ftol`, `ls_gtol`).

use crate::error::{Error, Result};
use crate::matrix::dot;
use std::collections::VecDeque;

/// Smooth objective contract: fills `grad` and returns the value at `x`.
pub trait Objective {
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self(x, grad)
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsConfig {
    /// Number of curvature pairs kept.
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when `||x_{j+1} - x_j|| / max(1, ||x_j||)` falls below this.
    pub rel_change_tol: f64,
    /// Stop when `||grad||_2 / len(x)` falls below this (the inner tolerance).
    pub grad_per_entry_tol: f64,
    /// Sufficient-decrease constant of the line search.
    pub ls_ftol: f64,
    /// Curvature constant of the line search.
    pub ls_gtol: f64,
    /// Initial trial step length.
    pub ls_step0: f64,
    /// Cap on line-search function evaluations.
    pub ls_max_iters: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 20,
            max_iters: 500,
            rel_change_tol: 1e-8,
            grad_per_entry_tol: 1e-4,
            ls_ftol: 1e-4,
            ls_gtol: 1e-2,
            ls_step0: 1.0,
            ls_max_iters: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    RelChange,
    GradTol,
    MaxIters,
    LineSearchFail,
}

#[derive(Debug, Clone)]
pub struct LbfgsReport {
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub grad_norm_final: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

/// Result of one Moré-Thuente search along a fixed direction.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub evals: usize,
    /// Whether the strong Wolfe conditions were met.
    pub satisfied: bool,
    pub f: f64,
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
}

const STP_MIN: f64 = 1e-20;
const STP_MAX: f64 = 1e20;
const XTOL: f64 = 1e-15;

/// Strong-Wolfe line search from `x` along the descent direction `d`.
///
/// On failure (evaluation cap, interval collapse) the best trial point seen
/// is returned with `satisfied = false`.
pub fn more_thuente_search(
    obj: &dyn Objective,
    x: &[f64],
    d: &[f64],
    cfg: &LbfgsConfig,
) -> Result<LineSearchOutcome> {
    let n = x.len();
    let mut grad = vec![0.0; n];
    let finit = obj.eval(x, &mut grad);
    search_from(obj, x, finit, &grad, d, cfg)
}

/// Same search, reusing an already computed value/gradient at `x`.
fn search_from(
    obj: &dyn Objective,
    x: &[f64],
    finit: f64,
    ginit: &[f64],
    d: &[f64],
    cfg: &LbfgsConfig,
) -> Result<LineSearchOutcome> {
    let n = x.len();
    let dginit = dot(ginit, d);
    if dginit >= 0.0 {
        return Err(Error::NonDescentDirection(dginit));
    }
    if !finit.is_finite() {
        return Err(Error::NonFinite("line search start value".into()));
    }

    let ftol = cfg.ls_ftol;
    let gtol = cfg.ls_gtol;
    let dgtest = ftol * dginit;

    let mut brackt = false;
    let mut stage1 = true;
    let mut stx = 0.0_f64;
    let mut fx = finit;
    let mut dgx = dginit;
    let mut sty = 0.0_f64;
    let mut fy = finit;
    let mut dgy = dginit;
    let mut stp = cfg.ls_step0.clamp(STP_MIN, STP_MAX);
    let mut width = STP_MAX - STP_MIN;
    let mut width1 = 2.0 * width;

    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut best: Option<LineSearchOutcome> = None;
    let mut evals = 0usize;

    loop {
        let (stmin, stmax) = if brackt {
            (stx.min(sty), stx.max(sty))
        } else {
            (stx, stp + 4.0 * (stp - stx))
        };
        stp = stp.clamp(STP_MIN, STP_MAX);
        if (brackt && (stp <= stmin || stp >= stmax))
            || evals >= cfg.ls_max_iters.saturating_sub(1)
            || (brackt && stmax - stmin <= XTOL * stmax)
        {
            stp = stx;
        }
        if stp <= 0.0 {
            stp = STP_MIN;
        }

        for i in 0..n {
            xt[i] = x[i] + stp * d[i];
        }
        let ft = obj.eval(&xt, &mut gt);
        evals += 1;
        if !ft.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective at trial step {:e}",
                stp
            )));
        }
        let dg = dot(&gt, d);
        let ftest1 = finit + stp * dgtest;

        if best.as_ref().map_or(true, |b| ft < b.f) {
            best = Some(LineSearchOutcome {
                step: stp,
                evals,
                satisfied: false,
                f: ft,
                x: xt.clone(),
                grad: gt.clone(),
            });
        }

        // strong Wolfe: sufficient decrease and curvature
        if ft <= ftest1 && dg.abs() <= gtol * (-dginit) {
            return Ok(LineSearchOutcome {
                step: stp,
                evals,
                satisfied: true,
                f: ft,
                x: xt,
                grad: gt,
            });
        }
        let give_up = evals >= cfg.ls_max_iters
            || (brackt && (stp <= stmin || stp >= stmax))
            || (brackt && stmax - stmin <= XTOL * stmax)
            || (stp == STP_MAX && ft <= ftest1 && dg <= dgtest)
            || (stp == STP_MIN && (ft > ftest1 || dg >= dgtest));
        if give_up {
            let mut out = best.expect("at least one evaluation");
            out.evals = evals;
            return Ok(out);
        }

        if stage1 && ft <= ftest1 && dg >= ftol.min(gtol) * dginit {
            stage1 = false;
        }

        if stage1 && ft <= fx && ft > ftest1 {
            // use the auxiliary (modified) function psi
            let fm = ft - stp * dgtest;
            let mut fxm = fx - stx * dgtest;
            let mut fym = fy - sty * dgtest;
            let dgm = dg - dgtest;
            let mut dgxm = dgx - dgtest;
            let mut dgym = dgy - dgtest;
            cstep(
                &mut stx, &mut fxm, &mut dgxm, &mut sty, &mut fym, &mut dgym, &mut stp, fm, dgm,
                &mut brackt, stmin, stmax,
            );
            fx = fxm + stx * dgtest;
            fy = fym + sty * dgtest;
            dgx = dgxm + dgtest;
            dgy = dgym + dgtest;
        } else {
            cstep(
                &mut stx, &mut fx, &mut dgx, &mut sty, &mut fy, &mut dgy, &mut stp, ft, dg,
                &mut brackt, stmin, stmax,
            );
        }

        if brackt {
            if (sty - stx).abs() >= 0.66 * width1 {
                stp = stx + 0.5 * (sty - stx);
            }
            width1 = width;
            width = (sty - stx).abs();
        }
    }
}

/// MINPACK `cstep`: updates the interval of uncertainty and computes the next
/// trial step by cubic/quadratic interpolation.
#[allow(clippy::too_many_arguments)]
fn cstep(
    stx: &mut f64,
    fx: &mut f64,
    dx: &mut f64,
    sty: &mut f64,
    fy: &mut f64,
    dy: &mut f64,
    stp: &mut f64,
    fp: f64,
    dp: f64,
    brackt: &mut bool,
    stmin: f64,
    stmax: f64,
) {
    let sgnd = dp * dx.signum();
    let stpf;
    let bound;

    if fp > *fx {
        // case 1: higher value; minimum bracketed
        bound = true;
        let theta = 3.0 * (*fx - fp) / (*stp - *stx) + *dx + dp;
        let s = theta.abs().max(dx.abs()).max(dp.abs());
        let mut gamma = s * ((theta / s).powi(2) - (*dx / s) * (dp / s)).max(0.0).sqrt();
        if *stp < *stx {
            gamma = -gamma;
        }
        let p = (gamma - *dx) + theta;
        let q = ((gamma - *dx) + gamma) + dp;
        let r = p / q;
        let stpc = *stx + r * (*stp - *stx);
        let stpq = *stx + ((*dx / ((*fx - fp) / (*stp - *stx) + *dx)) / 2.0) * (*stp - *stx);
        stpf = if (stpc - *stx).abs() < (stpq - *stx).abs() {
            stpc
        } else {
            stpc + (stpq - stpc) / 2.0
        };
        *brackt = true;
    } else if sgnd < 0.0 {
        // case 2: lower value, opposite derivative signs
        bound = false;
        let theta = 3.0 * (*fx - fp) / (*stp - *stx) + *dx + dp;
        let s = theta.abs().max(dx.abs()).max(dp.abs());
        let mut gamma = s * ((theta / s).powi(2) - (*dx / s) * (dp / s)).max(0.0).sqrt();
        if *stp > *stx {
            gamma = -gamma;
        }
        let p = (gamma - dp) + theta;
        let q = ((gamma - dp) + gamma) + *dx;
        let r = p / q;
        let stpc = *stp + r * (*stx - *stp);
        let stpq = *stp + (dp / (dp - *dx)) * (*stx - *stp);
        stpf = if (stpc - *stp).abs() > (stpq - *stp).abs() {
            stpc
        } else {
            stpq
        };
        *brackt = true;
    } else if dp.abs() < dx.abs() {
        // case 3: lower value, same sign, decreasing magnitude
        bound = true;
        let theta = 3.0 * (*fx - fp) / (*stp - *stx) + *dx + dp;
        let s = theta.abs().max(dx.abs()).max(dp.abs());
        let gamma_sq = (theta / s).powi(2) - (*dx / s) * (dp / s);
        let mut gamma = s * gamma_sq.max(0.0).sqrt();
        if *stp > *stx {
            gamma = -gamma;
        }
        let p = (gamma - dp) + theta;
        let q = (gamma + (*dx - dp)) + gamma;
        let r = p / q;
        let stpc = if r < 0.0 && gamma != 0.0 {
            *stp + r * (*stx - *stp)
        } else if *stp > *stx {
            stmax
        } else {
            stmin
        };
        let stpq = *stp + (dp / (dp - *dx)) * (*stx - *stp);
        stpf = if *brackt {
            if (*stp - stpc).abs() < (*stp - stpq).abs() {
                stpc
            } else {
                stpq
            }
        } else if (*stp - stpc).abs() > (*stp - stpq).abs() {
            stpc
        } else {
            stpq
        };
    } else {
        // case 4: lower value, same sign, not decreasing
        bound = false;
        stpf = if *brackt {
            let theta = 3.0 * (fp - *fy) / (*sty - *stp) + *dy + dp;
            let s = theta.abs().max(dy.abs()).max(dp.abs());
            let mut gamma = s * ((theta / s).powi(2) - (*dy / s) * (dp / s)).max(0.0).sqrt();
            if *stp > *sty {
                gamma = -gamma;
            }
            let p = (gamma - dp) + theta;
            let q = ((gamma - dp) + gamma) + *dy;
            let r = p / q;
            *sty + r * (*stp - *sty)
        } else if *stp > *stx {
            stmax
        } else {
            stmin
        };
    }

    // update the interval of uncertainty
    if fp > *fx {
        *sty = *stp;
        *fy = fp;
        *dy = dp;
    } else {
        if sgnd < 0.0 {
            *sty = *stx;
            *fy = *fx;
            *dy = *dx;
        }
        *stx = *stp;
        *fx = fp;
        *dx = dp;
    }

    let mut stpf = stpf.clamp(stmin, stmax);
    if *brackt && bound {
        let mid = *stx + 0.66 * (*sty - *stx);
        stpf = if *sty > *stx {
            stpf.min(mid)
        } else {
            stpf.max(mid)
        };
    }
    *stp = stpf;
}

/// Two-loop recursion producing the search direction `-H g`. With empty
/// memory this is exactly `-g`.
fn two_loop(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = vec![0.0; mem.len()];
    for (i, (s, y, rho)) in mem.iter().enumerate().rev() {
        let a = rho * dot(s, &q);
        alphas[i] = a;
        for (qj, yj) in q.iter_mut().zip(y) {
            *qj -= a * yj;
        }
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qj in &mut q {
            *qj *= gamma;
        }
    }
    for (i, (s, y, rho)) in mem.iter().enumerate() {
        let b = rho * dot(y, &q);
        let a = alphas[i];
        for (qj, sj) in q.iter_mut().zip(s) {
            *qj += (a - b) * sj;
        }
    }
    for qj in &mut q {
        *qj = -*qj;
    }
    q
}

/// Minimizes `obj` from `x0`.
///
/// Stops on relative iterate change, on the per-entry gradient norm, on the
/// iteration cap, or when the line search can make no progress.
pub fn lbfgs_minimize(obj: &dyn Objective, x0: &[f64], cfg: &LbfgsConfig) -> Result<LbfgsReport> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj.eval(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective at the starting point".into()));
    }
    let grad_norm = |g: &[f64]| dot(g, g).sqrt();

    if grad_norm(&g) / (n as f64) < cfg.grad_per_entry_tol {
        return Ok(LbfgsReport {
            x_final: x,
            f_final: f,
            grad_norm_final: grad_norm(&g),
            iterations: 0,
            stop_reason: StopReason::GradTol,
        });
    }

    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0usize;
    let mut stop_reason = StopReason::MaxIters;

    while iterations < cfg.max_iters {
        iterations += 1;
        let mut d = two_loop(&g, &mem);
        if dot(&d, &g) >= 0.0 {
            // stale curvature produced a non-descent direction; restart
            mem.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let ls = search_from(obj, &x, f, &g, &d, cfg)?;
        if !ls.satisfied && ls.f >= f {
            stop_reason = StopReason::LineSearchFail;
            break;
        }
        // accept ls.x (Wolfe point, or best trial that still reduced f)
        let s: Vec<f64> = ls.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = ls.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let sn = dot(&s, &s).sqrt();
        let yn = dot(&y, &y).sqrt();
        if sy > 1e-12 * sn * yn {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s.clone(), y, 1.0 / sy));
        }
        let xn = dot(&x, &x).sqrt();
        x = ls.x;
        f = ls.f;
        g = ls.grad;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("objective at iteration {}", iterations)));
        }
        if grad_norm(&g) / (n as f64) < cfg.grad_per_entry_tol {
            stop_reason = StopReason::GradTol;
            break;
        }
        if sn / xn.max(1.0) < cfg.rel_change_tol {
            stop_reason = StopReason::RelChange;
            break;
        }
    }

    Ok(LbfgsReport {
        x_final: x,
        f_final: f,
        grad_norm_final: grad_norm(&g),
        iterations,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(x: &[f64], grad: &mut [f64]) -> f64 {
        for (g, xi) in grad.iter_mut().zip(x) {
            *g = *xi;
        }
        0.5 * dot(x, x)
    }

    #[test]
    fn line_search_exact_on_quadratic() {
        let cfg = LbfgsConfig::default();
        let out = more_thuente_search(&quad, &[1.0, 0.0], &[-1.0, 0.0], &cfg).unwrap();
        assert!(out.satisfied);
        assert!((out.step - 1.0).abs() < 1e-12);
        assert!(out.f.abs() < 1e-12);
    }

    #[test]
    fn line_search_satisfies_wolfe_on_quartic() {
        let quartic = |x: &[f64], g: &mut [f64]| {
            g[0] = x[0].powi(3);
            0.25 * x[0].powi(4)
        };
        let cfg = LbfgsConfig::default();
        let x = [1.0];
        let d = [-1.0];
        let out = more_thuente_search(&quartic, &x, &d, &cfg).unwrap();
        assert!(out.satisfied);
        let f0 = 0.25;
        let df0 = -1.0; // d' g(x)
        let alpha = out.step;
        let fa = 0.25 * (1.0 - alpha).powi(4);
        let dfa = -(1.0 - alpha).powi(3);
        assert!(fa <= f0 + 1e-4 * alpha * df0);
        assert!(dfa.abs() <= 1e-2 * df0.abs());
    }

    #[test]
    fn line_search_rejects_non_descent() {
        let cfg = LbfgsConfig::default();
        // at x=(1,0), gradient is (1,0); d=(0,1) has d'g = 0
        let err = more_thuente_search(&quad, &[1.0, 0.0], &[0.0, 1.0], &cfg);
        assert!(matches!(err, Err(Error::NonDescentDirection(_))));
    }

    #[test]
    fn minimizes_spd_quadratic() {
        // f = 0.5 x'Ax - b'x with A = D + ones*0.1 (SPD), solution A^{-1} b.
        let n = 10;
        let a = |i: usize, j: usize| if i == j { 2.0 + i as f64 * 0.3 } else { 0.1 };
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let bc = b.clone();
        let obj = move |x: &[f64], g: &mut [f64]| {
            let mut f = 0.0;
            for i in 0..n {
                let mut axi = 0.0;
                for j in 0..n {
                    axi += a(i, j) * x[j];
                }
                g[i] = axi - bc[i];
                f += 0.5 * x[i] * axi - bc[i] * x[i];
            }
            f
        };
        let cfg = LbfgsConfig {
            grad_per_entry_tol: 1e-12,
            ..LbfgsConfig::default()
        };
        let rep = lbfgs_minimize(&obj, &vec![0.0; n], &cfg).unwrap();
        // reference solution by Gauss elimination through our matrix type
        let amat = crate::matrix::Matrix::from_fn(n, n, |i, j| a(i, j));
        let ainv = crate::matrix::pinv_sym(&amat, 1e-14).unwrap();
        let bx = crate::matrix::Matrix::from_col_major(n, 1, &b).unwrap();
        let xref = ainv.matmul(&bx).unwrap();
        let err: f64 = rep
            .x_final
            .iter()
            .enumerate()
            .map(|(i, v)| (v - xref.get(i, 0)).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-6, "solution error {}", err);
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let cfg = LbfgsConfig::default();
        let rep = lbfgs_minimize(&quad, &[1e-9, -1e-9], &cfg).unwrap();
        assert_eq!(rep.stop_reason, StopReason::GradTol);
        assert!(rep.iterations <= 1);
    }

    #[test]
    fn rosenbrock_converges() {
        let rosen = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -400.0 * a * (b - a * a) - 2.0 * (1.0 - a);
            g[1] = 200.0 * (b - a * a);
            100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2)
        };
        let cfg = LbfgsConfig {
            grad_per_entry_tol: 1e-10,
            ..LbfgsConfig::default()
        };
        let rep = lbfgs_minimize(&rosen, &[-1.2, 1.0], &cfg).unwrap();
        assert!(rep.f_final <= 1e-8, "f_final = {:e}", rep.f_final);
        assert!(rep.iterations <= 500);
    }

    #[test]
    fn quadratic_converges_within_dim_plus_two() {
        // dimension <= memory: L-BFGS behaves like CG on quadratics
        let n = 5;
        let a = |i: usize, j: usize| if i == j { 1.0 + i as f64 } else { 0.2 };
        let obj = move |x: &[f64], g: &mut [f64]| {
            let mut f = 0.0;
            for i in 0..n {
                let mut axi = 0.0;
                for j in 0..n {
                    axi += a(i, j) * x[j];
                }
                g[i] = axi - 1.0;
                f += 0.5 * x[i] * axi - x[i];
            }
            f
        };
        let cfg = LbfgsConfig {
            grad_per_entry_tol: 1e-10 / n as f64,
            rel_change_tol: 1e-16,
            ..LbfgsConfig::default()
        };
        let rep = lbfgs_minimize(&obj, &vec![0.0; n], &cfg).unwrap();
        assert!(rep.grad_norm_final <= 1e-10, "grad {}", rep.grad_norm_final);
        assert!(rep.iterations <= n + 2, "took {} iterations", rep.iterations);
    }

    #[test]
    fn nan_objective_aborts() {
        let bad = |x: &[f64], g: &mut [f64]| {
            g[0] = 1.0;
            if x[0] < -0.5 {
                f64::NAN
            } else {
                x[0]
            }
        };
        let cfg = LbfgsConfig::default();
        assert!(lbfgs_minimize(&bad, &[0.0], &cfg).is_err());
    }

    #[test]
    fn empty_memory_direction_is_steepest_descent() {
        let mem = VecDeque::new();
        let g = vec![0.3, -1.2, 4.0];
        let d = two_loop(&g, &mem);
        for (di, gi) in d.iter().zip(&g) {
            assert_eq!(*di, -*gi);
        }
    }

    #[test]
    fn flat_curvature_pairs_are_skipped() {
        // minimize a linear-ish region then check memory stays descent:
        // the guard is internal, so probe via two_loop with a bad pair absent.
        let mut mem = VecDeque::new();
        let s = vec![1.0, 0.0];
        let y = vec![0.0, 1e-20];
        let sy = dot(&s, &y);
        let sn = 1.0;
        let yn = 1e-20;
        assert!(sy <= 1e-12 * sn * yn * 1e12); // the pair would be rejected
        mem.push_back((vec![0.1, 0.0], vec![0.1, 0.0], 100.0));
        let g = vec![1.0, 1.0];
        let d = two_loop(&g, &mem);
        assert!(dot(&d, &g) < 0.0);
    }
}
