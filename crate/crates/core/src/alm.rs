//! Augmented Lagrangian outer loop for the best orthogonal rank-R
//! approximation.
//!
//! Minimizes
//!   L(v, lambda; c) = 0.5||a - sum_r (x) v_r||^2
//!                     + 0.5 sum_{s!=t} lambda_st prod_n <v_s^(n), v_t^(n)>
//!                     + 0.25 sum_{s!=t} c_st (prod_n <v_s^(n), v_t^(n)>)^2
//! over the factor vectors, with per-pair penalties rebuilt from the
//! component norms each outer iteration and first-order multiplier updates.

use crate::error::{Error, Result};
use crate::kruskal::{gram_hadamard, rebalance, relative_error, theta, KruskalTensor};
use crate::lbfgs::{lbfgs_minimize, LbfgsConfig, Objective};
use crate::matrix::Matrix;
use crate::orthogonalize::{orthogonalize, project, to_kruskal};
use crate::tensor::{khatri_rao, norm, unfold, DenseTensor};
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct AlmState {
    /// Outer iteration counter.
    pub k: usize,
    pub factors: KruskalTensor,
    /// Multiplier matrix Λ: symmetric, zero diagonal.
    pub lambda: Matrix,
    /// Penalty matrix C: symmetric, zero diagonal, nonnegative entries.
    pub penalty: Matrix,
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct AlmConfig {
    pub rank: usize,
    pub eps_outer: f64,
    pub eps_inner: f64,
    pub max_outer: usize,
    pub mu0: f64,
    pub mu_growth: f64,
    pub inner: LbfgsConfig,
}

impl AlmConfig {
    /// Defaults used for the synthetic experiments.
    pub fn new(rank: usize) -> Self {
        AlmConfig {
            rank,
            eps_outer: 1e-4,
            eps_inner: 1e-4,
            max_outer: 25,
            mu0: 1.0,
            mu_growth: 10.0,
            inner: LbfgsConfig::default(),
        }
    }

    /// Looser tolerances recommended for inputs above a million entries.
    pub fn for_tensor(rank: usize, a: &DenseTensor) -> Self {
        let mut cfg = AlmConfig::new(rank);
        if a.len() > 1_000_000 {
            cfg.eps_outer = 1e-3;
            cfg.eps_inner = 1e-3;
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterStop {
    /// theta fell below eps_outer.
    Tolerance,
    /// The outer iteration cap was reached.
    Cap,
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub k: usize,
    pub theta: f64,
    pub rel_change: f64,
    pub inner_iters: usize,
    pub rerr: f64,
    pub seconds: f64,
}

/// Per-outer-iteration diagnostics of a fit.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub stop_reason: OuterStop,
    /// Inner-solver starting vector of each outer iteration (warm starts).
    pub inner_starts: Vec<Vec<f64>>,
    /// Component norms delta_r after each rebalancing.
    pub deltas: Vec<Vec<f64>>,
    /// mu used by each outer iteration.
    pub mus: Vec<f64>,
}

impl Default for RunTrace {
    fn default() -> Self {
        RunTrace {
            rows: Vec::new(),
            stop_reason: OuterStop::Cap,
            inner_starts: Vec::new(),
            deltas: Vec::new(),
            mus: Vec::new(),
        }
    }
}

/// Flattens factors mode-major: all R columns of mode 1, then mode 2, ...
fn pack(factors: &[Matrix]) -> Vec<f64> {
    let mut x = Vec::with_capacity(factors.iter().map(|f| f.data().len()).sum());
    for f in factors {
        x.extend_from_slice(f.data());
    }
    x
}

fn unpack(x: &[f64], dims: &[usize], rank: usize) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(dims.len());
    let mut off = 0;
    for &d in dims {
        let len = d * rank;
        out.push(Matrix::from_col_major(d, rank, &x[off..off + len]).expect("packed layout"));
        off += len;
    }
    out
}

struct AlmProblem<'a> {
    dims: Vec<usize>,
    rank: usize,
    lambda: &'a Matrix,
    penalty: &'a Matrix,
    norm_a2: f64,
    /// Mode-n unfoldings of the data tensor, cached across evaluations.
    unfolds: Vec<Matrix>,
}

impl<'a> AlmProblem<'a> {
    fn new(a: &DenseTensor, rank: usize, lambda: &'a Matrix, penalty: &'a Matrix) -> Self {
        let na = norm(a);
        let unfolds = (0..a.ndim())
            .map(|n| unfold(a, n).expect("valid mode"))
            .collect();
        AlmProblem {
            dims: a.dims().to_vec(),
            rank,
            lambda,
            penalty,
            norm_a2: na * na,
            unfolds,
        }
    }

    /// `W^(n) = A_(n) V^(-n)` via the cached unfolding.
    fn w(&self, factors: &[Matrix], n: usize) -> Matrix {
        let order: Vec<&Matrix> = (0..self.dims.len())
            .rev()
            .filter(|&m| m != n)
            .map(|m| &factors[m])
            .collect();
        let kr = khatri_rao(&order).expect("consistent ranks");
        self.unfolds[n].matmul(&kr).expect("consistent shapes")
    }

    /// Value and per-mode gradient blocks at the packed point.
    fn eval_parts(&self, factors: &[Matrix], grad_out: Option<&mut [f64]>) -> f64 {
        let nmodes = self.dims.len();
        let r = self.rank;
        let grams: Vec<Matrix> = factors.iter().map(|f| f.gram()).collect();
        // gamma_omit[n] = Hadamard of all grams except mode n
        let ones = Matrix::from_fn(r, r, |_, _| 1.0);
        let gamma_omit: Vec<Matrix> = (0..nmodes)
            .map(|n| {
                let mut g = ones.clone();
                for (m, gm) in grams.iter().enumerate() {
                    if m != n {
                        g = g.hadamard(gm).expect("square");
                    }
                }
                g
            })
            .collect();
        let gamma_all = gamma_omit[0].hadamard(&grams[0]).expect("square");

        let w0 = self.w(factors, 0);
        let mut inner_ab = 0.0;
        for j in 0..r {
            inner_ab += crate::matrix::dot(factors[0].col(j), w0.col(j));
        }
        let bb: f64 = gamma_all.data().iter().sum();
        let mut f = 0.5 * self.norm_a2 - inner_ab + 0.5 * bb;
        for t in 0..r {
            for s in 0..r {
                if s == t {
                    continue;
                }
                let p = gamma_all.get(s, t);
                f += 0.5 * self.lambda.get(s, t) * p + 0.25 * self.penalty.get(s, t) * p * p;
            }
        }

        if let Some(grad) = grad_out {
            let mut off = 0;
            for n in 0..nmodes {
                let w = if n == 0 { w0.clone() } else { self.w(factors, n) };
                // M = Gamma + Gamma.Lambda + Gamma.Gamma.Gram_n.C
                let gm = &gamma_omit[n];
                let mut m = gm.clone();
                for t in 0..r {
                    for s in 0..r {
                        let g = gm.get(s, t);
                        let extra = g * self.lambda.get(s, t)
                            + g * g * grams[n].get(s, t) * self.penalty.get(s, t);
                        m.add_assign_at(s, t, extra);
                    }
                }
                let vm = factors[n].matmul(&m).expect("shapes");
                let len = self.dims[n] * r;
                for (g, (wv, vv)) in grad[off..off + len]
                    .iter_mut()
                    .zip(w.data().iter().zip(vm.data()))
                {
                    *g = vv - wv;
                }
                off += len;
            }
        }
        f
    }
}

impl Objective for AlmProblem<'_> {
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let factors = unpack(x, &self.dims, self.rank);
        self.eval_parts(&factors, Some(grad))
    }
}

/// Augmented Lagrangian value at a state.
pub fn objective(a: &DenseTensor, s: &AlmState) -> f64 {
    let p = AlmProblem::new(a, s.factors.rank(), &s.lambda, &s.penalty);
    p.eval_parts(&s.factors.factors, None)
}

/// Per-mode gradient blocks (I_n x R) of the augmented Lagrangian.
pub fn gradient(a: &DenseTensor, s: &AlmState) -> Vec<Matrix> {
    let p = AlmProblem::new(a, s.factors.rank(), &s.lambda, &s.penalty);
    let n: usize = a.dims().iter().map(|d| d * s.factors.rank()).sum();
    let mut g = vec![0.0; n];
    p.eval_parts(&s.factors.factors, Some(&mut g));
    unpack(&g, a.dims(), s.factors.rank())
}

/// Per-pair penalty weights `C = mu h' h` with `h_r = 1/delta_r^2`,
/// zero diagonal. `delta_floor` guards the division.
pub fn penalty_matrix(factors: &KruskalTensor, mu: f64, delta_floor: f64) -> Result<Matrix> {
    let deltas = factors.component_norms();
    for (r, &d) in deltas.iter().enumerate() {
        if d < delta_floor {
            return Err(Error::DegenerateComponent {
                component: r,
                detail: format!("component norm {:e} below floor {:e}", d, delta_floor),
            });
        }
    }
    let rank = factors.rank();
    let h: Vec<f64> = deltas.iter().map(|d| 1.0 / (d * d)).collect();
    let mut c = Matrix::from_fn(rank, rank, |s, t| mu * h[s] * h[t]);
    for r in 0..rank {
        c.set(r, r, 0.0);
    }
    Ok(c)
}

/// First-order multiplier update:
/// `lambda_st += c_st prod_n <v_s^(n), v_t^(n)>`, diagonal untouched.
pub fn update_multipliers(s: &AlmState) -> Matrix {
    let gh = gram_hadamard(&s.factors, None);
    let r = s.factors.rank();
    let mut lam = s.lambda.clone();
    for t in 0..r {
        for si in 0..r {
            if si == t {
                continue;
            }
            lam.add_assign_at(si, t, s.penalty.get(si, t) * gh.get(si, t));
        }
    }
    lam
}

/// Outer loop: rebalance, rebuild penalties, minimize the augmented
/// Lagrangian warm-started at the previous solution, update multipliers,
/// grow mu; stop when theta drops below `eps_outer` or at the cap.
///
/// Returns the final factors (not yet exactly orthogonal) and the trace.
/// Trace `rerr` is measured after orthogonalization + projection each
/// iteration for reporting; the solver state itself is never modified.
pub fn od_alm_fit(
    a: &DenseTensor,
    cfg: &AlmConfig,
    init: &KruskalTensor,
) -> Result<(KruskalTensor, RunTrace)> {
    if init.rank() != cfg.rank {
        return Err(Error::ShapeMismatch(format!(
            "init has rank {}, config expects {}",
            init.rank(),
            cfg.rank
        )));
    }
    let start = Instant::now();
    let norm_a = norm(a);
    let delta_floor = 1e-12 * norm_a;
    let rank = cfg.rank;

    // fold any explicit weights into the first mode so the state is plain
    let mut factors = init.factors.clone();
    if init.weights.is_some() {
        for r in 0..rank {
            let w = init.weight(r);
            factors[0].scale_col(r, w);
        }
    }
    let mut current = KruskalTensor::new(factors, None)?;

    let mut lambda = Matrix::zeros(rank, rank);
    let mut mu = cfg.mu0;
    let mut inner_cfg = cfg.inner.clone();
    inner_cfg.grad_per_entry_tol = cfg.eps_inner;

    let mut trace = RunTrace::default();
    for k in 1..=cfg.max_outer {
        current = rebalance(&current);
        let penalty = penalty_matrix(&current, mu, delta_floor)?;
        trace.deltas.push(current.component_norms());
        trace.mus.push(mu);

        let x0 = pack(&current.factors);
        trace.inner_starts.push(x0.clone());
        let problem = AlmProblem::new(a, rank, &lambda, &penalty);
        let report = lbfgs_minimize(&problem, &x0, &inner_cfg)?;
        let new_factors = unpack(&report.x_final, a.dims(), rank);
        current = KruskalTensor::new(new_factors, None)?;

        let state = AlmState {
            k,
            factors: current.clone(),
            lambda: lambda.clone(),
            penalty: penalty.clone(),
            mu,
        };
        lambda = update_multipliers(&state);
        mu *= cfg.mu_growth;

        let th = theta(&current)?;
        let dx: f64 = report
            .x_final
            .iter()
            .zip(&x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let x0n: f64 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel_change = if x0n > 0.0 { dx / x0n } else { dx };
        let rerr = orthogonalize(&current)
            .and_then(|l| project(a, &l))
            .and_then(|l| relative_error(a, &to_kruskal(&l)))
            .or_else(|_| relative_error(a, &current))?;
        trace.rows.push(TraceRow {
            k,
            theta: th,
            rel_change,
            inner_iters: report.iterations,
            rerr,
            seconds: start.elapsed().as_secs_f64(),
        });
        if th < cfg.eps_outer {
            trace.stop_reason = OuterStop::Tolerance;
            break;
        }
    }
    Ok((current, trace))
}
