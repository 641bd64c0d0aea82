//! CP alternating least squares: the baseline fit and the initializer for
//! the constrained solver.

use crate::alm::{RunTrace, TraceRow};
use crate::error::Result;
use crate::kruskal::{gram_hadamard, KruskalTensor};
use crate::matrix::{pinv_sym, svd_left, Matrix};
use crate::tensor::{khatri_rao, norm, unfold, DenseTensor};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlsInit {
    TruncatedHosvd,
    Random(u64),
}

#[derive(Debug, Clone)]
pub struct AlsConfig {
    pub rank: usize,
    pub max_iters: usize,
    /// Stop when the relative change of `0.5 ||a - B||^2` over one sweep
    /// falls below this.
    pub rel_fn_tol: f64,
    pub init: AlsInit,
}

impl AlsConfig {
    /// Settings used when the result seeds the constrained solver.
    pub fn initializer(rank: usize) -> Self {
        AlsConfig {
            rank,
            max_iters: 500,
            rel_fn_tol: 1e-6,
            init: AlsInit::TruncatedHosvd,
        }
    }

    /// Settings used when CP-ALS is the method under comparison.
    pub fn baseline(rank: usize) -> Self {
        AlsConfig {
            rel_fn_tol: 1e-8,
            ..AlsConfig::initializer(rank)
        }
    }
}

/// Truncated-HOSVD starting point: per mode, the leading `min(R, I_n)` left
/// singular vectors of the unfolding. When `R` exceeds a mode dimension the
/// remaining columns are filled with deterministic random unit vectors (no
/// more than `I_n` mutually orthonormal columns can exist).
pub fn hosvd_init(a: &DenseTensor, rank: usize) -> Result<KruskalTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0d_a15e_ed);
    let mut factors = Vec::with_capacity(a.ndim());
    for n in 0..a.ndim() {
        let dim = a.dims()[n];
        let (u, _sv) = svd_left(&unfold(a, n)?)?;
        let mut f = Matrix::zeros(dim, rank);
        for r in 0..rank {
            if r < dim {
                f.col_mut(r).copy_from_slice(u.col(r));
            } else {
                let mut nrm = 0.0;
                while nrm == 0.0 {
                    for v in f.col_mut(r) {
                        *v = rng.sample(StandardNormal);
                    }
                    nrm = f.col_norm(r);
                }
                f.scale_col(r, 1.0 / nrm);
            }
        }
        factors.push(f);
    }
    KruskalTensor::new(factors, None)
}

fn random_init(a: &DenseTensor, rank: usize, seed: u64) -> Result<KruskalTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = a
        .dims()
        .iter()
        .map(|&dim| Matrix::from_fn(dim, rank, |_, _| rng.sample(StandardNormal)))
        .collect();
    KruskalTensor::new(factors, None)
}

/// Alternating least squares for `min 0.5 ||a - [[V^(1),...,V^(N)]]||^2`.
///
/// Each mode update is the exact least-squares solve
/// `V^(n) <- mttkrp(a, V, n) pinv(Gamma^(n))`, so the objective is
/// nonincreasing per half-sweep. Returns the fit and a per-sweep trace.
pub fn als_fit(a: &DenseTensor, cfg: &AlsConfig) -> Result<(KruskalTensor, RunTrace)> {
    let start = Instant::now();
    let mut k = match cfg.init {
        AlsInit::TruncatedHosvd => hosvd_init(a, cfg.rank)?,
        AlsInit::Random(seed) => random_init(a, cfg.rank, seed)?,
    };
    let nmodes = k.ndim();
    let norm_a = norm(a);
    let norm_a2 = norm_a * norm_a;
    let unfolds: Vec<Matrix> = (0..nmodes).map(|n| unfold(a, n)).collect::<Result<_>>()?;

    let mut trace = RunTrace::default();
    let mut f_prev = f64::INFINITY;
    for sweep in 1..=cfg.max_iters {
        let mut inner_ab = 0.0;
        for n in 0..nmodes {
            let order: Vec<&Matrix> = (0..nmodes)
                .rev()
                .filter(|&m| m != n)
                .map(|m| &k.factors[m])
                .collect();
            let w = unfolds[n].matmul(&khatri_rao(&order)?)?;
            let gamma = gram_hadamard(&k, Some(n));
            k.factors[n] = w.matmul(&pinv_sym(&gamma, 1e-12)?)?;
            if n == nmodes - 1 {
                // <a, B> = tr(V^(n)' W^(n)) at the freshly solved mode
                for r in 0..cfg.rank {
                    inner_ab += crate::matrix::dot(k.factors[n].col(r), w.col(r));
                }
            }
        }
        // renormalize columns, absorbing norms into the last-updated mode
        // (B itself is unchanged, so <a,B> computed above stays valid)
        for r in 0..cfg.rank {
            let mut prod = 1.0;
            for n in 0..nmodes - 1 {
                let nrm = k.factors[n].col_norm(r);
                if nrm > 0.0 {
                    k.factors[n].scale_col(r, 1.0 / nrm);
                    prod *= nrm;
                }
            }
            k.factors[nmodes - 1].scale_col(r, prod);
        }
        let bb: f64 = gram_hadamard(&k, None).data().iter().sum();
        // function value of the fitting problem: ||a - B||
        let f = (norm_a2 - 2.0 * inner_ab + bb).max(0.0).sqrt();
        let rel = (f_prev - f).abs() / f_prev.abs().max(1e-300);
        let rerr = if norm_a > 0.0 { f / norm_a } else { 0.0 };
        trace.rows.push(TraceRow {
            k: sweep,
            theta: 0.0,
            rel_change: rel,
            inner_iters: 0,
            rerr,
            seconds: start.elapsed().as_secs_f64(),
        });
        // second clause: the residual is below what the cancellation in
        // ||a||^2 - 2<a,B> + ||B||^2 can resolve (~sqrt(eps) ||a||), where
        // the relative-change test only sees noise
        if rel < cfg.rel_fn_tol || f <= 1e-7 * norm_a {
            break;
        }
        f_prev = f;
    }
    Ok((k, trace))
}
