//! Rank diagnostics and constructive decompositions: k-rank, the Kruskal
//! uniqueness certificate, a fiber-based orthogonal decomposition, and the
//! counterexample constructors separating rank from orthogonal rank.

use crate::error::{Error, Result};
use crate::kruskal::KruskalTensor;
use crate::matrix::{svd_left, sym_eig, Matrix};
use crate::tensor::{hosvd, norm, DenseTensor};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct RankCertificate {
    pub krank_per_mode: Vec<usize>,
    pub uniqueness_holds: bool,
    /// Sum of the per-mode k-ranks.
    pub bound_lhs: usize,
    /// `2R + N - 1`.
    pub bound_rhs: usize,
}

fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    Ok(svd_left(m)?.1)
}

/// Visits all `size`-subsets of `0..n` in lexicographic order.
fn for_each_subset(n: usize, size: usize, mut visit: impl FnMut(&[usize]) -> bool) -> bool {
    let mut idx: Vec<usize> = (0..size).collect();
    if size > n {
        return true;
    }
    loop {
        if !visit(&idx) {
            return false;
        }
        // advance
        let mut i = size;
        loop {
            if i == 0 {
                return true;
            }
            i -= 1;
            if idx[i] != i + n - size {
                break;
            }
            if i == 0 {
                return true;
            }
        }
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Largest k such that every k columns of `m` are (numerically) linearly
/// independent: each subset's smallest singular value must exceed
/// `tol * largest`. Exhaustive over subsets; intended for small col counts.
pub fn k_rank(m: &Matrix, tol: f64) -> Result<usize> {
    let cols = m.cols();
    if cols == 0 {
        return Ok(0);
    }
    let max_col_norm = (0..cols).map(|j| m.col_norm(j)).fold(0.0, f64::max);
    for j in 0..cols {
        if m.col_norm(j) <= tol * max_col_norm {
            return Ok(0); // a numerically zero column
        }
    }
    for size in 1..=cols {
        if size > m.rows() {
            return Ok(size - 1);
        }
        let mut all_pass = true;
        for_each_subset(cols, size, |idx| {
            let sub = m.select_cols(idx);
            let sv = singular_values(&sub).expect("svd of a small subset");
            let (hi, lo) = (sv[0], sv[sv.len() - 1]);
            if lo <= tol * hi {
                all_pass = false;
                return false;
            }
            true
        });
        if !all_pass {
            return Ok(size - 1);
        }
    }
    Ok(cols)
}

/// Kruskal's sufficient condition for essential uniqueness:
/// `sum_n k-rank(V^(n)) >= 2R + N - 1`.
pub fn uniqueness_certificate(k: &KruskalTensor) -> Result<RankCertificate> {
    let mut kranks = Vec::with_capacity(k.ndim());
    for f in &k.factors {
        kranks.push(k_rank(f, 1e-10)?);
    }
    let lhs: usize = kranks.iter().sum();
    let rhs = 2 * k.rank() + k.ndim() - 1;
    Ok(RankCertificate {
        uniqueness_holds: lhs >= rhs,
        bound_lhs: lhs,
        bound_rhs: rhs,
        krank_per_mode: kranks,
    })
}

/// Constructive orthogonal decomposition through the HOSVD core: each
/// nonzero mode-`m` fiber of the core, tensored with standard basis vectors
/// in the other modes and mapped through the orthogonal factors, is one
/// component. Yields at most `prod_{n != m} nranks[n]` components.
pub fn fiber_orthogonal_decomposition(
    a: &DenseTensor,
    m: usize,
    eps: f64,
) -> Result<KruskalTensor> {
    let nmodes = a.ndim();
    if m >= nmodes {
        return Err(Error::Domain(format!(
            "mode {} out of range for a {}-way tensor",
            m, nmodes
        )));
    }
    let h = hosvd(a, eps)?;
    let dims = a.dims();
    let drop_tol = 1e-13 * norm(a);

    // enumerate core positions with i_m = 0 and i_n < nranks[n] elsewhere
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut idx = vec![0usize; nmodes];
    loop {
        components.push(idx.clone());
        // odometer over modes != m bounded by nranks
        let mut n = 0;
        loop {
            if n == m {
                n += 1;
                if n >= nmodes {
                    break;
                }
            }
            idx[n] += 1;
            if idx[n] < h.nranks[n] {
                break;
            }
            idx[n] = 0;
            n += 1;
            if n >= nmodes {
                break;
            }
        }
        if idx.iter().all(|&v| v == 0) {
            break;
        }
    }

    let mut kept: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    for pos in &components {
        let mut fiber = vec![0.0; dims[m]];
        let mut p = pos.clone();
        for (i, f) in fiber.iter_mut().enumerate() {
            p[m] = i;
            *f = h.core.at(&p);
        }
        let nrm = crate::matrix::dot(&fiber, &fiber).sqrt();
        if nrm > drop_tol {
            kept.push((pos.clone(), fiber));
        }
    }
    if kept.is_empty() {
        // zero tensor: represent with a single zero component
        kept.push((vec![0; nmodes], vec![0.0; dims[m]]));
    }

    let rank = kept.len();
    let mut factors: Vec<Matrix> = dims.iter().map(|&d| Matrix::zeros(d, rank)).collect();
    for (r, (pos, fiber)) in kept.iter().enumerate() {
        for n in 0..nmodes {
            if n == m {
                // U_m * fiber
                for i in 0..dims[m] {
                    let mut acc = 0.0;
                    for (j, fj) in fiber.iter().enumerate() {
                        acc += h.factors[m].get(i, j) * fj;
                    }
                    factors[n].set(i, r, acc);
                }
            } else {
                // column pos[n] of the orthogonal factor U_n
                factors[n].col_mut(r).copy_from_slice(h.factors[n].col(pos[n]));
            }
        }
    }
    KruskalTensor::new(factors, None)
}

/// Random full-column-rank factors whose Gram-Hadamard matrix is not
/// diagonal: a tensor whose rank is provably below its orthogonal rank.
pub fn make_nonorthogonal_unique(dims: &[usize], rank: usize, seed: u64) -> Result<KruskalTensor> {
    if rank < 2 {
        return Err(Error::Domain("rank must be at least 2".into()));
    }
    if dims.iter().any(|&d| d < rank) {
        return Err(Error::Infeasible(format!(
            "rank {} exceeds the smallest dimension of {:?}",
            rank, dims
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let factors: Vec<Matrix> = dims
            .iter()
            .map(|&d| Matrix::from_fn(d, rank, |_, _| rng.sample(StandardNormal)))
            .collect();
        let full_rank = factors.iter().all(|f| {
            let sv = singular_values(f).expect("svd");
            sv[sv.len() - 1] > 1e-6 * sv[0]
        });
        if !full_rank {
            continue;
        }
        let k = KruskalTensor::new(factors, None)?;
        let gh = crate::kruskal::gram_hadamard(&k, None);
        let diag_max = (0..rank).map(|r| gh.get(r, r).abs()).fold(0.0, f64::max);
        if gh.max_abs_offdiag() > 1e-3 * diag_max {
            return Ok(k);
        }
    }
    Err(Error::Internal(
        "failed to sample a certified instance in 100 attempts".into(),
    ))
}

/// Extends mode 1 by stacking `M` with `M'M = tI - V^(1)'V^(1)` for
/// `t = 1.1 * lambda_max`, so the extended mode-1 Gram is exactly `tI`.
/// The input tensor is the leading mode-1 subtensor of the result.
pub fn subtensor_extension(k: &KruskalTensor) -> Result<KruskalTensor> {
    let v1 = &k.factors[0];
    let g = v1.gram();
    let (evals, q) = sym_eig(&g)?;
    let t = 1.1 * evals[0].max(0.0);
    // M = diag(sqrt(t - lambda)) Q'
    let rank = k.rank();
    let mut m = Matrix::zeros(rank, rank);
    for i in 0..rank {
        let resid = t - evals[i];
        if resid < -1e-10 * t.max(1.0) {
            return Err(Error::Internal(format!(
                "residual eigenvalue {:e} negative after shift",
                resid
            )));
        }
        let s = resid.max(0.0).sqrt();
        for j in 0..rank {
            m.set(i, j, s * q.get(j, i));
        }
    }
    let mut factors = k.factors.clone();
    factors[0] = v1.vstack(&m)?;
    KruskalTensor::new(factors, k.weights.clone())
}
