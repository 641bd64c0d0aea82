//! Kruskal (factor-matrix) representation of a sum of rank-one tensors and
//! the orthogonality diagnostics defined on it.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::tensor::{increment_index, norm, DenseTensor};

/// `sum_r w_r * v_r^(1) (x) ... (x) v_r^(N)` held as one `I_n x R` matrix per
/// mode, with optional per-component weights (absent means all ones).
#[derive(Debug, Clone)]
pub struct KruskalTensor {
    pub factors: Vec<Matrix>,
    pub weights: Option<Vec<f64>>,
}

impl KruskalTensor {
    pub fn new(factors: Vec<Matrix>, weights: Option<Vec<f64>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::ShapeMismatch("kruskal tensor needs >= 1 mode".into()));
        }
        let r = factors[0].cols();
        if r == 0 || factors.iter().any(|f| f.cols() != r) {
            return Err(Error::ShapeMismatch(
                "factor matrices must share a positive column count".into(),
            ));
        }
        if let Some(w) = &weights {
            if w.len() != r {
                return Err(Error::ShapeMismatch(format!(
                    "{} weights for rank {}",
                    w.len(),
                    r
                )));
            }
        }
        Ok(KruskalTensor { factors, weights })
    }

    pub fn ndim(&self) -> usize {
        self.factors.len()
    }

    pub fn rank(&self) -> usize {
        self.factors[0].cols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    pub fn weight(&self, r: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[r])
    }

    /// `delta_r = prod_n ||v_r^(n)||` for every component (weights excluded).
    pub fn component_norms(&self) -> Vec<f64> {
        (0..self.rank())
            .map(|r| self.factors.iter().map(|f| f.col_norm(r)).product())
            .collect()
    }
}

/// Dense tensor of the Kruskal sum.
pub fn reconstruct(k: &KruskalTensor) -> DenseTensor {
    let dims = k.dims();
    let mut out = DenseTensor::zeros(&dims);
    let nmodes = k.ndim();
    let mut idx = vec![0usize; nmodes];
    let values = out.values_mut();
    for v in values.iter_mut() {
        let mut acc = 0.0;
        for r in 0..k.rank() {
            let mut p = k.weight(r);
            for (n, f) in k.factors.iter().enumerate() {
                p *= f.get(idx[n], r);
            }
            acc += p;
        }
        *v = acc;
        increment_index(&mut idx, &dims);
    }
    out
}

/// Hadamard product of the per-mode Gram matrices, optionally skipping one
/// mode (an empty product is the all-ones matrix).
pub fn gram_hadamard(k: &KruskalTensor, omit: Option<usize>) -> Matrix {
    let r = k.rank();
    let mut out = Matrix::from_fn(r, r, |_, _| 1.0);
    for (n, f) in k.factors.iter().enumerate() {
        if Some(n) == omit {
            continue;
        }
        let g = f.gram();
        for (o, gv) in out.data_mut().iter_mut().zip(g.data()) {
            *o *= gv;
        }
    }
    out
}

/// Matrix of inner products between weighted components:
/// entry (s, t) is `<w_s T_s, w_t T_t>`.
pub fn pairwise_inner(k: &KruskalTensor) -> Matrix {
    let mut m = gram_hadamard(k, None);
    let r = k.rank();
    for t in 0..r {
        for s in 0..r {
            let v = m.get(s, t) * k.weight(s) * k.weight(t);
            m.set(s, t, v);
        }
    }
    m
}

/// Checks pairwise orthogonality of the components at a relative tolerance.
/// Returns the verdict and the largest off-diagonal magnitude found.
pub fn is_orthogonal(k: &KruskalTensor, tol: f64) -> (bool, f64) {
    let pi = pairwise_inner(k);
    let max_off = pi.max_abs_offdiag();
    let mut max_diag = 0.0_f64;
    for r in 0..k.rank() {
        max_diag = max_diag.max(pi.get(r, r).abs());
    }
    let scale = if max_diag == 0.0 { 1.0 } else { max_diag };
    (max_off <= tol * scale, max_off)
}

/// Rescales every component so all its mode vectors share the norm
/// `delta_r^(1/N)`; the reconstructed tensor is unchanged. Components with
/// `delta_r = 0` are zeroed in every mode.
pub fn rebalance(k: &KruskalTensor) -> KruskalTensor {
    let nmodes = k.ndim();
    let mut factors = k.factors.clone();
    for r in 0..k.rank() {
        let delta: f64 = factors.iter().map(|f| f.col_norm(r)).product();
        if delta == 0.0 {
            for f in &mut factors {
                for v in f.col_mut(r) {
                    *v = 0.0;
                }
            }
            continue;
        }
        let target = delta.powf(1.0 / nmodes as f64);
        for f in &mut factors {
            let nrm = f.col_norm(r);
            f.scale_col(r, target / nrm);
        }
    }
    KruskalTensor {
        factors,
        weights: k.weights.clone(),
    }
}

/// Norm of the Kruskal sum without forming the dense tensor.
pub fn kruskal_norm(k: &KruskalTensor) -> f64 {
    let pi = pairwise_inner(k);
    let total: f64 = pi.data().iter().sum();
    total.max(0.0).sqrt()
}

/// `||a - reconstruct(k)|| / ||a||`.
pub fn relative_error(a: &DenseTensor, k: &KruskalTensor) -> Result<f64> {
    let na = norm(a);
    if na == 0.0 {
        return Err(Error::Domain(
            "relative error of a zero tensor is undefined".into(),
        ));
    }
    let rec = reconstruct(k);
    let diff = a.sub(&rec)?;
    Ok(norm(&diff) / na)
}

/// Max over component pairs of the min over modes of the absolute normalized
/// factor inner products; the outer-loop termination statistic.
pub fn theta(k: &KruskalTensor) -> Result<f64> {
    let r = k.rank();
    if r == 1 {
        return Ok(0.0);
    }
    let nmodes = k.ndim();
    let mut norms = vec![vec![0.0; r]; nmodes];
    for (n, f) in k.factors.iter().enumerate() {
        for j in 0..r {
            norms[n][j] = f.col_norm(j);
            if norms[n][j] == 0.0 {
                return Err(Error::DegenerateComponent {
                    component: j,
                    detail: format!("zero-norm vector in mode {}", n),
                });
            }
        }
    }
    let mut worst = 0.0_f64;
    for s in 0..r {
        for t in (s + 1)..r {
            let mut best = f64::INFINITY;
            for (n, f) in k.factors.iter().enumerate() {
                let c = dot(f.col(s), f.col(t)).abs() / (norms[n][s] * norms[n][t]);
                best = best.min(c);
            }
            worst = worst.max(best);
        }
    }
    Ok(worst)
}
