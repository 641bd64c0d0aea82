//! Post-processing: turn an approximate solution into an exactly
//! orthonormal list of rank-one tensors, then project the data tensor onto
//! their span.
//!
//! Components are processed in order; for each earlier component the mode
//! whose vectors are already closest to orthogonal is selected, and a
//! Gram-Schmidt-style correction in that mode zeroes the remaining inner
//! product. Orthogonality established for earlier pairs is never disturbed,
//! because later steps only modify the current component.

use crate::error::{Error, Result};
use crate::kruskal::KruskalTensor;
use crate::matrix::{dot, pinv_sym, Matrix};
use crate::tensor::{inner_with_rank_one, DenseTensor};

/// Unit-norm rank-one basis: factor matrices with unit columns whose
/// rank-one tensors are pairwise orthogonal; `sigma` holds projection
/// coefficients once `project` has run.
#[derive(Debug, Clone)]
pub struct OrthonormalRankOneList {
    pub factors: Vec<Matrix>,
    pub sigma: Option<Vec<f64>>,
}

impl OrthonormalRankOneList {
    pub fn ndim(&self) -> usize {
        self.factors.len()
    }

    pub fn rank(&self) -> usize {
        self.factors[0].cols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }
}

/// View as a weighted Kruskal tensor (weights = sigma when present).
pub fn to_kruskal(list: &OrthonormalRankOneList) -> KruskalTensor {
    KruskalTensor {
        factors: list.factors.clone(),
        weights: list.sigma.clone(),
    }
}

/// Removes from column `l` of `u` its projection onto the span of the
/// columns `b_idx`, via the normal equations with a rank-revealing solve.
fn project_out(u: &mut Matrix, l: usize, b_idx: &[usize]) -> Result<()> {
    let b = u.select_cols(b_idx);
    let btb = b.gram();
    let pinv = pinv_sym(&btb, 1e-12)?;
    // one extra pass of the same projection cleans up roundoff
    for _ in 0..2 {
        let rows = u.rows();
        let mut btu = Matrix::zeros(b_idx.len(), 1);
        for (j, &c) in b_idx.iter().enumerate() {
            btu.set(j, 0, dot(u.col(c), u.col(l)));
        }
        let x = pinv.matmul(&btu)?;
        for (j, &c) in b_idx.iter().enumerate() {
            let xj = x.get(j, 0);
            for i in 0..rows {
                let v = u.get(i, l) - xj * u.get(i, c);
                u.set(i, l, v);
            }
        }
    }
    Ok(())
}

/// Orthogonalizes the components of `k` into an orthonormal rank-one list
/// (sigma unset). Weights are ignored: only directions matter here.
pub fn orthogonalize(k: &KruskalTensor) -> Result<OrthonormalRankOneList> {
    let nmodes = k.ndim();
    let rank = k.rank();
    let mut u: Vec<Matrix> = k.factors.clone();
    for (n, f) in u.iter_mut().enumerate() {
        for r in 0..rank {
            let nrm = f.col_norm(r);
            if nrm == 0.0 {
                return Err(Error::DegenerateComponent {
                    component: r,
                    detail: format!("zero-norm vector in mode {}", n),
                });
            }
            f.scale_col(r, 1.0 / nrm);
        }
    }

    for l in 1..rank {
        // all of P is computed from the unmodified component l
        let mut p = Matrix::zeros(nmodes, l);
        for n in 0..nmodes {
            for r in 0..l {
                p.set(n, r, dot(u[n].col(l), u[n].col(r)).abs());
            }
        }
        // mode assignment: smallest entry per earlier component, ties to
        // the lowest mode index
        let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); nmodes];
        for r in 0..l {
            let mut best = 0;
            for n in 1..nmodes {
                if p.get(n, r) < p.get(best, r) {
                    best = n;
                }
            }
            assigned[best].push(r);
        }
        for n in 0..nmodes {
            if assigned[n].is_empty() {
                continue;
            }
            project_out(&mut u[n], l, &assigned[n])?;
            let nrm = u[n].col_norm(l);
            if nrm < 1e-10 {
                // the vector lay in span(B): substitute the first standard
                // basis vector with a nonzero orthogonal remainder
                if assigned[n].len() >= u[n].rows() {
                    return Err(Error::Infeasible(format!(
                        "no orthogonal direction left in mode {} (dimension {})",
                        n,
                        u[n].rows()
                    )));
                }
                let rows = u[n].rows();
                let mut done = false;
                for e in 0..rows {
                    for i in 0..rows {
                        u[n].set(i, l, if i == e { 1.0 } else { 0.0 });
                    }
                    project_out(&mut u[n], l, &assigned[n])?;
                    if u[n].col_norm(l) > 1e-6 {
                        done = true;
                        break;
                    }
                }
                if !done {
                    return Err(Error::Internal(format!(
                        "failed to complete an orthogonal direction in mode {}",
                        n
                    )));
                }
            }
            let nrm = u[n].col_norm(l);
            u[n].scale_col(l, 1.0 / nrm);
        }
    }

    Ok(OrthonormalRankOneList {
        factors: u,
        sigma: None,
    })
}

/// Sets `sigma[r] = <a, (x)_n u_r^(n)>`, the coefficients of the orthogonal
/// projection of `a` onto the span of the list.
pub fn project(a: &DenseTensor, list: &OrthonormalRankOneList) -> Result<OrthonormalRankOneList> {
    let rank = list.rank();
    let mut sigma = Vec::with_capacity(rank);
    for r in 0..rank {
        let cols: Vec<&[f64]> = list.factors.iter().map(|f| f.col(r)).collect();
        sigma.push(inner_with_rank_one(a, &cols)?);
    }
    Ok(OrthonormalRankOneList {
        factors: list.factors.clone(),
        sigma: Some(sigma),
    })
}
