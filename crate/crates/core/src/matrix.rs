//! Dense matrices stored column-major (first index fastest), plus the small
//! set of factorizations the solvers need: symmetric Jacobi eigendecomposition
//! and one-sided Jacobi SVD. Sizes here are at most a few hundred, so
//! robustness wins over speed.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from a flat column-major slice.
    pub fn from_col_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                values.len()
            )));
        }
        Ok(Matrix {
            rows,
            cols,
            data: values.to_vec(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.rows] = v;
    }

    #[inline]
    pub fn add_assign_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.rows] += v;
    }

    /// Column `j` as a contiguous slice.
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        self.col(j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale_col(&mut self, j: usize, s: f64) {
        for v in self.col_mut(j) {
            *v *= s;
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "matmul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let bj = other.col(j);
            let oj = out.col_mut(j);
            for (k, &bkj) in bj.iter().enumerate() {
                if bkj == 0.0 {
                    continue;
                }
                let ak = self.col(k);
                for i in 0..self.rows {
                    oj[i] += ak[i] * bkj;
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix `self^T self`.
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for j in 0..self.cols {
            for i in 0..=j {
                let v = dot(self.col(i), self.col(j));
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "hadamard: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a *= b;
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch("matrix add".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Maximum |entry| off the diagonal. Zero for 1x1 matrices.
    pub fn max_abs_offdiag(&self) -> f64 {
        let mut m = 0.0_f64;
        for j in 0..self.cols {
            for i in 0..self.rows {
                if i != j {
                    m = m.max(self.get(i, j).abs());
                }
            }
        }
        m
    }

    /// Stacks `self` on top of `other` (shared column count).
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch("vstack: column counts differ".into()));
        }
        Ok(Matrix::from_fn(self.rows + other.rows, self.cols, |i, j| {
            if i < self.rows {
                self.get(i, j)
            } else {
                other.get(i - self.rows, j)
            }
        }))
    }

    /// Keeps columns listed in `idx`, in order.
    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, idx.len(), |i, j| self.get(i, idx[j]))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching eigenvector columns.
pub fn sym_eig(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if a.rows != a.cols {
        return Err(Error::ShapeMismatch("sym_eig needs a square matrix".into()));
    }
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m.get(p, q).abs());
            }
        }
        let scale = m.max_abs();
        if off <= 1e-15 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // rotate rows/cols p,q of m
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let eigvals = order.iter().map(|&i| m.get(i, i)).collect();
    Ok((eigvals, v.select_cols(&order)))
}

/// Left singular vectors and singular values of `a` via one-sided Jacobi.
///
/// Returns a square orthogonal `u` (rows x rows) and singular values in
/// descending order, `min(rows, cols)` of them. One-sided Jacobi keeps small
/// singular values accurate relative to the largest, which the numerical-rank
/// thresholds rely on.
pub fn svd_left(a: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let (rows, cols) = (a.rows, a.cols);
    if cols >= rows {
        // Orthogonalize the columns of a^T; the accumulated rotations form
        // the left singular vectors of a.
        let mut b = a.transpose();
        let mut v = Matrix::identity(rows);
        one_sided_jacobi(&mut b, Some(&mut v));
        let mut order: Vec<usize> = (0..rows).collect();
        let norms: Vec<f64> = (0..rows).map(|j| b.col_norm(j)).collect();
        order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
        let sv = order.iter().map(|&j| norms[j]).collect();
        Ok((v.select_cols(&order), sv))
    } else {
        // Fewer columns than rows: orthogonalize the columns of a directly,
        // then complete the normalized columns to a square orthogonal basis.
        let mut b = a.clone();
        one_sided_jacobi(&mut b, None);
        let mut order: Vec<usize> = (0..cols).collect();
        let norms: Vec<f64> = (0..cols).map(|j| b.col_norm(j)).collect();
        order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
        let sv: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
        let smax = sv.first().copied().unwrap_or(0.0);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rows);
        for &j in &order {
            if norms[j] > 1e-14 * smax.max(1e-300) {
                basis.push(b.col(j).iter().map(|x| x / norms[j]).collect());
            }
        }
        complete_orthonormal_basis(&mut basis, rows);
        let u = Matrix::from_fn(rows, rows, |i, j| basis[j][i]);
        Ok((u, sv))
    }
}

/// Orthogonalizes the columns of `b` in place; optionally accumulates the
/// applied rotations into the columns of `v`.
fn one_sided_jacobi(b: &mut Matrix, mut v: Option<&mut Matrix>) {
    let n = b.cols;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (app, aqq, apq) = {
                    let bp = b.col(p);
                    let bq = b.col(q);
                    (dot(bp, bp), dot(bq, bq), dot(bp, bq))
                };
                if apq.abs() <= 1e-15 * (app * aqq).sqrt() || app == 0.0 || aqq == 0.0 {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_cols(b, p, q, c, s);
                if let Some(v) = v.as_deref_mut() {
                    rotate_cols(v, p, q, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate_cols(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let rows = m.rows;
    for i in 0..rows {
        let mp = m.data[i + p * rows];
        let mq = m.data[i + q * rows];
        m.data[i + p * rows] = c * mp - s * mq;
        m.data[i + q * rows] = s * mp + c * mq;
    }
}

/// Extends `basis` (orthonormal vectors of length `dim`) to `dim` vectors by
/// projecting standard basis vectors and keeping the remainders.
pub fn complete_orthonormal_basis(basis: &mut Vec<Vec<f64>>, dim: usize) {
    let mut e = 0;
    while basis.len() < dim && e < dim {
        let mut w = vec![0.0; dim];
        w[e] = 1.0;
        // two Gram-Schmidt passes for stability
        for _ in 0..2 {
            for q in basis.iter() {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 1e-8 {
            for wi in &mut w {
                *wi /= nrm;
            }
            basis.push(w);
        }
        e += 1;
    }
}

/// Pseudoinverse of a symmetric positive semidefinite matrix with a relative
/// eigenvalue cutoff.
pub fn pinv_sym(a: &Matrix, cutoff_rel: f64) -> Result<Matrix> {
    let (vals, vecs) = sym_eig(a)?;
    let n = a.rows;
    let vmax = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        if vals[k].abs() > cutoff_rel * vmax.max(1e-300) {
            let inv = 1.0 / vals[k];
            let ek = vecs.col(k).to_vec();
            for j in 0..n {
                for i in 0..n {
                    out.add_assign_at(i, j, inv * ek[i] * ek[j]);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let i3 = Matrix::identity(3);
        assert_eq!(i3.matmul(&a).unwrap(), a);
    }

    #[test]
    fn sym_eig_diagonalizes() {
        let a = Matrix::from_fn(4, 4, |i, j| 1.0 / ((i + j + 1) as f64));
        let (vals, vecs) = sym_eig(&a).unwrap();
        // reconstruct
        let mut rec = Matrix::zeros(4, 4);
        for k in 0..4 {
            for j in 0..4 {
                for i in 0..4 {
                    rec.add_assign_at(i, j, vals[k] * vecs.get(i, k) * vecs.get(j, k));
                }
            }
        }
        for j in 0..4 {
            for i in 0..4 {
                assert!((rec.get(i, j) - a.get(i, j)).abs() < 1e-12);
            }
        }
        // sorted descending
        for k in 1..4 {
            assert!(vals[k - 1] >= vals[k]);
        }
    }

    #[test]
    fn svd_left_orthogonal_and_accurate() {
        // wide case
        let a = Matrix::from_fn(3, 7, |i, j| ((i + 1) * (j + 2)) as f64 / (1.0 + (i * j) as f64));
        let (u, sv) = svd_left(&a).unwrap();
        let utu = u.gram();
        for j in 0..3 {
            for i in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((utu.get(i, j) - expect).abs() < 1e-12);
            }
        }
        // singular values: compare Frobenius norm
        let frob2: f64 = sv.iter().map(|s| s * s).sum();
        assert!((frob2 - a.frob_norm().powi(2)).abs() < 1e-9 * a.frob_norm().powi(2));

        // tall case
        let b = a.transpose();
        let (ub, svb) = svd_left(&b).unwrap();
        assert_eq!(ub.rows(), 7);
        assert_eq!(svb.len(), 3);
        let utub = ub.gram();
        for j in 0..7 {
            for i in 0..7 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((utub.get(i, j) - expect).abs() < 1e-10);
            }
        }
        for (x, y) in sv.iter().zip(&svb) {
            assert!((x - y).abs() < 1e-9 * sv[0]);
        }
    }

    #[test]
    fn svd_left_rank_one_resolves_tiny_rank() {
        // Gram-based SVD would report spurious singular values ~1e-8 here;
        // one-sided Jacobi must keep them at the noise floor.
        let u = [1.0, 2.0, -0.5, 0.25];
        let v: Vec<f64> = (0..9).map(|j| ((j * j) as f64).cos()).collect();
        let a = Matrix::from_fn(4, 9, |i, j| u[i] * v[j]);
        let (_, sv) = svd_left(&a).unwrap();
        assert!(sv[0] > 0.0);
        for s in &sv[1..] {
            assert!(s / sv[0] < 1e-13, "spurious singular value {}", s / sv[0]);
        }
    }

    #[test]
    fn pinv_sym_inverts_full_rank() {
        let b = Matrix::from_fn(3, 3, |i, j| ((i + 2 * j) as f64).sin() + if i == j { 2.0 } else { 0.0 });
        let a = b.gram(); // SPD
        let p = pinv_sym(&a, 1e-12).unwrap();
        let prod = p.matmul(&a).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - expect).abs() < 1e-9);
            }
        }
    }
}
