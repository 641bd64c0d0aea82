//! Dense N-way tensors and the multilinear kernels built on them: mode-n
//! unfolding, n-mode products, Khatri-Rao, MTTKRP and HOSVD.
//!
//! Storage is flat with the first index varying fastest, so the mode-1
//! unfolding is a reinterpretation of the same buffer. Mode indices are
//! 0-based throughout the API.

use crate::error::{Error, Result};
use crate::matrix::{svd_left, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(!dims.is_empty() && dims.iter().all(|&d| d >= 1));
        DenseTensor {
            dims: dims.to_vec(),
            values: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_values(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch("dims must all be positive".into()));
        }
        if values.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for dims {:?}, got {}",
                len,
                dims,
                values.len()
            )));
        }
        Ok(DenseTensor {
            dims: dims.to_vec(),
            values,
        })
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = DenseTensor::zeros(dims);
        let mut idx = vec![0usize; dims.len()];
        for p in 0..t.values.len() {
            t.values[p] = f(&idx);
            increment_index(&mut idx, dims);
        }
        t
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.offset(idx)]
    }

    #[inline]
    pub fn set_at(&mut self, idx: &[usize], v: f64) {
        let p = self.offset(idx);
        self.values[p] = v;
    }

    #[inline]
    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut p = 0;
        let mut stride = 1;
        for (i, d) in idx.iter().zip(&self.dims) {
            debug_assert!(i < d);
            p += i * stride;
            stride *= d;
        }
        p
    }

    pub fn scale(&self, s: f64) -> DenseTensor {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch("tensor add: dims differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch("tensor sub: dims differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a -= b;
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn increment_index(idx: &mut [usize], dims: &[usize]) {
    for (i, d) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < *d {
            return;
        }
        *i = 0;
    }
}

/// Inner product of two same-shaped tensors.
pub fn inner(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::ShapeMismatch(format!(
            "inner: dims {:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum())
}

/// Frobenius norm induced by `inner`.
pub fn norm(a: &DenseTensor) -> f64 {
    a.values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Angle between two nonzero tensors, in radians.
pub fn angle(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("angle of a zero tensor is undefined".into()));
    }
    let c = (inner(a, b)? / (na * nb)).clamp(-1.0, 1.0);
    Ok(c.acos())
}

/// Mode-`n` unfolding, shape `I_n x prod_{k != n} I_k`, with the remaining
/// indices ordered first-index-fastest after deleting index `n`.
pub fn unfold(a: &DenseTensor, n: usize) -> Result<Matrix> {
    check_mode(a, n)?;
    let rows = a.dims[n];
    let cols = a.len() / rows;
    let mut out = Matrix::zeros(rows, cols);
    let mut idx = vec![0usize; a.ndim()];
    for &v in &a.values {
        let mut col = 0;
        let mut stride = 1;
        for (k, (&i, &d)) in idx.iter().zip(&a.dims).enumerate() {
            if k == n {
                continue;
            }
            col += i * stride;
            stride *= d;
        }
        out.set(idx[n], col, v);
        increment_index(&mut idx, &a.dims);
    }
    Ok(out)
}

/// Inverse of `unfold`: rebuilds a tensor of shape `dims` from its mode-`n`
/// unfolding.
pub fn fold(m: &Matrix, n: usize, dims: &[usize]) -> Result<DenseTensor> {
    if n >= dims.len() {
        return Err(Error::ShapeMismatch(format!(
            "fold: mode {} out of range for {} modes",
            n,
            dims.len()
        )));
    }
    let expect_cols: usize = dims.iter().product::<usize>() / dims[n];
    if m.rows() != dims[n] || m.cols() != expect_cols {
        return Err(Error::ShapeMismatch(format!(
            "fold: matrix {}x{} does not match dims {:?} at mode {}",
            m.rows(),
            m.cols(),
            dims,
            n
        )));
    }
    let mut out = DenseTensor::zeros(dims);
    let mut idx = vec![0usize; dims.len()];
    for p in 0..out.values.len() {
        let mut col = 0;
        let mut stride = 1;
        for (k, (&i, &d)) in idx.iter().zip(dims).enumerate() {
            if k == n {
                continue;
            }
            col += i * stride;
            stride *= d;
        }
        out.values[p] = m.get(idx[n], col);
        increment_index(&mut idx, dims);
    }
    Ok(out)
}

/// n-mode product: contracts mode `n` of `a` with the columns of `m`.
pub fn mode_product(a: &DenseTensor, m: &Matrix, n: usize) -> Result<DenseTensor> {
    check_mode(a, n)?;
    if m.cols() != a.dims[n] {
        return Err(Error::ShapeMismatch(format!(
            "mode_product: matrix has {} cols, mode {} has size {}",
            m.cols(),
            n,
            a.dims[n]
        )));
    }
    let unfolded = unfold(a, n)?;
    let product = m.matmul(&unfolded)?;
    let mut dims = a.dims.clone();
    dims[n] = m.rows();
    fold(&product, n, &dims)
}

/// Applies one matrix per mode: `(M_1, ..., M_N) . a`.
pub fn multi_mode_product(a: &DenseTensor, ms: &[Matrix]) -> Result<DenseTensor> {
    if ms.len() != a.ndim() {
        return Err(Error::ShapeMismatch(format!(
            "multi_mode_product: {} matrices for {} modes",
            ms.len(),
            a.ndim()
        )));
    }
    let mut out = a.clone();
    for (n, m) in ms.iter().enumerate() {
        out = mode_product(&out, m, n)?;
    }
    Ok(out)
}

/// Khatri-Rao (columnwise Kronecker) product, in the given order. With the
/// Kronecker convention used here the *last* matrix in the list has the
/// fastest-varying row index.
pub fn khatri_rao(ms: &[&Matrix]) -> Result<Matrix> {
    if ms.is_empty() {
        return Err(Error::ShapeMismatch("khatri_rao of an empty list".into()));
    }
    let r = ms[0].cols();
    if ms.iter().any(|m| m.cols() != r) {
        return Err(Error::ShapeMismatch(
            "khatri_rao: column counts differ".into(),
        ));
    }
    let rows: usize = ms.iter().map(|m| m.rows()).product();
    let mut out = Matrix::zeros(rows, r);
    for j in 0..r {
        let mut col = vec![1.0];
        for m in ms {
            let mc = m.col(j);
            let mut next = Vec::with_capacity(col.len() * mc.len());
            for &a in &col {
                for &b in mc {
                    next.push(a * b);
                }
            }
            col = next;
        }
        out.col_mut(j).copy_from_slice(&col);
    }
    Ok(out)
}

/// Matricized-tensor times Khatri-Rao product: `A_(n) (V^(N) (*) ... (*) V^(1))`
/// omitting mode `n`. Computed by one pass over the tensor entries, without
/// materializing the unfolding or the Khatri-Rao factor.
pub fn mttkrp(a: &DenseTensor, factors: &[Matrix], n: usize) -> Result<Matrix> {
    check_mode(a, n)?;
    if factors.len() != a.ndim() {
        return Err(Error::ShapeMismatch(format!(
            "mttkrp: {} factors for {} modes",
            factors.len(),
            a.ndim()
        )));
    }
    for (k, f) in factors.iter().enumerate() {
        if f.rows() != a.dims[k] {
            return Err(Error::ShapeMismatch(format!(
                "mttkrp: factor {} has {} rows, mode size is {}",
                k,
                f.rows(),
                a.dims[k]
            )));
        }
    }
    let r = factors[0].cols();
    if factors.iter().any(|f| f.cols() != r) {
        return Err(Error::ShapeMismatch("mttkrp: ranks differ".into()));
    }
    let nmodes = a.ndim();
    let mut out = Matrix::zeros(a.dims[n], r);
    let mut idx = vec![0usize; nmodes];
    let mut prod = vec![0.0f64; r];
    for &v in &a.values {
        if v != 0.0 {
            for (j, p) in prod.iter_mut().enumerate() {
                let mut acc = v;
                for m in 0..nmodes {
                    if m != n {
                        acc *= factors[m].get(idx[m], j);
                    }
                }
                *p = acc;
            }
            let row = idx[n];
            for (j, &p) in prod.iter().enumerate() {
                out.add_assign_at(row, j, p);
            }
        }
        increment_index(&mut idx, &a.dims);
    }
    Ok(out)
}

/// Higher-order SVD of a tensor.
#[derive(Debug, Clone)]
pub struct Hosvd {
    /// Core tensor, same shape as the input.
    pub core: DenseTensor,
    /// One square orthogonal matrix per mode.
    pub factors: Vec<Matrix>,
    /// Numerical n-ranks: singular values of each unfolding above
    /// `eps * sigma_max`.
    pub nranks: Vec<usize>,
}

/// Computes the HOSVD with a relative singular-value threshold for the
/// numerical n-ranks.
pub fn hosvd(a: &DenseTensor, eps: f64) -> Result<Hosvd> {
    let mut factors = Vec::with_capacity(a.ndim());
    let mut nranks = Vec::with_capacity(a.ndim());
    for n in 0..a.ndim() {
        let (u, sv) = svd_left(&unfold(a, n)?)?;
        let smax = sv.first().copied().unwrap_or(0.0);
        let rank = if smax == 0.0 {
            0
        } else {
            sv.iter().filter(|&&s| s > eps * smax).count()
        };
        factors.push(u);
        nranks.push(rank);
    }
    let transposed: Vec<Matrix> = factors.iter().map(|u| u.transpose()).collect();
    let core = multi_mode_product(a, &transposed)?;
    Ok(Hosvd {
        core,
        factors,
        nranks,
    })
}

/// Inner product of a dense tensor with the rank-one tensor `⊗_n cols[n]`,
/// by successive contraction over the fastest mode.
pub fn inner_with_rank_one(a: &DenseTensor, cols: &[&[f64]]) -> Result<f64> {
    if cols.len() != a.ndim() {
        return Err(Error::ShapeMismatch(
            "inner_with_rank_one: wrong number of vectors".into(),
        ));
    }
    for (n, c) in cols.iter().enumerate() {
        if c.len() != a.dims[n] {
            return Err(Error::ShapeMismatch(format!(
                "inner_with_rank_one: vector {} has length {}, mode size {}",
                n,
                c.len(),
                a.dims[n]
            )));
        }
    }
    let mut buf: Vec<f64> = a.values.clone();
    for c in cols {
        let d = c.len();
        let chunks = buf.len() / d;
        let mut next = Vec::with_capacity(chunks);
        for k in 0..chunks {
            let mut s = 0.0;
            for (i, &ci) in c.iter().enumerate() {
                s += ci * buf[k * d + i];
            }
            next.push(s);
        }
        buf = next;
    }
    Ok(buf[0])
}

fn check_mode(a: &DenseTensor, n: usize) -> Result<()> {
    if n >= a.ndim() {
        return Err(Error::ShapeMismatch(format!(
            "mode {} out of range for {} modes",
            n,
            a.ndim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randn_tensor(dims: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(dims, |_| rng.sample::<f64, _>(rand_distr::StandardNormal))
    }

    fn rank_one(u: &[f64], v: &[f64], w: &[f64]) -> DenseTensor {
        DenseTensor::from_fn(&[u.len(), v.len(), w.len()], |idx| {
            u[idx[0]] * v[idx[1]] * w[idx[2]]
        })
    }

    #[test]
    fn inner_unit_rank_one() {
        let t = rank_one(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]);
        assert_eq!(inner(&t, &t).unwrap(), 1.0);
        let z = DenseTensor::zeros(&[2, 2, 2]);
        assert_eq!(inner(&z, &t).unwrap(), 0.0);
    }

    #[test]
    fn inner_matches_naive_loop() {
        let a = randn_tensor(&[3, 4, 2], 1);
        let b = randn_tensor(&[3, 4, 2], 2);
        let mut expect = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..2 {
                    expect += a.at(&[i, j, k]) * b.at(&[i, j, k]);
                }
            }
        }
        assert!((inner(&a, &b).unwrap() - expect).abs() <= 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn inner_dim_mismatch_errors() {
        let a = DenseTensor::zeros(&[2, 3]);
        let b = DenseTensor::zeros(&[3, 2]);
        assert!(inner(&a, &b).is_err());
    }

    #[test]
    fn norm_of_rank_one_is_product_of_vector_norms() {
        let (u, v, w) = ([1.0, -2.0, 0.5], [3.0, 1.0], [0.2, 0.4, -1.0, 2.0]);
        let t = DenseTensor::from_fn(&[3, 2, 4], |i| u[i[0]] * v[i[1]] * w[i[2]]);
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm(&t) - nu * nv * nw).abs() < 1e-12 * (nu * nv * nw));
        assert_eq!(norm(&DenseTensor::zeros(&[2, 2])), 0.0);
    }

    #[test]
    fn angle_basic_cases() {
        let a = randn_tensor(&[2, 3, 2], 7);
        assert!(angle(&a, &a).unwrap().abs() < 1e-7);
        assert!((angle(&a, &a.scale(-1.0)).unwrap() - std::f64::consts::PI).abs() < 1e-7);
        let e1 = rank_one(&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]);
        let e2 = rank_one(&[0.0, 1.0], &[1.0, 0.0], &[1.0, 0.0]);
        assert!((angle(&e1, &e2).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        assert!(angle(&DenseTensor::zeros(&[2, 2, 2]), &a).is_err());
    }

    #[test]
    fn unfold_matrix_modes() {
        let m = DenseTensor::from_values(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let u1 = unfold(&m, 0).unwrap();
        assert_eq!(u1.get(0, 0), 1.0);
        assert_eq!(u1.get(1, 0), 2.0);
        assert_eq!(u1.get(0, 1), 3.0);
        assert_eq!(u1.get(1, 1), 4.0);
        let u2 = unfold(&m, 1).unwrap();
        assert_eq!(u2.get(0, 0), 1.0);
        assert_eq!(u2.get(0, 1), 2.0);
        assert_eq!(u2.get(1, 0), 3.0);
        assert_eq!(u2.get(1, 1), 4.0);
        assert!(unfold(&m, 2).is_err());
    }

    #[test]
    fn unfold_matches_index_formula() {
        // counting tensor 2x3x2: entry value = flat index
        let dims = [2usize, 3, 2];
        let t = DenseTensor::from_values(&dims, (0..12).map(|x| x as f64).collect()).unwrap();
        for n in 0..3 {
            let u = unfold(&t, n).unwrap();
            for i0 in 0..2 {
                for i1 in 0..3 {
                    for i2 in 0..2 {
                        let idx = [i0, i1, i2];
                        // brute-force column index from the Kolda-Bader formula
                        let rest: Vec<(usize, usize)> = (0..3)
                            .filter(|&k| k != n)
                            .map(|k| (idx[k], dims[k]))
                            .collect();
                        let mut col = 0;
                        let mut stride = 1;
                        for &(i, d) in &rest {
                            col += i * stride;
                            stride *= d;
                        }
                        assert_eq!(u.get(idx[n], col), t.at(&idx));
                    }
                }
            }
        }
    }

    #[test]
    fn fold_round_trips_every_mode() {
        let t = randn_tensor(&[3, 2, 4, 2], 3);
        for n in 0..4 {
            let u = unfold(&t, n).unwrap();
            let back = fold(&u, n, t.dims()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn mode_product_identity_zero_and_naive() {
        let t = randn_tensor(&[3, 4, 2], 5);
        let id = Matrix::identity(4);
        let same = mode_product(&t, &id, 1).unwrap();
        for (a, b) in same.values().iter().zip(t.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        let z = Matrix::zeros(5, 4);
        let zero = mode_product(&t, &z, 1).unwrap();
        assert_eq!(zero.dims(), &[3, 5, 2]);
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let m = Matrix::from_fn(5, 4, |i, j| ((i * 7 + j * 3) as f64).sin());
        let out = mode_product(&t, &m, 1).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                for k in 0..2 {
                    let mut expect = 0.0;
                    for q in 0..4 {
                        expect += m.get(j, q) * t.at(&[i, q, k]);
                    }
                    assert!((out.at(&[i, j, k]) - expect).abs() < 1e-12);
                }
            }
        }
        assert!(mode_product(&t, &Matrix::zeros(2, 3), 1).is_err());
    }

    #[test]
    fn multi_mode_product_order_independent_and_isometric() {
        let t = randn_tensor(&[3, 4, 2], 11);
        let m0 = Matrix::from_fn(3, 3, |i, j| ((i + 2 * j) as f64).cos());
        let m1 = Matrix::from_fn(4, 4, |i, j| ((2 * i + j) as f64).sin());
        let m2 = Matrix::from_fn(2, 2, |i, j| (i * j) as f64 + 1.0);
        let a = multi_mode_product(&t, &[m0.clone(), m1.clone(), m2.clone()]).unwrap();
        // permuted application order
        let b = mode_product(
            &mode_product(&mode_product(&t, &m2, 2).unwrap(), &m0, 0).unwrap(),
            &m1,
            1,
        )
        .unwrap();
        let diff = a.sub(&b).unwrap();
        assert!(norm(&diff) <= 1e-12 * norm(&a));

        // random orthogonal matrices preserve the norm
        let q0 = crate::matrix::svd_left(&Matrix::from_fn(3, 3, |i, j| ((i * 5 + j) as f64).sin()))
            .unwrap()
            .0;
        let q1 = crate::matrix::svd_left(&Matrix::from_fn(4, 4, |i, j| ((i + j * j) as f64).cos()))
            .unwrap()
            .0;
        let q2 = crate::matrix::svd_left(&Matrix::from_fn(2, 2, |i, j| (i as f64) - 0.3 * j as f64))
            .unwrap()
            .0;
        let rotated = multi_mode_product(&t, &[q0, q1, q2]).unwrap();
        assert!((norm(&rotated) - norm(&t)).abs() <= 1e-12 * norm(&t));
    }

    #[test]
    fn khatri_rao_basics() {
        let a = Matrix::from_fn(2, 2, |i, j| (1 + i + 2 * j) as f64);
        let single = khatri_rao(&[&a]).unwrap();
        assert_eq!(single, a);

        let u = Matrix::from_col_major(2, 1, &[1.0, 2.0]).unwrap();
        let v = Matrix::from_col_major(3, 1, &[3.0, 4.0, 5.0]).unwrap();
        let kr = khatri_rao(&[&u, &v]).unwrap();
        assert_eq!(kr.col(0), &[3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);

        let b = Matrix::from_fn(2, 2, |i, j| ((i + 3 * j) as f64).cos());
        let kr2 = khatri_rao(&[&a, &b]).unwrap();
        for r in 0..2 {
            for i in 0..2 {
                for k in 0..2 {
                    let expect = a.get(i, r) * b.get(k, r);
                    assert!((kr2.get(i * 2 + k, r) - expect).abs() < 1e-15);
                }
            }
        }
        let bad = Matrix::zeros(2, 3);
        assert!(khatri_rao(&[&a, &bad]).is_err());
    }

    #[test]
    fn mttkrp_matrix_case() {
        let t = randn_tensor(&[3, 4], 13);
        let f0 = Matrix::from_fn(3, 2, |i, j| ((i + j) as f64).sin());
        let f1 = Matrix::from_fn(4, 2, |i, j| ((i * 2 + j) as f64).cos());
        let w = mttkrp(&t, &[f0.clone(), f1.clone()], 0).unwrap();
        let expect = unfold(&t, 0).unwrap().matmul(&f1).unwrap();
        for j in 0..2 {
            for i in 0..3 {
                assert!((w.get(i, j) - expect.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mttkrp_matches_unfold_path() {
        let t = randn_tensor(&[3, 3, 3], 17);
        let fs: Vec<Matrix> = (0..3)
            .map(|n| Matrix::from_fn(3, 4, |i, j| ((n * 9 + i * 3 + j) as f64).sin()))
            .collect();
        for n in 0..3 {
            let w = mttkrp(&t, &fs, n).unwrap();
            let rest: Vec<&Matrix> = (0..3).rev().filter(|&k| k != n).map(|k| &fs[k]).collect();
            let expect = unfold(&t, n)
                .unwrap()
                .matmul(&khatri_rao(&rest).unwrap())
                .unwrap();
            for j in 0..4 {
                for i in 0..3 {
                    assert!(
                        (w.get(i, j) - expect.get(i, j)).abs()
                            <= 1e-13 * expect.get(i, j).abs().max(1.0)
                    );
                }
            }
        }
    }

    #[test]
    fn mttkrp_rank_one_closed_form() {
        // a = u (x) v (x) w with its own factors: column 0 of mttkrp at mode n
        // is v_r^(n) scaled by the product of squared norms of the other modes.
        let (u, v, w) = ([1.0, -2.0, 0.5], [3.0, 1.0], [0.2, 0.4, -1.0, 2.0]);
        let t = DenseTensor::from_fn(&[3, 2, 4], |i| u[i[0]] * v[i[1]] * w[i[2]]);
        let fs = vec![
            Matrix::from_col_major(3, 1, &u).unwrap(),
            Matrix::from_col_major(2, 1, &v).unwrap(),
            Matrix::from_col_major(4, 1, &w).unwrap(),
        ];
        let nv2 = v.iter().map(|x| x * x).sum::<f64>();
        let nw2 = w.iter().map(|x| x * x).sum::<f64>();
        let m = mttkrp(&t, &fs, 0).unwrap();
        for i in 0..3 {
            assert!((m.get(i, 0) - u[i] * nv2 * nw2).abs() < 1e-12 * (nv2 * nw2));
        }
    }

    #[test]
    fn hosvd_reconstructs_and_ranks() {
        let t = randn_tensor(&[4, 3, 5], 19);
        let h = hosvd(&t, 1e-10).unwrap();
        let rec = multi_mode_product(&h.core, &h.factors).unwrap();
        assert!(norm(&rec.sub(&t).unwrap()) <= 1e-10 * norm(&t));
        assert_eq!(h.nranks, vec![4, 3, 5]);
        for u in &h.factors {
            let g = u.gram();
            for j in 0..g.cols() {
                for i in 0..g.rows() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g.get(i, j) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn hosvd_rank_one_and_diagonal() {
        let t = rank_one(&[1.0, 2.0], &[3.0, -1.0], &[0.5, 0.25]);
        let h = hosvd(&t, 1e-10).unwrap();
        assert_eq!(h.nranks, vec![1, 1, 1]);

        // diagonal 2x2x2 tensor: core stays diagonal, factors are signed permutations
        let mut d = DenseTensor::zeros(&[2, 2, 2]);
        d.set_at(&[0, 0, 0], 3.0);
        d.set_at(&[1, 1, 1], 1.5);
        let hd = hosvd(&d, 1e-10).unwrap();
        for (i, u) in hd.factors.iter().enumerate() {
            for j in 0..2 {
                for k in 0..2 {
                    let v = u.get(j, k).abs();
                    assert!(
                        (v - if j == k { 1.0 } else { 0.0 }).abs() < 1e-12,
                        "factor {} not a signed identity",
                        i
                    );
                }
            }
        }
        let offmass: f64 = hd
            .core
            .values()
            .iter()
            .enumerate()
            .filter(|(p, _)| *p != 0 && *p != 7)
            .map(|(_, v)| v * v)
            .sum();
        assert!(offmass.sqrt() < 1e-12);

        let z = DenseTensor::zeros(&[2, 3, 2]);
        assert_eq!(hosvd(&z, 1e-10).unwrap().nranks, vec![0, 0, 0]);
    }

    #[test]
    fn inner_with_rank_one_matches_dense() {
        let t = randn_tensor(&[3, 4, 2], 23);
        let u = [0.3, -1.0, 0.7];
        let v = [1.0, 0.2, -0.4, 2.0];
        let w = [0.9, -0.1];
        let dense = DenseTensor::from_fn(&[3, 4, 2], |i| u[i[0]] * v[i[1]] * w[i[2]]);
        let expect = inner(&t, &dense).unwrap();
        let got = inner_with_rank_one(&t, &[&u, &v, &w]).unwrap();
        assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0));
    }
}
