//! Dense real tensors and the matrix factorizations that MPS manipulation is
//! built on.
//!
//! Storage is row-major with explicit shape metadata. Index reordering is an
//! explicit transpose-copy ([`DenseTensor::permute`]); contractions reduce to a
//! single matrix product after moving the paired axes together.
//!
//! The heavy lifting (matrix products, SVD, QR, symmetric eigenproblems) is
//! delegated to `faer`, which reads our row-major buffers without copying.

use faer::{Accum, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Default relative squared-singular-value threshold below which bond
/// directions are dropped.
pub const DEFAULT_CUTOFF: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Dimension(format!("zero extent in shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        assert!(shape.iter().all(|&e| e > 0), "extents must be positive");
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "vector must be non-empty");
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; t.shape.len()];
        for v in t.data.iter_mut() {
            *v = f(&idx);
            for ax in (0..idx.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < t.shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        debug_assert_eq!(index.len(), self.shape.len());
        let off: usize = index
            .iter()
            .zip(self.strides())
            .map(|(i, s)| i * s)
            .sum();
        self.data[off]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale(factor);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Reorders axes: axis `k` of the result is axis `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rank(), "permutation length must equal rank");
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            assert!(p < perm.len() && !seen[p], "invalid permutation {perm:?}");
            seen[p] = true;
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return self.clone();
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let old_strides = self.strides();
        let src_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; new_shape.len()];
        let mut off = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[off]);
            for ax in (0..idx.len()).rev() {
                idx[ax] += 1;
                off += src_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                off -= src_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Self {
            shape: new_shape,
            data,
        }
    }

    /// Views a rank-2 tensor as a matrix.
    pub fn as_mat(&self) -> Result<MatRef<'_, f64>> {
        if self.rank() != 2 {
            return Err(Error::Dimension(format!(
                "expected a matrix, got shape {:?}",
                self.shape
            )));
        }
        Ok(MatRef::from_row_major_slice(
            &self.data,
            self.shape[0],
            self.shape[1],
        ))
    }

    pub fn from_mat(m: MatRef<'_, f64>) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self {
            shape: vec![r, c],
            data,
        }
    }

    pub fn matmul(&self, other: &DenseTensor) -> Result<DenseTensor> {
        let a = self.as_mat()?;
        let b = other.as_mat()?;
        if a.ncols() != b.nrows() {
            return Err(Error::Dimension(format!(
                "cannot multiply {:?} by {:?}",
                self.shape, other.shape
            )));
        }
        let data = gemm(&self.data, a.nrows(), a.ncols(), &other.data, b.ncols());
        Ok(Self {
            shape: vec![a.nrows(), b.ncols()],
            data,
        })
    }

    pub fn transpose(&self) -> Result<DenseTensor> {
        if self.rank() != 2 {
            return Err(Error::Dimension("transpose needs a matrix".into()));
        }
        Ok(self.permute(&[1, 0]))
    }
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for ax in (0..shape.len().saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * shape[ax + 1];
    }
    strides
}

/// Row-major `(m x k) * (k x n)`.
pub(crate) fn gemm(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    gemm_into(&mut out, a, m, k, false, b, n, false);
    out
}

/// Row-major product into `out`, optionally transposing either operand.
/// `a` is stored as `m x k` (or `k x m` when `ta`), `b` as `k x n` (or `n x k`
/// when `tb`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_into(
    out: &mut [f64],
    a: &[f64],
    m: usize,
    k: usize,
    ta: bool,
    b: &[f64],
    n: usize,
    tb: bool,
) {
    debug_assert_eq!(out.len(), m * n);
    let lhs = if ta {
        MatRef::from_row_major_slice(a, k, m).transpose()
    } else {
        MatRef::from_row_major_slice(a, m, k)
    };
    let rhs = if tb {
        MatRef::from_row_major_slice(b, n, k).transpose()
    } else {
        MatRef::from_row_major_slice(b, k, n)
    };
    let dst = faer::MatMut::from_row_major_slice_mut(out, m, n);
    faer::linalg::matmul::matmul(dst, Accum::Replace, lhs, rhs, 1.0, Par::Seq);
}

/// Contracts `a` and `b` over the given `(axis_of_a, axis_of_b)` pairs. The
/// result carries the unpaired axes of `a` followed by those of `b`.
pub fn contract(a: &DenseTensor, b: &DenseTensor, axes: &[(usize, usize)]) -> Result<DenseTensor> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(ia, ib) in axes {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(Error::Dimension(format!(
                "axis pair ({ia}, {ib}) out of range for ranks {} and {}",
                a.rank(),
                b.rank()
            )));
        }
        if used_a[ia] || used_b[ib] {
            return Err(Error::Dimension(format!("axis pair ({ia}, {ib}) repeats an axis")));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Dimension(format!(
                "extent {} of axis {ia} does not match extent {} of axis {ib}",
                a.shape[ia], b.shape[ib]
            )));
        }
        used_a[ia] = true;
        used_b[ib] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&i| !used_b[i]).collect();

    let perm_a: Vec<usize> = free_a.iter().copied().chain(axes.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = axes.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let pa = a.permute(&perm_a);
    let pb = b.permute(&perm_b);

    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = axes.iter().map(|p| a.shape[p.0]).product();
    let n: usize = free_b.iter().map(|&i| b.shape[i]).product();
    let data = gemm(&pa.data, m, k, &pb.data, n);

    let shape: Vec<usize> = free_a
        .iter()
        .map(|&i| a.shape[i])
        .chain(free_b.iter().map(|&i| b.shape[i]))
        .collect();
    Ok(DenseTensor { shape, data })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncationReport {
    pub kept: usize,
    /// Sum of the squared singular values that were dropped.
    pub discarded_weight: f64,
    /// Retained singular values, non-increasing.
    pub spectrum: Vec<f64>,
}

/// Result of [`svd_truncate`]: `m ≈ u · diag(s) · vᵀ`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: DenseTensor,
    pub s: Vec<f64>,
    pub v: DenseTensor,
    pub report: TruncationReport,
}

fn check_finite(m: &DenseTensor, what: &str) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite entries in {what} input")))
    }
}

/// Thin SVD keeping at most `chi_max` singular values, and only those whose
/// share of the total squared weight exceeds `cutoff`. At least one value is
/// always kept.
pub fn svd_truncate(m: &DenseTensor, chi_max: usize, cutoff: f64) -> Result<TruncatedSvd> {
    if chi_max == 0 {
        return Err(Error::Config("chi_max must be at least 1".into()));
    }
    if !(cutoff >= 0.0) {
        return Err(Error::Config(format!("cutoff must be non-negative, got {cutoff}")));
    }
    let mat = m.as_mat()?;
    check_finite(m, "SVD")?;
    let (rows, cols) = (mat.nrows(), mat.ncols());
    let svd = mat
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?}")))?;
    let sv = svd.S().column_vector();
    let sigma: Vec<f64> = (0..sv.nrows()).map(|i| sv[i].max(0.0)).collect();
    let total: f64 = sigma.iter().map(|s| s * s).sum();

    let significant = if total > 0.0 {
        sigma.iter().filter(|s| *s * *s / total > cutoff).count()
    } else {
        0
    };
    let kept = chi_max.min(significant).min(sigma.len()).max(1);
    let discarded_weight: f64 = sigma[kept..].iter().map(|s| s * s).sum();

    let u_full = svd.U();
    let v_full = svd.V();
    let mut u = Vec::with_capacity(rows * kept);
    for i in 0..rows {
        for j in 0..kept {
            u.push(u_full[(i, j)]);
        }
    }
    let mut v = Vec::with_capacity(cols * kept);
    for i in 0..cols {
        for j in 0..kept {
            v.push(v_full[(i, j)]);
        }
    }
    let s = sigma[..kept].to_vec();
    Ok(TruncatedSvd {
        u: DenseTensor::matrix(rows, kept, u)?,
        v: DenseTensor::matrix(cols, kept, v)?,
        report: TruncationReport {
            kept,
            discarded_weight,
            spectrum: s.clone(),
        },
        s,
    })
}

/// Thin QR factorization `m = q · r` with `qᵀq = I`. Signs are fixed so that
/// the diagonal of `r` is non-negative.
pub fn qr_orthogonalize(m: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    let mat = m.as_mat()?;
    check_finite(m, "QR")?;
    let qr = mat.qr();
    let q: Mat<f64> = qr.compute_thin_Q();
    let r = qr.thin_R();
    let k = q.ncols();
    let mut q = DenseTensor::from_mat(q.as_ref());
    let mut r = DenseTensor::from_mat(r);
    let (rows, cols) = (m.shape[0], m.shape[1]);
    for j in 0..k {
        if r.data[j * cols + j] < 0.0 {
            for i in 0..rows {
                q.data[i * k + j] = -q.data[i * k + j];
            }
            for c in 0..cols {
                r.data[j * cols + c] = -r.data[j * cols + c];
            }
        }
    }
    Ok((q, r))
}

/// Eigenvalues (non-decreasing) of a symmetric matrix given row-major.
pub fn symmetric_eigenvalues(m: &[f64], n: usize) -> Result<Vec<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entries in eigenvalue input".into()));
    }
    MatRef::from_row_major_slice(m, n, n)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigenvalue solver failed: {e:?}")))
}
