//! Sparse symmetric matrices in CSR form and the operator abstraction the
//! solver iterates with.
//!
//! Both triangles of the matrix are stored explicitly: block multiplies then
//! stream each row once, and the column pattern of row `i` doubles as the row
//! pattern of column `i`. Assembly from coordinate triplets sums duplicates,
//! mirrors entries whose transposed mate is absent, and rejects genuinely
//! asymmetric input.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::block::DenseBlock;
use crate::scalar;

/// Relative disagreement between `(i, j)` and `(j, i)` values above which
/// assembly rejects the input as asymmetric.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Number of right-hand-side columns processed per pass over the matrix rows;
/// the row's index and value reads are shared by all columns in the chunk.
const COL_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum BuildError {
    /// `n == 0`.
    EmptyDimension,
    /// A triplet references a row or column outside `0..n`.
    IndexOutOfBounds { row: usize, col: usize, n: usize },
    /// A value is NaN or infinite.
    NonFinite { row: usize, col: usize },
    /// `(i, j)` and `(j, i)` disagree by more than `SYMMETRY_RTOL` relatively.
    Asymmetric { row: usize, col: usize, upper: f64, lower: f64 },
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::EmptyDimension => write!(f, "matrix dimension must be positive"),
            BuildError::IndexOutOfBounds { row, col, n } => {
                write!(f, "entry ({row}, {col}) outside {n} x {n} matrix")
            }
            BuildError::NonFinite { row, col } => {
                write!(f, "non-finite value at ({row}, {col})")
            }
            BuildError::Asymmetric { row, col, upper, lower } => write!(
                f,
                "asymmetric values at ({row}, {col}): {upper} vs {lower} transposed"
            ),
        }
    }
}

impl core::error::Error for BuildError {}

/// Sparse symmetric matrix, full CSR pattern, with an atomic counter of
/// single-vector multiplies performed through it.
#[derive(Debug)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    spmv: AtomicU64,
}

impl Clone for SparseSymMatrix {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.clone(),
            spmv: AtomicU64::new(self.spmv.load(Ordering::Relaxed)),
        }
    }
}

impl SparseSymMatrix {
    /// Assembles from coordinate triplets. Duplicate positions are summed, a
    /// missing `(j, i)` mate is mirrored from `(i, j)`, and pairs present on
    /// both sides must agree to `SYMMETRY_RTOL` relative (they are averaged
    /// so the stored matrix is exactly symmetric).
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, BuildError> {
        if n == 0 {
            return Err(BuildError::EmptyDimension);
        }
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(BuildError::IndexOutOfBounds { row: i, col: j, n });
            }
            if !v.is_finite() {
                return Err(BuildError::NonFinite { row: i, col: j });
            }
        }

        // Sum duplicates per position.
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }

        // Walk the entry list against its own transpose (also sorted) to
        // mirror one-sided entries and verify two-sided ones.
        let mut transposed: Vec<(usize, usize, f64)> =
            merged.iter().map(|&(i, j, v)| (j, i, v)).collect();
        transposed.sort_unstable_by_key(|&(i, j, _)| (i, j));

        let mut full: Vec<(usize, usize, f64)> = Vec::with_capacity(transposed.len());
        let (mut a, mut b) = (0, 0);
        while a < merged.len() || b < transposed.len() {
            let ka = merged.get(a).map(|e| (e.0, e.1));
            let kb = transposed.get(b).map(|e| (e.0, e.1));
            match (ka, kb) {
                (Some(pa), Some(pb)) if pa == pb => {
                    let (i, j, v) = merged[a];
                    let w = transposed[b].2;
                    let diff = scalar::abs(v - w);
                    if diff > SYMMETRY_RTOL * scalar::abs(v).max(scalar::abs(w)) {
                        let (row, col) = if i <= j { (i, j) } else { (j, i) };
                        return Err(BuildError::Asymmetric {
                            row,
                            col,
                            upper: if i <= j { v } else { w },
                            lower: if i <= j { w } else { v },
                        });
                    }
                    full.push((i, j, 0.5 * (v + w)));
                    a += 1;
                    b += 1;
                }
                (Some(pa), Some(pb)) if pa < pb => {
                    full.push(merged[a]);
                    a += 1;
                }
                (Some(_), Some(_)) => {
                    full.push(transposed[b]);
                    b += 1;
                }
                (Some(_), None) => {
                    full.push(merged[a]);
                    a += 1;
                }
                (None, Some(_)) => {
                    full.push(transposed[b]);
                    b += 1;
                }
                (None, None) => unreachable!(),
            }
        }

        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &full {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = full.iter().map(|e| e.1).collect();
        let values = full.iter().map(|e| e.2).collect();
        Ok(Self { n, row_ptr, col_idx, values, spmv: AtomicU64::new(0) })
    }

    /// Sparse view of a dense symmetric matrix; zero entries are dropped.
    pub fn from_dense(m: &DenseBlock) -> Result<Self, BuildError> {
        assert_eq!(m.rows(), m.cols(), "matrix must be square");
        let mut trip = Vec::new();
        for j in 0..m.cols() {
            for i in 0..m.rows() {
                let v = m.at(i, j);
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.rows(), &trip)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries of the upper triangle (including the diagonal) in row order,
    /// which is all a symmetric writer needs.
    pub fn upper_triangle(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).filter_map(move |idx| {
                let j = self.col_idx[idx];
                (j >= i).then(|| (i, j, self.values[idx]))
            })
        })
    }

    /// Multiplies of width `cols` performed so far.
    pub fn spmv_count(&self) -> u64 {
        self.spmv.load(Ordering::Relaxed)
    }

    pub fn reset_spmv_count(&self) {
        self.spmv.store(0, Ordering::Relaxed);
    }

    /// Instrumentation hook for external kernels (e.g. a thread-parallel
    /// wrapper) that bypass the counted entry points.
    pub fn add_spmv_count(&self, cols: u64) {
        self.spmv.fetch_add(cols, Ordering::Relaxed);
    }

    /// `(A - shift I) X` into `y_cols`, uncounted. `x_cols`/`y_cols` hold
    /// whole columns (`len` a multiple of `n`); rows stream once per chunk of
    /// `COL_CHUNK` columns so index and value reads are shared.
    pub fn spmv_into_uncounted(&self, shift: f64, x_cols: &[f64], y_cols: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x_cols.len() % n, 0);
        debug_assert_eq!(x_cols.len(), y_cols.len());
        let width = x_cols.len() / n;
        for c0 in (0..width).step_by(COL_CHUNK) {
            let c = (width - c0).min(COL_CHUNK);
            let xs = &x_cols[c0 * n..(c0 + c) * n];
            let ys = &mut y_cols[c0 * n..(c0 + c) * n];
            let mut acc = [0.0f64; COL_CHUNK];
            for i in 0..n {
                acc[..c].fill(0.0);
                for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.col_idx[idx];
                    let v = self.values[idx];
                    for (t, a) in acc[..c].iter_mut().enumerate() {
                        *a += v * xs[t * n + j];
                    }
                }
                for (t, a) in acc[..c].iter().enumerate() {
                    ys[t * n + i] = a - shift * xs[t * n + i];
                }
            }
        }
    }

    /// `A X` for a block of column vectors; counts `X` columns many
    /// single-vector multiplies.
    pub fn spmv_block(&self, x: &DenseBlock) -> DenseBlock {
        self.shifted_spmv_block(0.0, x)
    }

    /// `(A - shift I) X` without forming the shifted matrix.
    pub fn shifted_spmv_block(&self, shift: f64, x: &DenseBlock) -> DenseBlock {
        assert_eq!(x.rows(), self.n, "operand row count differs from matrix dimension");
        let mut y = DenseBlock::zeros(self.n, x.cols());
        self.spmv_into_uncounted(shift, x.data(), y.data_mut());
        self.add_spmv_count(x.cols() as u64);
        y
    }

    /// Interval `[min_i (a_ii - r_i), max_i (a_ii + r_i)]` with `r_i` the
    /// off-diagonal absolute row sum; contains the whole spectrum.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut diag = 0.0;
            let mut radius = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[idx];
                let v = self.values[idx];
                if j == i {
                    diag += v;
                } else {
                    radius += scalar::abs(v);
                }
            }
            lo = lo.min(diag - radius);
            hi = hi.max(diag + radius);
        }
        (lo, hi)
    }

    /// Dense copy; intended for small diagnostic problems.
    pub fn to_dense(&self) -> DenseBlock {
        let mut d = DenseBlock::zeros(self.n, self.n);
        for i in 0..self.n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                d.set(i, self.col_idx[idx], self.values[idx]);
            }
        }
        d
    }
}

/// The operator interface the solver works against: a symmetric linear map
/// with block application, on-the-fly shifting, a spectrum enclosure and a
/// multiply counter.
pub trait SymOperator {
    fn dim(&self) -> usize;
    fn apply_block(&self, x: &DenseBlock) -> DenseBlock;
    fn apply_shifted_block(&self, shift: f64, x: &DenseBlock) -> DenseBlock;
    fn gershgorin_bounds(&self) -> (f64, f64);
    fn spmv_count(&self) -> u64;
}

impl SymOperator for SparseSymMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_block(&self, x: &DenseBlock) -> DenseBlock {
        self.spmv_block(x)
    }

    fn apply_shifted_block(&self, shift: f64, x: &DenseBlock) -> DenseBlock {
        self.shifted_spmv_block(shift, x)
    }

    fn gershgorin_bounds(&self) -> (f64, f64) {
        SparseSymMatrix::gershgorin_bounds(self)
    }

    fn spmv_count(&self) -> u64 {
        SparseSymMatrix::spmv_count(self)
    }
}

impl<O: SymOperator + ?Sized> SymOperator for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_block(&self, x: &DenseBlock) -> DenseBlock {
        (**self).apply_block(x)
    }

    fn apply_shifted_block(&self, shift: f64, x: &DenseBlock) -> DenseBlock {
        (**self).apply_shifted_block(shift, x)
    }

    fn gershgorin_bounds(&self) -> (f64, f64) {
        (**self).gershgorin_bounds()
    }

    fn spmv_count(&self) -> u64 {
        (**self).spmv_count()
    }
}

/// `beta I - A`, applied implicitly. Flips the spectrum so the smallest
/// eigenvalues of `A` become the largest of the reflected operator.
pub struct Reflected<'a, O: SymOperator> {
    inner: &'a O,
    beta: f64,
}

impl<'a, O: SymOperator> Reflected<'a, O> {
    pub fn new(inner: &'a O, beta: f64) -> Self {
        Self { inner, beta }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl<O: SymOperator> SymOperator for Reflected<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_block(&self, x: &DenseBlock) -> DenseBlock {
        self.apply_shifted_block(0.0, x)
    }

    fn apply_shifted_block(&self, shift: f64, x: &DenseBlock) -> DenseBlock {
        // (beta I - A - shift I) X = -(A - (beta - shift) I) X
        let mut y = self.inner.apply_shifted_block(self.beta - shift, x);
        y.scale(-1.0);
        y
    }

    fn gershgorin_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.gershgorin_bounds();
        (self.beta - hi, self.beta - lo)
    }

    fn spmv_count(&self) -> u64 {
        self.inner.spmv_count()
    }
}
