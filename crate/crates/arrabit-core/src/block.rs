//! Dense column-major blocks of vectors.
//!
//! A `DenseBlock` is an `n x b` matrix stored column by column, used both for
//! the iterated blocks of Ritz vector candidates (tall, `b << n`) and for the
//! small square matrices produced by projections. Columns are contiguous, so
//! per-column kernels (norms, AXPYs, normalization) run on plain slices.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseBlock {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Default for DenseBlock {
    fn default() -> Self {
        DenseBlock::zeros(0, 0)
    }
}

impl DenseBlock {
    /// All-zero `rows x cols` block. `cols` may be zero (empty basis).
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut b = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                b.data[j * rows + i] = f(i, j);
            }
        }
        b
    }

    /// Column-major wrapper around an existing buffer; `data.len()` must be
    /// `rows * cols`.
    pub fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match dimensions");
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Block of i.i.d. standard Gaussian entries drawn column by column from
    /// `rng`, so a fixed seed produces a fixed block.
    pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut b = Self::zeros(rows, cols);
        for x in b.data.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        b
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_empty(&self) -> bool {
        self.cols == 0
    }

    pub fn iter_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self * other`, shapes `(n x k) * (k x m) -> (n x m)`.
    pub fn mul(&self, other: &DenseBlock) -> DenseBlock {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = DenseBlock::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let oc = other.col(j);
            let dst = out.col_mut(j);
            for (l, &w) in oc.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let src = self.col(l);
                for (d, &s) in dst.iter_mut().zip(src.iter()) {
                    *d += w * s;
                }
            }
        }
        out
    }

    /// `self^T * other`, shapes `(n x k)^T * (n x m) -> (k x m)`.
    pub fn tr_mul(&self, other: &DenseBlock) -> DenseBlock {
        assert_eq!(self.rows, other.rows, "row counts differ");
        let mut out = DenseBlock::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            let oc = other.col(j);
            for i in 0..self.cols {
                let sc = self.col(i);
                let mut acc = 0.0;
                for (a, b) in sc.iter().zip(oc.iter()) {
                    acc += a * b;
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseBlock {
        DenseBlock::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &DenseBlock) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (d, &o) in self.data.iter_mut().zip(other.data.iter()) {
            *d += s * o;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for d in self.data.iter_mut() {
            *d *= s;
        }
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        let mut acc = 0.0;
        for &x in self.col(j) {
            acc += x * x;
        }
        scalar::sqrt(acc)
    }

    pub fn frob_norm(&self) -> f64 {
        let mut acc = 0.0;
        for &x in &self.data {
            acc += x * x;
        }
        scalar::sqrt(acc)
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0;
        for &x in &self.data {
            let a = scalar::abs(x);
            if a > m {
                m = a;
            }
        }
        m
    }

    /// Euclidean norm of a row; rows are strided, columns are not.
    pub fn row_norm(&self, i: usize) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.cols {
            let x = self.at(i, j);
            acc += x * x;
        }
        scalar::sqrt(acc)
    }

    /// Copy of the first `c` columns.
    pub fn leading_cols(&self, c: usize) -> DenseBlock {
        assert!(c <= self.cols);
        DenseBlock::from_raw(self.rows, c, self.data[..c * self.rows].to_vec())
    }

    /// Copy of columns `js` in the given order.
    pub fn select_cols(&self, js: &[usize]) -> DenseBlock {
        let mut out = DenseBlock::zeros(self.rows, js.len());
        for (t, &j) in js.iter().enumerate() {
            out.col_mut(t).copy_from_slice(self.col(j));
        }
        out
    }

    /// Copy of rows `r0..r1` (all columns).
    pub fn row_range(&self, r0: usize, r1: usize) -> DenseBlock {
        assert!(r0 <= r1 && r1 <= self.rows);
        DenseBlock::from_fn(r1 - r0, self.cols, |i, j| self.at(r0 + i, j))
    }

    /// Horizontal concatenation `[self other]`.
    pub fn hcat(&self, other: &DenseBlock) -> DenseBlock {
        assert_eq!(self.rows, other.rows, "row counts differ");
        let mut data = Vec::with_capacity((self.cols + other.cols) * self.rows);
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        DenseBlock::from_raw(self.rows, self.cols + other.cols, data)
    }

    /// Appends a column, taking ownership of the buffer growth.
    pub fn push_col(&mut self, col: &[f64]) {
        assert_eq!(col.len(), self.rows);
        self.data.extend_from_slice(col);
        self.cols += 1;
    }
}
