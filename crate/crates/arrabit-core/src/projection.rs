//! Ritz-pair extraction from a block, optionally augmented with powers of
//! the operator applied to it, plus deflation bookkeeping.
//!
//! The projection orthonormalizes the block, diagonalizes the projected
//! operator and maps the eigenvectors back. Augmentation widens the block to
//! `[X, A X, ..., A^p X]` before projecting, which sharpens the subspace at
//! the cost of `p` extra block multiplies and a larger projected problem.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::block::DenseBlock;
use crate::dense::{orthonormalize, sym_eig_dense};
use crate::scalar;
use crate::sparse::SymOperator;

/// Residual floor of the deflation test; below this, tighter tolerances stop
/// being meaningful in double precision.
pub const DEFLATION_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionError {
    /// The augmented block has at least as many columns as the operator has
    /// rows; reduce the augmentation order or the block width.
    AugmentedTooWide { width: usize, n: usize },
}

impl fmt::Display for ProjectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjectionError::AugmentedTooWide { width, n } => write!(
                f,
                "augmented block has {width} columns but the operator dimension is {n}; \
                 reduce the augmentation order"
            ),
        }
    }
}

impl core::error::Error for ProjectionError {}

/// Ritz pairs sorted by descending value, with per-pair relative residuals
/// and a converged (locked) marker.
#[derive(Debug, Clone, Default)]
pub struct RitzSet {
    pub values: Vec<f64>,
    /// One column per pair, jointly orthonormal.
    pub vectors: DenseBlock,
    pub residuals: Vec<f64>,
    pub locked: Vec<bool>,
}

impl RitzSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Copy of the first `k` pairs.
    pub fn leading(&self, k: usize) -> RitzSet {
        assert!(k <= self.len());
        RitzSet {
            values: self.values[..k].to_vec(),
            vectors: self.vectors.leading_cols(k),
            residuals: self.residuals[..k].to_vec(),
            locked: self.locked[..k].to_vec(),
        }
    }

    /// Copy of the pairs at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> RitzSet {
        RitzSet {
            values: indices.iter().map(|&i| self.values[i]).collect(),
            vectors: self.vectors.select_cols(indices),
            residuals: indices.iter().map(|&i| self.residuals[i]).collect(),
            locked: indices.iter().map(|&i| self.locked[i]).collect(),
        }
    }

    pub fn locked_count(&self) -> usize {
        self.locked.iter().filter(|&&l| l).count()
    }
}

/// Basis of converged Ritz vectors kept out of the iterating block.
#[derive(Debug, Clone)]
pub struct Deflation {
    pub values: Vec<f64>,
    /// Orthonormal columns, one per locked pair.
    pub basis: DenseBlock,
    pub residuals: Vec<f64>,
}

impl Deflation {
    pub fn empty(n: usize) -> Self {
        Self { values: Vec::new(), basis: DenseBlock::zeros(n, 0), residuals: Vec::new() }
    }

    pub fn from_ritz(set: &RitzSet) -> Self {
        Self {
            values: set.values.clone(),
            basis: set.vectors.clone(),
            residuals: set.residuals.clone(),
        }
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_ritz(&self) -> RitzSet {
        RitzSet {
            values: self.values.clone(),
            vectors: self.basis.clone(),
            residuals: self.residuals.clone(),
            locked: vec![true; self.values.len()],
        }
    }
}

/// Relative two-norm residuals `||A y_i - mu_i y_i|| / max(1, |mu_i|)`,
/// costing one block multiply over the given pairs.
pub fn residuals<O: SymOperator>(op: &O, values: &[f64], vectors: &DenseBlock) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let ay = op.apply_block(vectors);
    values
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let yc = vectors.col(i);
            let ac = ay.col(i);
            let mut acc = 0.0;
            for (a, y) in ac.iter().zip(yc.iter()) {
                let r = a - mu * y;
                acc += r * r;
            }
            scalar::sqrt(acc) / scalar::abs(mu).max(1.0)
        })
        .collect()
}

/// Orthonormalizes `z`, diagonalizes the projected operator and keeps the
/// `keep` leading pairs (fewer if `z` is rank deficient).
fn project_and_keep<O: SymOperator>(op: &O, z: &DenseBlock, keep: usize) -> RitzSet {
    let (u, rank) = orthonormalize(z);
    if rank == 0 {
        // No pairs, but the vector block keeps the operator's row count so
        // callers can concatenate it.
        return RitzSet {
            values: Vec::new(),
            vectors: DenseBlock::zeros(op.dim(), 0),
            residuals: Vec::new(),
            locked: Vec::new(),
        };
    }
    let au = op.apply_block(&u);
    let h = u.tr_mul(&au);
    let eig = sym_eig_dense(&h).expect("projected matrix is symmetric and finite");
    let kept = keep.min(rank);
    let vk = eig.vectors.leading_cols(kept);
    let mut y = u.mul(&vk);
    crate::dense::canonical_column_signs(&mut y);
    let values = eig.values[..kept].to_vec();
    let res = residuals(op, &values, &y);
    RitzSet { values, vectors: y, residuals: res, locked: vec![false; kept] }
}

/// Ritz pairs of `op` over the range of `z`: all pairs the numerical rank of
/// `z` supports, residuals included.
pub fn rayleigh_ritz<O: SymOperator>(op: &O, z: &DenseBlock) -> RitzSet {
    project_and_keep(op, z, z.cols())
}

/// Augmented projection: Ritz pairs extracted from
/// `[X, A X, ..., A^p X]` (projected away from the locked basis first), of
/// which the `keep` leading ones are returned.
pub fn arr<O: SymOperator>(
    op: &O,
    x: &DenseBlock,
    p: usize,
    defl: &Deflation,
    keep: usize,
) -> Result<RitzSet, ProjectionError> {
    let n = op.dim();
    let width = (p + 1) * x.cols();
    if width >= n {
        return Err(ProjectionError::AugmentedTooWide { width, n });
    }
    let mut augmented = x.clone();
    let mut power = x.clone();
    for _ in 0..p {
        power = op.apply_block(&power);
        augmented = augmented.hcat(&power);
    }
    if !defl.is_empty() {
        project_out(&mut augmented, defl);
    }
    Ok(project_and_keep(op, &augmented, keep))
}

/// Threshold of the deflation test at tolerance `tol_t`.
pub fn deflation_threshold(tol_t: f64) -> f64 {
    DEFLATION_FLOOR.max(tol_t * tol_t)
}

/// Splits a Ritz set into (locked, active) by the deflation test
/// `res_i <= max(1e-14, tol_t^2)`, preserving order within both halves.
pub fn deflate(set: &RitzSet, tol_t: f64) -> (RitzSet, RitzSet) {
    let threshold = deflation_threshold(tol_t);
    let mut locked_idx = Vec::new();
    let mut active_idx = Vec::new();
    for (i, &res) in set.residuals.iter().enumerate() {
        if res <= threshold {
            locked_idx.push(i);
        } else {
            active_idx.push(i);
        }
    }
    let mut locked = set.select(&locked_idx);
    for flag in locked.locked.iter_mut() {
        *flag = true;
    }
    let mut active = set.select(&active_idx);
    for flag in active.locked.iter_mut() {
        *flag = false;
    }
    (locked, active)
}

/// `X <- X - Q (Q^T X)` against the locked basis; no-op when empty.
pub fn project_out(x: &mut DenseBlock, defl: &Deflation) {
    if defl.is_empty() {
        return;
    }
    let qtx = defl.basis.tr_mul(x);
    let correction = defl.basis.mul(&qtx);
    x.add_scaled(-1.0, &correction);
}

/// Largest residual among the `k` leading pairs.
pub fn max_residual(set: &RitzSet, k: usize) -> f64 {
    assert!(k <= set.len(), "asked for {k} leading pairs of {}", set.len());
    set.residuals[..k].iter().fold(0.0, |m, &r| m.max(r))
}
