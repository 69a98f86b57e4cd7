//! Measurement toolkit for the augmented projection's acceleration behavior.
//!
//! Everything here works against a brute-force dense eigendecomposition of
//! small instances: the subspace accuracy ratio and its row-norm
//! generalization, the row-normalized coefficient decomposition of the
//! augmented block, and empirical checks of the acceleration bounds those
//! quantities satisfy. This module is a correctness instrument, not a
//! performance path; every entry point is capped at [`MAX_ORACLE_DIM`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::block::DenseBlock;
use crate::dense::{orthonormalize, sym_eig_dense};
use crate::filter::PolyFilter;
use crate::scalar;
use crate::sparse::{BuildError, SparseSymMatrix};

/// Hard ceiling on the dimension accepted by the dense oracle and the
/// synthetic-instance generators.
pub const MAX_ORACLE_DIM: usize = 1000;

/// Rounding slack applied to the right-hand side of every bound check;
/// violations beyond it are genuine.
pub const BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    /// The instance exceeds [`MAX_ORACLE_DIM`].
    DimensionTooLarge { n: usize },
    /// Assembling a synthetic matrix produced invalid triplets.
    Build(BuildError),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::DimensionTooLarge { n } => {
                write!(f, "dimension {n} exceeds the analysis ceiling of {MAX_ORACLE_DIM}")
            }
            AnalysisError::Build(e) => write!(f, "synthetic matrix assembly failed: {e}"),
        }
    }
}

impl core::error::Error for AnalysisError {}

impl From<BuildError> for AnalysisError {
    fn from(e: BuildError) -> Self {
        AnalysisError::Build(e)
    }
}

/// Full eigendecomposition of a small matrix: ground truth for every
/// measurement in this module.
#[derive(Debug, Clone)]
pub struct SpectrumOracle {
    /// All eigenvalues, descending.
    pub values: Vec<f64>,
    /// Matching orthonormal eigenvectors, one per column.
    pub vectors: DenseBlock,
}

impl SpectrumOracle {
    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// Dense eigendecomposition of the expanded sparse matrix.
pub fn dense_oracle(a: &SparseSymMatrix) -> Result<SpectrumOracle, AnalysisError> {
    let n = a.n();
    if n > MAX_ORACLE_DIM {
        return Err(AnalysisError::DimensionTooLarge { n });
    }
    let dense = a.to_dense();
    let eig = sym_eig_dense(&dense).expect("expanded matrix is symmetric and finite");
    Ok(SpectrumOracle { values: eig.values, vectors: eig.vectors })
}

/// Accuracy of `x` as a basis for the leading `k`-dimensional eigenspace:
/// the largest projection onto a trailing eigenvector divided by the
/// smallest projection onto a leading one. Zero for an exact basis,
/// `+INFINITY` when some leading projection vanishes.
pub fn delta_k(oracle: &SpectrumOracle, x: &DenseBlock, k: usize) -> f64 {
    let n = oracle.n();
    assert!(k >= 1 && k < n, "need 1 <= k < n");
    assert_eq!(x.rows(), n, "block rows must match the oracle dimension");
    let qtx = oracle.vectors.tr_mul(x);
    let mut num = 0.0f64;
    for i in k..n {
        num = num.max(qtx.row_norm(i));
    }
    let mut den = f64::INFINITY;
    for i in 0..k {
        den = den.min(qtx.row_norm(i));
    }
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Row-norm generalization of [`delta_k`]: the largest row norm past row `m`
/// divided by the smallest row norm among the first `k` rows (rows are
/// 0-indexed here, so "past row m" means indices `m..`). `+INFINITY` when
/// the denominator vanishes.
pub fn gamma_km(mat: &DenseBlock, k: usize, m: usize) -> f64 {
    let n = mat.rows();
    assert!(k >= 1 && k <= m && m < n, "need 1 <= k <= m < rows");
    let mut num = 0.0f64;
    for i in m..n {
        num = num.max(mat.row_norm(i));
    }
    let mut den = f64::INFINITY;
    for i in 0..k {
        den = den.min(mat.row_norm(i));
    }
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// The n x (p+1) matrix whose row i is (1, lambda_i, ..., lambda_i^p).
pub fn vandermonde(values: &[f64], p: usize) -> DenseBlock {
    DenseBlock::from_fn(values.len(), p + 1, |i, j| scalar::powi(values[i], j as u32))
}

fn scale_rows(block: &mut DenseBlock, f: impl Fn(usize) -> f64) {
    for j in 0..block.cols() {
        for (i, v) in block.col_mut(j).iter_mut().enumerate() {
            *v *= f(i);
        }
    }
}

/// Row-normalized coefficient decomposition of the augmented block
/// `[X AX ... A^pX] = Q D G`, partitioned at row `m`, together with the
/// rank decision on the leading rows and — when they are independent —
/// the coupling matrix and the distinguished basis `Y` it induces.
#[derive(Debug, Clone)]
pub struct AugmentationDecomposition {
    pub k: usize,
    pub p: usize,
    pub m: usize,
    /// Coefficients of the augmented block in the eigenbasis, n x (p+1)k.
    pub g_hat: DenseBlock,
    /// Row norms of `g_hat` (the diagonal of D).
    pub d: Vec<f64>,
    /// `g_hat` with every nonzero row scaled to unit norm.
    pub g: DenseBlock,
    /// First `m` rows of `g`.
    pub g1: DenseBlock,
    /// Remaining rows of `g`.
    pub g2: DenseBlock,
    /// Numerical rank of `g1` (singular values above `m * eps * sigma_max`).
    pub g1_rank: usize,
    /// Whether the first `m` rows are linearly independent.
    pub g1_full_rank: bool,
    /// Spectral condition number of `g1`; infinite when rank-deficient.
    pub g1_cond: f64,
    /// Coupling matrix `D2 G2 G1^+ D1^{-1}`, present under full rank.
    pub s: Option<DenseBlock>,
    /// The basis `Q_m E_k + Q_{m+} S E_k`, present under full rank.
    pub y: Option<DenseBlock>,
    /// Spectral norm of `G1^+ E_k`, present under full rank.
    pub g1_pinv_ek_norm: Option<f64>,
}

/// Builds the full decomposition for a block `x` with `k` columns,
/// augmentation depth `p`, and partition row `m` in `[k, k+pk]`.
pub fn build_decomposition(
    oracle: &SpectrumOracle,
    x: &DenseBlock,
    p: usize,
    m: usize,
) -> AugmentationDecomposition {
    let n = oracle.n();
    let k = x.cols();
    assert_eq!(x.rows(), n, "block rows must match the oracle dimension");
    assert!(k >= 1, "block must have at least one column");
    assert!((p + 1) * k < n, "augmented width must stay below the dimension");
    assert!(k <= m && m <= k + p * k, "partition row must lie in [k, k+pk]");

    let qtx = oracle.vectors.tr_mul(x);
    let mut g_hat = qtx.clone();
    let mut cur = qtx.clone();
    for _ in 0..p {
        scale_rows(&mut cur, |i| oracle.values[i]);
        g_hat = g_hat.hcat(&cur);
    }

    let d: Vec<f64> = (0..n).map(|i| g_hat.row_norm(i)).collect();
    // Each row of the coefficients is the outer product of the block's
    // projection row with the eigenvalue-power row, so its norm factors
    // exactly; verify the factorization.
    let v = vandermonde(&oracle.values, p);
    for (i, &di) in d.iter().enumerate() {
        let prod = qtx.row_norm(i) * v.row_norm(i);
        assert!(
            scalar::abs(di - prod) <= 1e-12 * di.max(1.0),
            "row-norm factorization failed at row {i}: {di} vs {prod}"
        );
    }

    let mut g = g_hat.clone();
    scale_rows(&mut g, |i| if d[i] == 0.0 { 0.0 } else { 1.0 / d[i] });

    let g1 = g.row_range(0, m);
    let g2 = g.row_range(m, n);

    // Rank of the leading rows from the singular values, computed through
    // the eigenvalues of the small row Gram matrix.
    let w = g1.mul(&g1.transpose());
    let weig = sym_eig_dense(&w).expect("row Gram matrix is symmetric and finite");
    let sigma: Vec<f64> = weig.values.iter().map(|&t| scalar::sqrt(t.max(0.0))).collect();
    let sigma_max = sigma[0];
    let threshold = m as f64 * f64::EPSILON * sigma_max;
    let g1_rank = sigma.iter().filter(|&&s| s > threshold).count();
    let g1_full_rank = g1_rank == m;
    let g1_cond = if g1_full_rank { sigma_max / sigma[m - 1] } else { f64::INFINITY };
    log::debug!("leading-row rank {g1_rank}/{m}, condition {g1_cond:e}");

    let (s, y, g1_pinv_ek_norm) = if g1_full_rank {
        // G1 has full row rank, so G1^+ = G1^T (G1 G1^T)^{-1}; invert the
        // row Gram matrix through its eigendecomposition, whose eigenvalues
        // are all above the rank threshold here.
        let mut ud = weig.vectors.clone();
        for j in 0..m {
            let wj = weig.values[j];
            for t in ud.col_mut(j) {
                *t /= wj;
            }
        }
        let winv = ud.mul(&weig.vectors.transpose());
        let pinv = g1.transpose().mul(&winv);

        let pinv_ek = pinv.leading_cols(k);
        let gram = pinv_ek.tr_mul(&pinv_ek);
        let geig = sym_eig_dense(&gram).expect("Gram matrix is symmetric and finite");
        let norm = scalar::sqrt(geig.values[0].max(0.0));

        // S = D2 G2 G1^+ D1^{-1}; D1 is positive under full rank.
        let mut s = g2.mul(&pinv);
        scale_rows(&mut s, |i| d[m + i]);
        for j in 0..m {
            let dj = d[j];
            for t in s.col_mut(j) {
                *t /= dj;
            }
        }

        let tail_idx: Vec<usize> = (m..n).collect();
        let q_tail = oracle.vectors.select_cols(&tail_idx);
        let mut y = q_tail.mul(&s.leading_cols(k));
        y.add_scaled(1.0, &oracle.vectors.leading_cols(k));
        (Some(s), Some(y), Some(norm))
    } else {
        (None, None, None)
    };

    AugmentationDecomposition {
        k,
        p,
        m,
        g_hat,
        d,
        g,
        g1,
        g2,
        g1_rank,
        g1_full_rank,
        g1_cond,
        s,
        y,
        g1_pinv_ek_norm,
    }
}

/// Largest partition row in `[k, k+pk]` whose leading rows are linearly
/// independent. Adding rows can only preserve or create a dependency, so
/// admissibility is monotone and a descending scan finds the boundary.
/// None when even `m = k` fails.
pub fn largest_admissible_m(oracle: &SpectrumOracle, x: &DenseBlock, p: usize) -> Option<usize> {
    let k = x.cols();
    (k..=k + p * k).rev().find(|&m| build_decomposition(oracle, x, p, m).g1_full_rank)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum BoundOutcome {
    Holds,
    Violated,
    Skipped,
}

/// One empirical bound check: the measured left-hand side, the computed
/// right-hand side, and the margin against the slack-adjusted bound.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub instance: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs * (1 + BOUND_SLACK) - lhs`; negative means violated.
    pub margin: f64,
    pub outcome: BoundOutcome,
    pub skip_reason: Option<String>,
}

impl BoundReport {
    fn checked(instance: String, lhs: f64, rhs: f64) -> Self {
        let cap = rhs * (1.0 + BOUND_SLACK);
        if lhs.is_nan() || cap.is_nan() {
            return BoundReport {
                instance,
                lhs,
                rhs,
                margin: f64::NAN,
                outcome: BoundOutcome::Skipped,
                skip_reason: Some(String::from("indeterminate value")),
            };
        }
        let outcome = if lhs <= cap { BoundOutcome::Holds } else { BoundOutcome::Violated };
        BoundReport { instance, lhs, rhs, margin: cap - lhs, outcome, skip_reason: None }
    }

    fn skipped(instance: String, reason: &str) -> Self {
        BoundReport {
            instance,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            outcome: BoundOutcome::Skipped,
            skip_reason: Some(String::from(reason)),
        }
    }

    pub fn holds(&self) -> bool {
        self.outcome == BoundOutcome::Holds
    }
}

/// Checks the projection acceleration bound
/// `delta_k(Y) <= gamma_{k,m}(Q^T X) * gamma_{k,m}(V) * ||G1^+ E_k||_2`
/// on one instance. Skipped when the leading rows of the normalized
/// coefficients are rank-deficient.
pub fn verify_thm_bound(
    oracle: &SpectrumOracle,
    x: &DenseBlock,
    p: usize,
    m: usize,
) -> BoundReport {
    let k = x.cols();
    let instance = format!("accuracy-bound n={} k={k} p={p} m={m}", oracle.n());
    let decomp = build_decomposition(oracle, x, p, m);
    let Some(y) = decomp.y.as_ref() else {
        return BoundReport::skipped(instance, "leading coefficient rows are rank-deficient");
    };
    let lhs = delta_k(oracle, y, k);
    let qtx = oracle.vectors.tr_mul(x);
    let v = vandermonde(&oracle.values, p);
    let norm = decomp.g1_pinv_ek_norm.expect("present under full rank");
    let rhs = gamma_km(&qtx, k, m) * gamma_km(&v, k, m) * norm;
    BoundReport::checked(instance, lhs, rhs)
}

/// Both bound checks for a filtered power iterate, reported separately.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerBoundReport {
    /// `delta_k(Y) <= c_m |rho(lambda_{m+1}) / rho(lambda_k)|^q`.
    pub accuracy: BoundReport,
    /// `delta_k(Y)/delta_k(X) <= c'_m |rho(lambda_{m+1}) / rho(lambda_{k+1})|^q`.
    pub ratio: BoundReport,
}

impl PowerBoundReport {
    /// Both bounds checked and held.
    pub fn verified(&self) -> bool {
        self.accuracy.holds() && self.ratio.holds()
    }

    /// At least one bound genuinely failed (skips do not count).
    pub fn violated(&self) -> bool {
        self.accuracy.outcome == BoundOutcome::Violated
            || self.ratio.outcome == BoundOutcome::Violated
    }
}

/// Runs `x = rho(A)^q x0` exactly in the eigenbasis and checks the two
/// power-iteration acceleration bounds. Skipped when the filter magnitudes
/// are not ordered on the spectrum (minimum over the leading k values at
/// `lambda_k`, non-increasing through `lambda_{m+1}`, tail maximum at
/// `lambda_{m+1}`) or when the decomposition is rank-deficient.
pub fn verify_power_bound(
    oracle: &SpectrumOracle,
    x0: &DenseBlock,
    filter: &PolyFilter,
    q_steps: usize,
    p: usize,
    m: usize,
) -> PowerBoundReport {
    let n = oracle.n();
    let k = x0.cols();
    let tag = |which: &str| {
        format!("{which} n={n} k={k} p={p} m={m} q={q_steps} d={}", filter.degree())
    };
    let skip_both = |reason: &str| PowerBoundReport {
        accuracy: BoundReport::skipped(tag("power-accuracy-bound"), reason),
        ratio: BoundReport::skipped(tag("power-ratio-bound"), reason),
    };

    let r: Vec<f64> = oracle.values.iter().map(|&t| filter.eval_scalar(t)).collect();
    let ra: Vec<f64> = r.iter().map(|&t| scalar::abs(t)).collect();
    let mut ordered = true;
    for j in 0..k {
        ordered &= ra[j] >= ra[k - 1];
    }
    for j in (k - 1)..m {
        ordered &= ra[j] >= ra[j + 1];
    }
    for j in (m + 1)..n {
        ordered &= ra[j] <= ra[m];
    }
    if !ordered {
        return skip_both("filter magnitudes are not ordered on the spectrum");
    }

    let mut c = oracle.vectors.tr_mul(x0);
    scale_rows(&mut c, |i| scalar::powi(r[i], q_steps as u32));
    let x = oracle.vectors.mul(&c);

    let decomp = build_decomposition(oracle, &x, p, m);
    let Some(y) = decomp.y.as_ref() else {
        return skip_both("leading coefficient rows are rank-deficient");
    };
    let norm = decomp.g1_pinv_ek_norm.expect("present under full rank");

    let v = vandermonde(&oracle.values, p);
    let gamma_v = gamma_km(&v, k, m);
    let qtx0 = oracle.vectors.tr_mul(x0);
    let delta_y = delta_k(oracle, y, k);

    let rate_acc = if ra[k - 1] == 0.0 {
        f64::INFINITY
    } else {
        scalar::powi(ra[m] / ra[k - 1], q_steps as u32)
    };
    let c_m = gamma_km(&qtx0, k, m) * gamma_v * norm;
    let accuracy = BoundReport::checked(tag("power-accuracy-bound"), delta_y, c_m * rate_acc);

    let delta_x = delta_k(oracle, &x, k);
    let ratio = if delta_x == 0.0 || !delta_x.is_finite() {
        BoundReport::skipped(tag("power-ratio-bound"), "input accuracy ratio is degenerate")
    } else {
        // The constant uses the *tail* rows of the initial block: largest
        // row norm past m over the smallest past k.
        let mut head = 0.0f64;
        for i in m..n {
            head = head.max(qtx0.row_norm(i));
        }
        let mut den = f64::INFINITY;
        for i in k..n {
            den = den.min(qtx0.row_norm(i));
        }
        let c_tail = if den == 0.0 { f64::INFINITY } else { head / den };
        let rate = if ra[k] == 0.0 {
            f64::INFINITY
        } else {
            scalar::powi(ra[m] / ra[k], q_steps as u32)
        };
        BoundReport::checked(
            tag("power-ratio-bound"),
            delta_y / delta_x,
            c_tail * gamma_v * norm * rate,
        )
    };

    PowerBoundReport { accuracy, ratio }
}

/// Descending geometric spectrum `first * ratio^i` for `0 < ratio < 1`.
pub fn geometric_spectrum(n: usize, first: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut v = first;
    for _ in 0..n {
        out.push(v);
        v *= ratio;
    }
    out
}

/// Spectrum that decays linearly from `top` over the first `k` values and
/// then stays flat at `tail`.
pub fn flat_tail_spectrum(n: usize, k: usize, top: f64, tail: f64) -> Vec<f64> {
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    assert!(top > tail, "top must exceed the tail level");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i < k {
            out.push(top - (top - tail) * (i as f64) / (k as f64));
        } else {
            out.push(tail);
        }
    }
    out
}

/// Spectrum made of flat clusters: each `(center, count)` contributes
/// `count` copies of `center`. Centers must be given in descending order.
pub fn clustered_spectrum(clusters: &[(f64, usize)]) -> Vec<f64> {
    let mut out = Vec::new();
    for pair in clusters.windows(2) {
        assert!(pair[0].0 >= pair[1].0, "cluster centers must be descending");
    }
    for &(center, count) in clusters {
        for _ in 0..count {
            out.push(center);
        }
    }
    out
}

/// Sparse matrix with the given spectrum and a seeded random orthogonal
/// eigenbasis (Q diag Q^T, assembled from its upper triangle). The result is
/// dense in sparse form; this is an analysis-instrument generator.
pub fn rotated_from_spectrum<R: Rng + ?Sized>(
    values: &[f64],
    rng: &mut R,
) -> Result<SparseSymMatrix, AnalysisError> {
    let n = values.len();
    if n > MAX_ORACLE_DIM {
        return Err(AnalysisError::DimensionTooLarge { n });
    }
    assert!(n >= 1, "spectrum must be nonempty");
    let (q, rank) = orthonormalize(&DenseBlock::gaussian(n, n, rng));
    assert_eq!(rank, n, "random Gaussian square block has full rank");
    let mut qd = q.clone();
    for j in 0..n {
        for t in qd.col_mut(j) {
            *t *= values[j];
        }
    }
    let a = qd.mul(&q.transpose());
    // Rounding makes the product only near-symmetric; feed one triangle and
    // let the constructor mirror it.
    let mut trip = Vec::new();
    for j in 0..n {
        for i in 0..=j {
            let val = a.at(i, j);
            if val != 0.0 {
                trip.push((i, j, val));
            }
        }
    }
    Ok(SparseSymMatrix::from_triplets(n, &trip)?)
}
