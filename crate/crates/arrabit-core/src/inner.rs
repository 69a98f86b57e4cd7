//! Subspace update sweeps run between projections.
//!
//! Two updates are available. The multiplication sweep applies the polynomial
//! filter to the block and rescales each column to unit norm — no
//! orthogonalization, so columns drift toward the dominant filtered
//! directions and the block conditioning degrades on purpose. The
//! normalization-free sweep instead keeps the block well scaled through a
//! Gram solve and a half correction, trading three extra small dense
//! products per sweep for better conditioning at tight tolerances.
//!
//! Between blocks of sweeps the caller probes the Gram conditioning
//! ([`inner_stop_check`]) to decide whether the block has collapsed onto too
//! few directions (time to project) or stopped changing (also time to
//! project).

use alloc::vec::Vec;
use rand::Rng;

use crate::block::DenseBlock;
use crate::dense::{cholesky_solve, gram, rcond_gram};
use crate::filter::{apply_filter, PolyFilter};
use crate::projection::{project_out, Deflation};
use crate::scalar;
use crate::sparse::SymOperator;

/// Conditioning ratio above which the inner iteration is considered
/// stagnant: the reciprocal condition number stopped shrinking.
pub const STAGNATION_RATIO: f64 = 0.99;

/// Why a block of inner sweeps ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// No stop condition met; keep sweeping.
    None,
    /// The block conditioning fell below the working tolerance — the columns
    /// have collapsed toward the wanted subspace.
    RankLoss,
    /// Conditioning stopped improving between two probes.
    Stagnation,
    /// The sweep budget for this outer iteration ran out.
    Budget,
}

/// Conditioning state threaded through one outer iteration's inner sweeps.
#[derive(Debug, Clone, Copy)]
pub struct InnerStatus {
    /// Reciprocal condition estimate of the block Gram matrix at the last
    /// probe; starts at infinity so the first probe can never look stagnant.
    pub rc: f64,
    /// Previous probe's value.
    pub rcp: f64,
    pub sweeps_done: usize,
    pub stop: StopReason,
}

impl InnerStatus {
    pub fn new() -> Self {
        Self { rc: f64::INFINITY, rcp: f64::INFINITY, sweeps_done: 0, stop: StopReason::None }
    }
}

impl Default for InnerStatus {
    fn default() -> Self {
        Self::new()
    }
}

/// Outcome of a block of normalization-free sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOutcome {
    Completed { sweeps: usize },
    /// The block Gram matrix lost positive definiteness mid-block; the
    /// partial result is still usable and the caller should project now.
    RankLoss { sweeps: usize },
}

/// Runs `count` repetitions of filter-then-normalize on `x`, then projects
/// the locked directions out once. Returns how many dead columns (exactly
/// zero after filtering) were replaced with fresh random unit columns.
pub fn mpm_sweep<O: SymOperator, R: Rng + ?Sized>(
    op: &O,
    shift: f64,
    x: &mut DenseBlock,
    filter: &PolyFilter,
    defl: &Deflation,
    count: usize,
    rng: &mut R,
) -> usize {
    let mut dead = 0;
    for _ in 0..count {
        *x = apply_filter(op, shift, x, filter);
        for j in 0..x.cols() {
            let norm = x.col_norm(j);
            if norm == 0.0 {
                refresh_column(x, j, rng);
                dead += 1;
                log::warn!("column {j} vanished under the filter; replaced with a random unit column");
            } else {
                let inv = 1.0 / norm;
                for v in x.col_mut(j) {
                    *v *= inv;
                }
            }
        }
    }
    if !defl.is_empty() {
        project_out(x, defl);
    }
    dead
}

fn refresh_column<R: Rng + ?Sized>(x: &mut DenseBlock, j: usize, rng: &mut R) {
    let rows = x.rows();
    let fresh = DenseBlock::gaussian(rows, 1, rng);
    let norm = fresh.col_norm(0);
    let col = x.col_mut(j);
    for (dst, src) in col.iter_mut().zip(fresh.col(0)) {
        *dst = src / norm;
    }
}

/// Runs up to `count` normalization-free sweeps
/// `X <- Z - X (Y^T Z - I) / 2` with `Y = X (X^T X)^{-1}` and `Z` the
/// filtered image of `Y`, then projects the locked directions out once.
/// Stops early if the Gram factorization fails.
pub fn gn_sweep<O: SymOperator>(
    op: &O,
    shift: f64,
    x: &mut DenseBlock,
    filter: &PolyFilter,
    defl: &Deflation,
    count: usize,
) -> SweepOutcome {
    let k = x.cols();
    let mut outcome = SweepOutcome::Completed { sweeps: count };
    for s in 0..count {
        let g = gram(x);
        let xt = x.transpose();
        let y = match cholesky_solve(&g, &xt) {
            Ok(sol) => sol.transpose(),
            Err(_) => {
                outcome = SweepOutcome::RankLoss { sweeps: s };
                break;
            }
        };
        let z = apply_filter(op, shift, &y, filter);
        let mut w = y.tr_mul(&z);
        for i in 0..k {
            *w.at_mut(i, i) -= 1.0;
        }
        w.scale(0.5);
        let correction = x.mul(&w);
        *x = z;
        x.add_scaled(-1.0, &correction);
    }
    if !defl.is_empty() {
        project_out(x, defl);
    }
    outcome
}

/// Probes the block conditioning and updates the stop decision: rank loss
/// when the reciprocal condition number falls to the working tolerance,
/// stagnation when it stopped shrinking since the previous probe.
pub fn inner_stop_check(x: &DenseBlock, status: &mut InnerStatus, tol_t: f64) {
    status.rcp = status.rc;
    status.rc = rcond_gram(&gram(x));
    status.stop = if status.rc <= tol_t {
        StopReason::RankLoss
    } else if status.rc / status.rcp > STAGNATION_RATIO {
        StopReason::Stagnation
    } else {
        StopReason::None
    };
}

/// Column norms of a block, used by tests and diagnostics.
pub fn column_norms(x: &DenseBlock) -> Vec<f64> {
    (0..x.cols()).map(|j| x.col_norm(j)).collect()
}

/// Euclidean norm of the elementwise difference of two equally sized blocks.
pub fn block_distance(a: &DenseBlock, b: &DenseBlock) -> f64 {
    assert_eq!(a.rows(), b.rows());
    assert_eq!(a.cols(), b.cols());
    let mut acc = 0.0;
    for (x, y) in a.data().iter().zip(b.data().iter()) {
        let d = x - y;
        acc += d * d;
    }
    scalar::sqrt(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::orthonormalize;
    use crate::sparse::SparseSymMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_matrix(values: &[f64]) -> SparseSymMatrix {
        let trip: Vec<(usize, usize, f64)> =
            values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        SparseSymMatrix::from_triplets(values.len(), &trip).unwrap()
    }

    /// Degree-1 filter that reproduces the operator itself on [-1, 1]:
    /// psi(t) = t.
    fn identity_filter() -> PolyFilter {
        PolyFilter::build_classic_chebyshev(1).unwrap()
    }

    #[test]
    fn multiplication_sweep_matches_hand_computation() {
        let a = diag_matrix(&[4.0, 1.0]);
        let inv = 1.0 / scalar::sqrt(2.0);
        let mut x = DenseBlock::from_raw(2, 1, vec![inv, inv]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dead =
            mpm_sweep(&a, 0.0, &mut x, &identity_filter(), &Deflation::empty(2), 1, &mut rng);
        assert_eq!(dead, 0);
        let norm = scalar::sqrt(17.0);
        assert!((x.at(0, 0) - 4.0 / norm).abs() <= 1e-15);
        assert!((x.at(1, 0) - 1.0 / norm).abs() <= 1e-15);
    }

    #[test]
    fn dominant_eigenvector_is_a_fixed_point() {
        let a = diag_matrix(&[4.0, 1.0, 0.5]);
        let mut x = DenseBlock::identity(3).leading_cols(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        mpm_sweep(&a, 0.0, &mut x, &identity_filter(), &Deflation::empty(3), 1, &mut rng);
        assert_eq!(x.at(0, 0), 1.0);
        assert_eq!(x.at(1, 0), 0.0);
        assert_eq!(x.at(2, 0), 0.0);
    }

    #[test]
    fn multiplication_sweep_matches_dense_composition() {
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = DenseBlock::gaussian(n, n, &mut rng);
        let mut h = raw.clone();
        h.add_scaled(1.0, &raw.transpose());
        h.scale(0.5);
        let a = SparseSymMatrix::from_dense(&h).unwrap();
        let filter = PolyFilter::build_interpolant(5).unwrap().with_interval(-2.0, 20.0).unwrap();

        let x0 = DenseBlock::gaussian(n, 4, &mut rng);
        let mut x = x0.clone();
        let mut sweep_rng = ChaCha8Rng::seed_from_u64(4);
        mpm_sweep(&a, 0.0, &mut x, &filter, &Deflation::empty(n), 3, &mut sweep_rng);

        // Replicate with a plain dense evaluation of the same polynomial.
        let mut want = x0;
        for _ in 0..3 {
            want = apply_filter(&a, 0.0, &want, &filter);
            for j in 0..want.cols() {
                let norm = want.col_norm(j);
                for v in want.col_mut(j) {
                    *v /= norm;
                }
            }
        }
        assert!(block_distance(&x, &want) <= 1e-12);

        for &norm in &column_norms(&x) {
            assert!((norm - 1.0).abs() <= 1e-13);
        }
    }

    #[test]
    fn sweep_projects_out_locked_directions_once() {
        let n = 30;
        let a = diag_matrix(&(0..n).map(|i| (n - i) as f64).collect::<Vec<_>>());
        let basis = DenseBlock::identity(n).leading_cols(2);
        let defl = Deflation { values: vec![30.0, 29.0], basis, residuals: vec![0.0; 2] };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = DenseBlock::gaussian(n, 3, &mut rng);
        mpm_sweep(&a, 0.0, &mut x, &identity_filter(), &defl, 2, &mut rng);
        let overlap = defl.basis.tr_mul(&x);
        assert!(overlap.max_abs() <= 1e-12 * x.max_abs().max(1.0));
    }

    #[test]
    fn vanished_column_is_replaced_with_unit_noise() {
        // The second coordinate lies in the null space, so the pure operator
        // filter T_1 sends e2 to exactly zero.
        let a = diag_matrix(&[1.0, 0.0]);
        let mut x = DenseBlock::identity(2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dead = mpm_sweep(&a, 0.0, &mut x, &identity_filter(), &Deflation::empty(2), 1, &mut rng);
        assert_eq!(dead, 1);
        assert!((x.col_norm(1) - 1.0).abs() <= 1e-15);
        // First column survived untouched by the refresh.
        assert_eq!(x.at(0, 0), 1.0);
    }

    #[test]
    fn normalization_free_step_matches_scalar_formula() {
        // One dimension, x = 1, A = 2, identity filter: y = 1, z = 2,
        // w = (2 - 1)/2, x+ = 2 - 1*(1/2) = 1.5.
        let a = diag_matrix(&[2.0]);
        let mut x = DenseBlock::from_raw(1, 1, vec![1.0]);
        let out = gn_sweep(&a, 0.0, &mut x, &identity_filter(), &Deflation::empty(1), 1);
        assert_eq!(out, SweepOutcome::Completed { sweeps: 1 });
        assert!((x.at(0, 0) - 1.5).abs() <= 1e-15);
    }

    #[test]
    fn orthonormal_invariant_block_is_a_fixed_point() {
        // Leading eigenvalues are exactly 1, so z = x and the correction
        // vanishes identically.
        let a = diag_matrix(&[1.0, 1.0, 0.25, 0.125]);
        let mut x = DenseBlock::identity(4).leading_cols(2);
        let before = x.clone();
        gn_sweep(&a, 0.0, &mut x, &identity_filter(), &Deflation::empty(4), 3);
        assert!(block_distance(&x, &before) <= 1e-14);
    }

    /// Straight-line replica of one normalization-free sweep using an
    /// explicit inverse.
    fn gn_step_oracle(
        a: &SparseSymMatrix,
        x: &DenseBlock,
        filter: &PolyFilter,
    ) -> DenseBlock {
        let g = gram(x);
        let gi = crate::dense::tests_support::gauss_jordan_inverse(&g);
        let y = x.mul(&gi);
        let z = apply_filter(a, 0.0, &y, filter);
        let mut w = y.tr_mul(&z);
        for i in 0..w.rows() {
            *w.at_mut(i, i) -= 1.0;
        }
        w.scale(0.5);
        let mut out = z;
        out.add_scaled(-1.0, &x.mul(&w));
        out
    }

    #[test]
    fn normalization_free_sweep_matches_explicit_inverse() {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let raw = DenseBlock::gaussian(n, n, &mut rng);
        let mut h = raw.clone();
        h.add_scaled(1.0, &raw.transpose());
        h.scale(0.5);
        let a = SparseSymMatrix::from_dense(&h).unwrap();
        let filter = PolyFilter::build_interpolant(4).unwrap().with_interval(-15.0, 12.0).unwrap();

        let x0 = DenseBlock::gaussian(n, 5, &mut rng);
        let want = gn_step_oracle(&a, &x0, &filter);
        let mut got = x0;
        let out = gn_sweep(&a, 0.0, &mut got, &filter, &Deflation::empty(n), 1);
        assert_eq!(out, SweepOutcome::Completed { sweeps: 1 });
        assert!(block_distance(&got, &want) <= 1e-10 * want.frob_norm().max(1.0));
    }

    #[test]
    fn rank_deficient_block_reports_rank_loss() {
        let a = diag_matrix(&[3.0, 2.0, 1.0]);
        let e1 = DenseBlock::identity(3).leading_cols(1);
        let mut x = e1.hcat(&e1);
        let out = gn_sweep(&a, 0.0, &mut x, &identity_filter(), &Deflation::empty(3), 4);
        assert_eq!(out, SweepOutcome::RankLoss { sweeps: 0 });
    }

    #[test]
    fn conditioning_probe_detects_rank_loss_and_stagnation() {
        let mut status = InnerStatus::new();
        assert_eq!(status.stop, StopReason::None);

        // Well-conditioned block on the first probe: no stop. The previous
        // value is infinite, so the ratio test cannot fire spuriously.
        let q = DenseBlock::identity(5).leading_cols(3);
        inner_stop_check(&q, &mut status, 1e-8);
        assert_eq!(status.stop, StopReason::None);
        assert!((status.rc - 1.0).abs() <= 1e-12);

        // Unchanged conditioning on the second probe: stagnation.
        inner_stop_check(&q, &mut status, 1e-8);
        assert_eq!(status.stop, StopReason::Stagnation);

        // Nearly dependent columns: reciprocal conditioning collapses.
        let mut bad = DenseBlock::zeros(5, 2);
        bad.set(0, 0, 1.0);
        bad.set(0, 1, 1.0);
        bad.set(1, 1, 1e-12);
        let mut status = InnerStatus::new();
        inner_stop_check(&bad, &mut status, 1e-8);
        assert_eq!(status.stop, StopReason::RankLoss);
    }

    #[test]
    fn repeated_sweeps_converge_toward_dominant_subspace() {
        // Spectrum with a clean gap after the second eigenvalue.
        let a = diag_matrix(&[10.0, 9.0, 1.0, 0.9, 0.8, 0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut x = DenseBlock::gaussian(6, 2, &mut rng);
        for _ in 0..20 {
            mpm_sweep(&a, 0.0, &mut x, &identity_filter(), &Deflation::empty(6), 1, &mut rng);
        }
        let (u, rank) = orthonormalize(&x);
        assert_eq!(rank, 2);
        // The span should be within the leading two coordinates.
        for j in 0..2 {
            let tail: f64 = u.col(j)[2..].iter().map(|v| v * v).sum();
            assert!(tail <= 1e-10, "tail mass {tail}");
        }
    }
}
