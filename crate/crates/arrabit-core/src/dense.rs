//! Dense kernels for the small matrices the solver projects onto: QR
//! orthonormalization with rank detection, a cyclic Jacobi symmetric
//! eigensolver, Gram matrices, Cholesky solves and a reciprocal condition
//! number from the exact inverse.
//!
//! Process-wide call counters for the three factorization entry points are
//! exposed through [`op_counts`] so runs can assert which code paths were
//! exercised (e.g. that power sweeps never orthonormalize).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::block::DenseBlock;
use crate::scalar;

static ORTHONORMALIZE_CALLS: AtomicU64 = AtomicU64::new(0);
static CHOLESKY_SOLVE_CALLS: AtomicU64 = AtomicU64::new(0);
static RCOND_CALLS: AtomicU64 = AtomicU64::new(0);

/// Snapshot of the process-wide dense-factorization call counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseOpCounts {
    pub orthonormalize: u64,
    pub cholesky_solve: u64,
    pub rcond: u64,
}

pub fn op_counts() -> DenseOpCounts {
    DenseOpCounts {
        orthonormalize: ORTHONORMALIZE_CALLS.load(Ordering::Relaxed),
        cholesky_solve: CHOLESKY_SOLVE_CALLS.load(Ordering::Relaxed),
        rcond: RCOND_CALLS.load(Ordering::Relaxed),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DenseLaError {
    NotSquare,
    NonFinite,
    NotPositiveDefinite,
    /// The Jacobi iteration failed to drive the off-diagonal to zero.
    NoConvergence,
    DimensionMismatch,
}

impl fmt::Display for DenseLaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            DenseLaError::NotSquare => "matrix is not square",
            DenseLaError::NonFinite => "matrix has non-finite entries",
            DenseLaError::NotPositiveDefinite => "matrix is not positive definite",
            DenseLaError::NoConvergence => "eigenvalue iteration did not converge",
            DenseLaError::DimensionMismatch => "operand dimensions do not match",
        };
        write!(f, "{msg}")
    }
}

impl core::error::Error for DenseLaError {}

/// Two-norm of a slice, scaled by the largest magnitude so columns far
/// outside the normal range (down to subnormals) neither underflow nor
/// overflow when squared.
fn robust_norm(xs: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &x in xs {
        m = m.max(scalar::abs(x));
    }
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let mut acc = 0.0;
    for &x in xs {
        let s = x / m;
        acc += s * s;
    }
    m * scalar::sqrt(acc)
}

/// Orthonormal basis of the numerically independent columns of `z`.
///
/// Householder QR without pivoting; a column whose remainder after the
/// accepted reflectors has norm at most `n * eps * ||column||` is treated as
/// dependent and skipped. Returns the basis (one column per accepted input
/// column, in input order) and its width.
pub fn orthonormalize(z: &DenseBlock) -> (DenseBlock, usize) {
    ORTHONORMALIZE_CALLS.fetch_add(1, Ordering::Relaxed);
    let n = z.rows();
    let b = z.cols();
    assert!(b <= n, "more columns than rows");

    let mut w = z.clone();
    // Reflector t zeroes rows (pivot_t + 1).. of its column; stored dense
    // from its pivot row down.
    let mut reflectors: Vec<(usize, Vec<f64>)> = Vec::with_capacity(b);
    let orig_norms: Vec<f64> = (0..b).map(|j| robust_norm(z.col(j))).collect();

    let mut rank = 0usize;
    for j in 0..b {
        // Bring column j up to date with the accepted reflectors.
        let col = w.col_mut(j);
        for (pivot, v) in &reflectors {
            let mut s = 0.0;
            for (vi, ci) in v.iter().zip(col[*pivot..].iter()) {
                s += vi * ci;
            }
            s *= 2.0;
            for (vi, ci) in v.iter().zip(col[*pivot..].iter_mut()) {
                *ci -= s * vi;
            }
        }

        let tail = &col[rank..];
        let tail_norm = robust_norm(tail);
        let threshold = n as f64 * f64::EPSILON * orig_norms[j];
        if !(tail_norm > threshold) {
            continue; // dependent (or zero) column
        }

        // Householder vector for the tail: v = x + sign(x0) ||x|| e0, scaled
        // to a safe range before normalizing.
        let mut v: Vec<f64> = tail.iter().map(|&x| x / tail_norm).collect();
        v[0] += if v[0] >= 0.0 { 1.0 } else { -1.0 };
        let vnorm = robust_norm(&v);
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        reflectors.push((rank, v));
        rank += 1;
    }

    // U = H_1 H_2 ... H_r applied to the leading identity columns.
    let mut u = DenseBlock::zeros(n, rank);
    for t in 0..rank {
        u.set(t, t, 1.0);
    }
    for (pivot, v) in reflectors.iter().rev() {
        for c in 0..rank {
            let col = u.col_mut(c);
            let mut s = 0.0;
            for (vi, ci) in v.iter().zip(col[*pivot..].iter()) {
                s += vi * ci;
            }
            s *= 2.0;
            for (vi, ci) in v.iter().zip(col[*pivot..].iter_mut()) {
                *ci -= s * vi;
            }
        }
    }
    (u, rank)
}

/// Eigen decomposition of a symmetric matrix: `values` descending and the
/// matching orthonormal `vectors` columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DenseBlock,
}

/// Cap on Jacobi sweeps; cyclic Jacobi converges quadratically, typically in
/// well under 15 sweeps.
const JACOBI_MAX_SWEEPS: usize = 100;

/// Full eigen decomposition by cyclic Jacobi rotations.
///
/// The input is symmetrized as `(H + H^T) / 2` before iterating, eigenpairs
/// are sorted by descending value, and each vector is normalized so its
/// largest-magnitude entry (first such entry on ties) is positive.
pub fn sym_eig_dense(h: &DenseBlock) -> Result<SymEig, DenseLaError> {
    if h.rows() != h.cols() {
        return Err(DenseLaError::NotSquare);
    }
    if !h.iter_finite() {
        return Err(DenseLaError::NonFinite);
    }
    let m = h.rows();
    if m == 0 {
        return Ok(SymEig { values: Vec::new(), vectors: DenseBlock::zeros(0, 0) });
    }

    // Upper triangle of the symmetrized input, row-major scratch.
    let mut a = vec![0.0f64; m * m];
    for i in 0..m {
        for j in i..m {
            a[i * m + j] = 0.5 * (h.at(i, j) + h.at(j, i));
        }
    }
    let mut v = DenseBlock::identity(m);
    let mut d: Vec<f64> = (0..m).map(|i| a[i * m + i]).collect();
    let mut b_acc = d.clone();
    let mut z = vec![0.0f64; m];

    let mut converged = false;
    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..m - 1 {
            for j in i + 1..m {
                off += scalar::abs(a[i * m + j]);
            }
        }
        if off == 0.0 {
            converged = true;
            break;
        }
        let thresh = if sweep < 3 { 0.2 * off / (m * m) as f64 } else { 0.0 };

        for p in 0..m - 1 {
            for q in p + 1..m {
                let apq = a[p * m + q];
                let g = 100.0 * scalar::abs(apq);
                if sweep > 3
                    && scalar::abs(d[p]) + g == scalar::abs(d[p])
                    && scalar::abs(d[q]) + g == scalar::abs(d[q])
                {
                    a[p * m + q] = 0.0;
                    continue;
                }
                if scalar::abs(apq) <= thresh {
                    continue;
                }

                let h_diff = d[q] - d[p];
                let t = if scalar::abs(h_diff) + g == scalar::abs(h_diff) {
                    apq / h_diff
                } else {
                    let theta = 0.5 * h_diff / apq;
                    let mut t = 1.0 / (scalar::abs(theta) + scalar::sqrt(1.0 + theta * theta));
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / scalar::sqrt(1.0 + t * t);
                let s = t * c;
                let tau = s / (1.0 + c);
                let hh = t * apq;
                z[p] -= hh;
                z[q] += hh;
                d[p] -= hh;
                d[q] += hh;
                a[p * m + q] = 0.0;

                let rot = |x: f64, y: f64| (x - s * (y + tau * x), y + s * (x - tau * y));
                for j in 0..p {
                    let (x, y) = rot(a[j * m + p], a[j * m + q]);
                    a[j * m + p] = x;
                    a[j * m + q] = y;
                }
                for j in p + 1..q {
                    let (x, y) = rot(a[p * m + j], a[j * m + q]);
                    a[p * m + j] = x;
                    a[j * m + q] = y;
                }
                for j in q + 1..m {
                    let (x, y) = rot(a[p * m + j], a[q * m + j]);
                    a[p * m + j] = x;
                    a[q * m + j] = y;
                }
                // Rotate the eigenvector columns p and q.
                let (lo, hi) = if p < q { (p, q) } else { (q, p) };
                let (head, tail) = v.data_mut().split_at_mut(hi * m);
                let col_p = &mut head[lo * m..lo * m + m];
                let col_q = &mut tail[..m];
                for (xp, xq) in col_p.iter_mut().zip(col_q.iter_mut()) {
                    let x = *xp;
                    let y = *xq;
                    *xp = c * x - s * y;
                    *xq = s * x + c * y;
                }
            }
        }

        for i in 0..m {
            b_acc[i] += z[i];
            d[i] = b_acc[i];
            z[i] = 0.0;
        }
    }
    if !converged {
        return Err(DenseLaError::NoConvergence);
    }

    // Sort pairs by descending eigenvalue; stable so ties keep their order.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = v.select_cols(&order);

    canonical_column_signs(&mut vectors);

    Ok(SymEig { values, vectors })
}

/// Flips each column so its largest-magnitude entry (first such entry on
/// ties) is positive — the deterministic sign convention for computed
/// eigenvectors and Ritz vectors.
pub(crate) fn canonical_column_signs(vectors: &mut DenseBlock) {
    for j in 0..vectors.cols() {
        let col = vectors.col_mut(j);
        if col.is_empty() {
            continue;
        }
        let mut best = 0usize;
        let mut best_abs = scalar::abs(col[0]);
        for (i, &x) in col.iter().enumerate().skip(1) {
            let ax = scalar::abs(x);
            if ax > best_abs {
                best_abs = ax;
                best = i;
            }
        }
        if col[best] < 0.0 {
            for x in col.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// `X^T X`, computed on the upper triangle and mirrored so the result is
/// exactly symmetric.
pub fn gram(x: &DenseBlock) -> DenseBlock {
    let b = x.cols();
    let mut g = DenseBlock::zeros(b, b);
    for i in 0..b {
        let ci = x.col(i);
        for j in i..b {
            let cj = x.col(j);
            let mut acc = 0.0;
            for (a, b) in ci.iter().zip(cj.iter()) {
                acc += a * b;
            }
            g.set(i, j, acc);
            g.set(j, i, acc);
        }
    }
    g
}

/// Lower Cholesky factor `L` with `L L^T = G`, or an error if a pivot is not
/// strictly positive.
fn cholesky_factor(g: &DenseBlock) -> Result<DenseBlock, DenseLaError> {
    if g.rows() != g.cols() {
        return Err(DenseLaError::NotSquare);
    }
    let m = g.rows();
    let mut l = DenseBlock::zeros(m, m);
    for j in 0..m {
        let mut diag = g.at(j, j);
        for k in 0..j {
            let x = l.at(j, k);
            diag -= x * x;
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(DenseLaError::NotPositiveDefinite);
        }
        let ljj = scalar::sqrt(diag);
        l.set(j, j, ljj);
        for i in j + 1..m {
            let mut acc = g.at(i, j);
            for k in 0..j {
                acc -= l.at(i, k) * l.at(j, k);
            }
            l.set(i, j, acc / ljj);
        }
    }
    Ok(l)
}

fn cholesky_solve_factored(l: &DenseBlock, rhs: &DenseBlock) -> DenseBlock {
    let m = l.rows();
    let mut y = rhs.clone();
    for c in 0..y.cols() {
        let col = y.col_mut(c);
        // L w = rhs
        for i in 0..m {
            let mut acc = col[i];
            for k in 0..i {
                acc -= l.at(i, k) * col[k];
            }
            col[i] = acc / l.at(i, i);
        }
        // L^T x = w
        for i in (0..m).rev() {
            let mut acc = col[i];
            for k in i + 1..m {
                acc -= l.at(k, i) * col[k];
            }
            col[i] = acc / l.at(i, i);
        }
    }
    y
}

/// Solves `G Y = B` for symmetric positive definite `G`.
pub fn cholesky_solve(g: &DenseBlock, rhs: &DenseBlock) -> Result<DenseBlock, DenseLaError> {
    CHOLESKY_SOLVE_CALLS.fetch_add(1, Ordering::Relaxed);
    if g.rows() != rhs.rows() {
        return Err(DenseLaError::DimensionMismatch);
    }
    let l = cholesky_factor(g)?;
    Ok(cholesky_solve_factored(&l, rhs))
}

fn norm1(g: &DenseBlock) -> f64 {
    let mut best = 0.0f64;
    for j in 0..g.cols() {
        let mut s = 0.0;
        for &x in g.col(j) {
            s += scalar::abs(x);
        }
        best = best.max(s);
    }
    best
}

/// Reciprocal 1-norm condition number `1 / (||G||_1 ||G^-1||_1)` of a Gram
/// matrix, with the inverse taken exactly through a Cholesky factorization.
/// Returns 0 when the factorization fails (numerically singular or
/// indefinite input) and 1 for an empty matrix.
pub fn rcond_gram(g: &DenseBlock) -> f64 {
    RCOND_CALLS.fetch_add(1, Ordering::Relaxed);
    if g.rows() != g.cols() {
        return 0.0;
    }
    let m = g.rows();
    if m == 0 {
        return 1.0;
    }
    let l = match cholesky_factor(g) {
        Ok(l) => l,
        Err(_) => return 0.0,
    };
    let inv = cholesky_solve_factored(&l, &DenseBlock::identity(m));
    let denom = norm1(g) * norm1(&inv);
    if !(denom > 0.0) || !denom.is_finite() {
        return 0.0;
    }
    (1.0 / denom).min(1.0)
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    /// Explicit inverse by Gauss-Jordan elimination with partial pivoting;
    /// independent of the Cholesky path.
    pub(crate) fn gauss_jordan_inverse(g: &DenseBlock) -> DenseBlock {
        let m = g.rows();
        let mut a = g.clone();
        let mut inv = DenseBlock::identity(m);
        for col in 0..m {
            let mut piv = col;
            for r in col + 1..m {
                if a.at(r, col).abs() > a.at(piv, col).abs() {
                    piv = r;
                }
            }
            for j in 0..m {
                let tmp = a.at(col, j);
                a.set(col, j, a.at(piv, j));
                a.set(piv, j, tmp);
                let tmp = inv.at(col, j);
                inv.set(col, j, inv.at(piv, j));
                inv.set(piv, j, tmp);
            }
            let p = a.at(col, col);
            for j in 0..m {
                a.set(col, j, a.at(col, j) / p);
                inv.set(col, j, inv.at(col, j) / p);
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a.at(r, col);
                if f == 0.0 {
                    continue;
                }
                for j in 0..m {
                    a.set(r, j, a.at(r, j) - f * a.at(col, j));
                    inv.set(r, j, inv.at(r, j) - f * inv.at(col, j));
                }
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::gauss_jordan_inverse;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &DenseBlock, b: &DenseBlock) -> f64 {
        a.data()
            .iter()
            .zip(b.data().iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn orthonormalize_keeps_scaled_independent_columns() {
        let mut z = DenseBlock::zeros(5, 3);
        z.set(0, 0, 1.0);
        z.set(1, 1, 1e-8);
        z.set(2, 2, 1e-300);
        let (u, rank) = orthonormalize(&z);
        assert_eq!(rank, 3);
        let g = gram(&u);
        assert!(max_abs_diff(&g, &DenseBlock::identity(3)) < 1e-14);
    }

    #[test]
    fn orthonormalize_drops_duplicate_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base = DenseBlock::gaussian(40, 5, &mut rng);
        let dup = base.hcat(&base.leading_cols(1));
        let (u, rank) = orthonormalize(&dup);
        assert_eq!(rank, 5);
        assert_eq!(u.cols(), 5);
    }

    #[test]
    fn orthonormalize_zero_block_has_rank_zero() {
        let z = DenseBlock::zeros(7, 3);
        let (u, rank) = orthonormalize(&z);
        assert_eq!(rank, 0);
        assert_eq!(u.cols(), 0);
    }

    #[test]
    fn orthonormalize_random_block_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let z = DenseBlock::gaussian(100, 10, &mut rng);
        let (u, rank) = orthonormalize(&z);
        assert_eq!(rank, 10);
        assert!(max_abs_diff(&gram(&u), &DenseBlock::identity(10)) < 1e-12);
        // Span is preserved: Z = U (U^T Z).
        let proj = u.mul(&u.tr_mul(&z));
        let mut err = 0.0f64;
        for (a, b) in proj.data().iter().zip(z.data().iter()) {
            err = err.max((a - b).abs());
        }
        assert!(err <= 1e-10 * z.frob_norm());
    }

    #[test]
    fn orthonormalize_same_span_twice() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let z = DenseBlock::gaussian(30, 4, &mut rng);
        let (u1, _) = orthonormalize(&z);
        // Mix the columns with a random invertible 4x4 to change the basis.
        let mix = DenseBlock::gaussian(4, 4, &mut rng);
        let zm = z.mul(&mix);
        let (u2, r2) = orthonormalize(&zm);
        assert_eq!(r2, 4);
        // Principal-angle cosines are the singular values of U1^T U2; all
        // should be 1 when the spans agree.
        let c = u1.tr_mul(&u2);
        let eig = sym_eig_dense(&c.tr_mul(&c)).unwrap();
        for &s in &eig.values {
            assert!((s - 1.0).abs() < 1e-10, "cos^2 {s}");
        }
    }

    #[test]
    fn sym_eig_two_by_two() {
        let h = DenseBlock::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 1.0 });
        let e = sym_eig_dense(&h).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((e.vectors.at(0, 0) - inv_sqrt2).abs() < 1e-12);
        assert!((e.vectors.at(1, 0) - inv_sqrt2).abs() < 1e-12);
    }

    #[test]
    fn sym_eig_sorts_diagonal_input() {
        let mut h = DenseBlock::zeros(4, 4);
        for (i, v) in [3.0, -1.0, 7.0, 2.0].iter().enumerate() {
            h.set(i, i, *v);
        }
        let e = sym_eig_dense(&h).unwrap();
        assert_eq!(e.values, vec![7.0, 3.0, 2.0, -1.0]);
        // Each vector is a positively signed unit column.
        for j in 0..4 {
            assert!((e.vectors.col_norm(j) - 1.0).abs() < 1e-14);
            assert!(e.vectors.max_abs() > 0.0);
        }
    }

    #[test]
    fn sym_eig_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let raw = DenseBlock::gaussian(30, 30, &mut rng);
        let h = {
            let mut s = raw.clone();
            let t = raw.transpose();
            s.add_scaled(1.0, &t);
            s
        };
        let e = sym_eig_dense(&h).unwrap();
        // Reconstruction: H = V diag(values) V^T.
        let mut vd = e.vectors.clone();
        for j in 0..30 {
            let lam = e.values[j];
            for x in vd.col_mut(j) {
                *x *= lam;
            }
        }
        let rec = vd.mul(&e.vectors.transpose());
        let mut err = 0.0f64;
        for (a, b) in rec.data().iter().zip(h.data().iter()) {
            err = err.max((a - b).abs());
        }
        assert!(err <= 1e-11 * h.frob_norm(), "err {err}");
        // Trace is conserved.
        let tr_h: f64 = (0..30).map(|i| h.at(i, i)).sum();
        let tr_e: f64 = e.values.iter().sum();
        assert!((tr_h - tr_e).abs() <= 1e-10 * h.frob_norm());
        // Values are descending and vectors orthonormal.
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(max_abs_diff(&gram(&e.vectors), &DenseBlock::identity(30)) < 1e-12);
    }

    #[test]
    fn sym_eig_sign_convention_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let raw = DenseBlock::gaussian(12, 12, &mut rng);
        let mut h = raw.clone();
        h.add_scaled(1.0, &raw.transpose());
        let e1 = sym_eig_dense(&h).unwrap();
        let e2 = sym_eig_dense(&h).unwrap();
        assert_eq!(e1.vectors.data(), e2.vectors.data());
        for j in 0..12 {
            let col = e1.vectors.col(j);
            let mut best = 0usize;
            for (i, &x) in col.iter().enumerate() {
                if x.abs() > col[best].abs() {
                    best = i;
                }
            }
            assert!(col[best] > 0.0);
        }
    }

    #[test]
    fn sym_eig_rejects_bad_input() {
        assert_eq!(
            sym_eig_dense(&DenseBlock::zeros(2, 3)).unwrap_err(),
            DenseLaError::NotSquare
        );
        let mut h = DenseBlock::zeros(2, 2);
        h.set(0, 0, f64::NAN);
        assert_eq!(sym_eig_dense(&h).unwrap_err(), DenseLaError::NonFinite);
    }

    #[test]
    fn gram_matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let x = DenseBlock::gaussian(50, 6, &mut rng);
        let g = gram(&x);
        for i in 0..6 {
            for j in 0..6 {
                let mut acc = 0.0;
                for r in 0..50 {
                    acc += x.at(r, i) * x.at(r, j);
                }
                assert!((g.at(i, j) - acc).abs() <= 1e-13 * acc.abs().max(1.0));
            }
        }
        assert_eq!(g.at(2, 4), g.at(4, 2));
    }

    #[test]
    fn gram_of_orthonormal_block_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (u, _) = orthonormalize(&DenseBlock::gaussian(40, 8, &mut rng));
        assert!(max_abs_diff(&gram(&u), &DenseBlock::identity(8)) < 1e-14);
    }

    #[test]
    fn cholesky_solve_simple_cases() {
        let g = DenseBlock::identity(3);
        let rhs = DenseBlock::from_fn(3, 1, |i, _| i as f64);
        let y = cholesky_solve(&g, &rhs).unwrap();
        assert_eq!(y.col(0), rhs.col(0));

        let mut d = DenseBlock::zeros(1, 1);
        d.set(0, 0, 4.0);
        let mut b = DenseBlock::zeros(1, 1);
        b.set(0, 0, 2.0);
        assert_eq!(cholesky_solve(&d, &b).unwrap().at(0, 0), 0.5);
    }

    #[test]
    fn cholesky_solve_matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let r = DenseBlock::gaussian(12, 12, &mut rng);
        let mut g = r.tr_mul(&r);
        for i in 0..12 {
            g.set(i, i, g.at(i, i) + 1.0);
        }
        let rhs = DenseBlock::gaussian(12, 3, &mut rng);
        let y = cholesky_solve(&g, &rhs).unwrap();
        let oracle = gauss_jordan_inverse(&g).mul(&rhs);
        assert!(max_abs_diff(&y, &oracle) < 1e-10);
    }

    #[test]
    fn cholesky_solve_identity_property_up_to_100() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for &m in &[5usize, 23, 100] {
            let r = DenseBlock::gaussian(m, m, &mut rng);
            let mut g = r.tr_mul(&r);
            let scale = g.max_abs();
            for i in 0..m {
                g.set(i, i, g.at(i, i) + 0.1 * scale);
            }
            let y = cholesky_solve(&g, &g).unwrap();
            assert!(max_abs_diff(&y, &DenseBlock::identity(m)) < 1e-10, "m={m}");
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let g = DenseBlock::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert_eq!(
            cholesky_solve(&g, &DenseBlock::identity(2)).unwrap_err(),
            DenseLaError::NotPositiveDefinite
        );
    }

    #[test]
    fn rcond_known_values() {
        assert_eq!(rcond_gram(&DenseBlock::identity(6)), 1.0);

        let mut g = DenseBlock::identity(2);
        g.set(1, 1, 1e-16);
        let rc = rcond_gram(&g);
        assert!(rc <= 1e-15, "rc {rc}");

        // Singular input reports zero.
        let mut s = DenseBlock::zeros(2, 2);
        s.set(0, 0, 1.0);
        assert_eq!(rcond_gram(&s), 0.0);
    }

    #[test]
    fn rcond_matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let r = DenseBlock::gaussian(20, 20, &mut rng);
        let mut g = r.tr_mul(&r);
        for i in 0..20 {
            g.set(i, i, g.at(i, i) + 0.5);
        }
        let rc = rcond_gram(&g);
        let inv = gauss_jordan_inverse(&g);
        let exact = 1.0 / (super::norm1(&g) * super::norm1(&inv));
        assert!(rc / exact < 10.0 && exact / rc < 10.0, "rc {rc} vs {exact}");
    }

    #[test]
    fn op_counters_increase() {
        let before = op_counts();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let z = DenseBlock::gaussian(10, 2, &mut rng);
        let _ = orthonormalize(&z);
        let _ = rcond_gram(&gram(&z));
        let after = op_counts();
        assert!(after.orthonormalize > before.orthonormalize);
        assert!(after.rcond > before.rcond);
    }
}
