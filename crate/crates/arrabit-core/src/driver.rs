//! Orchestration of the full solve: interval estimation, the outer loop of
//! inner sweeps plus augmented projection, tolerance continuation, deflation,
//! adaptive augmentation depth and filter degree, and the mapping that turns
//! a smallest-pairs request into a largest-pairs run on the reflected
//! operator.
//!
//! The loop structure per outer iteration: up to `maxit1` blocks of `maxit2`
//! inner sweeps, each block followed by a conditioning probe; one augmented
//! projection; merge with the locked pairs; stop checks; tolerance
//! continuation; re-deflation; adaptation of `p` and `d`.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::block::DenseBlock;
use crate::dense::{orthonormalize, sym_eig_dense};
use crate::filter::{FilterError, FilterKind, PolyFilter};
use crate::inner::{gn_sweep, inner_stop_check, mpm_sweep, InnerStatus, StopReason, SweepOutcome};
use crate::projection::{
    arr, deflate, deflation_threshold, max_residual, project_out, residuals, Deflation, RitzSet,
};
use crate::scalar;
use crate::sparse::{Reflected, SymOperator};

/// Which end of the spectrum is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TargetEnd {
    Largest,
    Smallest,
}

/// Which update runs between projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum InnerKind {
    /// Filtered block power iteration with per-column normalization.
    Mpm,
    /// Normalization-free Gauss-Newton update.
    Gn,
}

/// Full parameter set of a solve. Construct with [`SolverConfig::new`] for
/// the defaults, then adjust fields directly.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverConfig {
    /// Number of eigenpairs requested.
    pub k: usize,
    pub which: TargetEnd,
    /// Relative residual tolerance for the k returned pairs.
    pub tol: f64,
    /// Guard vectors carried beyond k; the block iterates k+q columns.
    pub q: usize,
    /// Initial augmentation depth of the projection basis [X, AX, ..].
    pub p: usize,
    pub p_max: usize,
    /// Initial polynomial filter degree.
    pub d: usize,
    pub d_max: usize,
    /// Outer iteration cap.
    pub maxit: usize,
    /// Conditioning probes per outer iteration (each probe follows a block
    /// of `maxit2` sweeps).
    pub maxit1: usize,
    /// Inner sweeps per block.
    pub maxit2: usize,
    pub inner: InnerKind,
    pub filter: FilterKind,
    pub seed: u64,
}

impl SolverConfig {
    /// Defaults: largest end, tol 1e-6, q = round(k/10), p = 1 (max 3),
    /// degree 3 (max 15), 30 outer iterations, 10 probes of 5 sweeps,
    /// multiplication sweeps with the interpolant filter.
    pub fn new(k: usize) -> Self {
        Self {
            k,
            which: TargetEnd::Largest,
            tol: 1e-6,
            q: ((k as f64) * 0.1 + 0.5) as usize,
            p: 1,
            p_max: 3,
            d: 3,
            d_max: 15,
            maxit: 30,
            maxit1: 10,
            maxit2: 5,
            inner: InnerKind::Mpm,
            filter: FilterKind::Interpolant,
            seed: 0,
        }
    }

    /// Checks the configuration against the operator dimension.
    pub fn validate(&self, n: usize) -> Result<(), SolveError> {
        let fail = |reason| Err(SolveError::Config { reason });
        if self.k == 0 {
            return fail("k must be at least 1");
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return fail("tol must lie strictly between 0 and 1");
        }
        if (self.p_max + 1) * (self.k + self.q) >= n {
            return fail("(p_max+1)*(k+q) must be smaller than the matrix dimension");
        }
        if self.p > self.p_max {
            return fail("p must not exceed p_max");
        }
        if self.d == 0 || self.d > self.d_max {
            return fail("d must lie in 1..=d_max");
        }
        if self.d_max > crate::filter::MAX_DEGREE {
            return fail("d_max exceeds the filter degree cap");
        }
        if self.maxit == 0 || self.maxit1 == 0 || self.maxit2 == 0 {
            return fail("iteration counts must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    Config { reason: &'static str },
    Filter(FilterError),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Config { reason } => write!(f, "invalid configuration: {reason}"),
            SolveError::Filter(e) => write!(f, "filter construction failed: {e}"),
        }
    }
}

impl core::error::Error for SolveError {}

impl From<FilterError> for SolveError {
    fn from(e: FilterError) -> Self {
        SolveError::Filter(e)
    }
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolveStatus {
    /// maxres over the k pairs fell to tol.
    Converged,
    /// Almost there: maxres < (1 + 9h/k)·tol with h pairs below 0.1·tol.
    NearMiss,
    /// maxres failed to improve over three consecutive outer iterations.
    Stagnated,
    /// Outer iteration cap reached.
    MaxIterations,
}

impl SolveStatus {
    /// Converged and near-miss runs both deliver usable pairs.
    pub fn is_success(self) -> bool {
        matches!(self, SolveStatus::Converged | SolveStatus::NearMiss)
    }
}

/// One line of the convergence history, recorded after each outer iteration.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub outer: usize,
    /// Largest relative residual over the k leading pairs.
    pub maxres: f64,
    /// Cumulative sparse multiply count (columns) since the solve started.
    pub spmv: u64,
    /// Projections performed so far; equals `outer`.
    pub rr_calls: usize,
    /// Augmentation depth used this iteration.
    pub p: usize,
    /// Filter degree used this iteration.
    pub d: usize,
    /// Locked pairs after this iteration's deflation.
    pub locked: usize,
    /// Wall-clock seconds since the solve started, as reported by the
    /// observer (zero under the default observer).
    pub seconds: f64,
}

/// Totals of a finished solve.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveStats {
    pub outer_iterations: usize,
    pub total_spmv: u64,
    pub rr_calls: usize,
    /// Locked pairs among the returned k.
    pub locked: usize,
    /// Largest relative residual of the returned pairs, in original units.
    pub final_maxres: f64,
    /// Continuation stages passed through (1 = no tightening ever fired).
    pub continuation_stages: usize,
    /// Times the block had to be topped up with fresh random columns.
    pub rank_topups: usize,
}

/// Result of a solve: the k requested pairs plus diagnostics.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub pairs: RitzSet,
    pub status: SolveStatus,
    pub history: Vec<IterationRecord>,
    pub stats: SolveStats,
}

/// Progress hook. `now_seconds` feeds the history's wall-clock column; the
/// default clock is frozen at zero, which keeps the core free of any OS
/// dependency.
pub trait SolveObserver {
    fn now_seconds(&self) -> f64 {
        0.0
    }
    fn on_outer_iteration(&mut self, _record: &IterationRecord) {}
}

/// Observer with a frozen clock and no callbacks.
pub struct NullObserver;

impl SolveObserver for NullObserver {}

/// Next continuation tolerance: two orders tighter, clamped at the target.
pub fn continuation_tol(tol_t: f64, tol: f64) -> f64 {
    (1e-2 * tol_t).max(tol)
}

/// Relaxed exit bound: with h of the k pairs already below 0.1·tol, a
/// maximum residual under (1 + 9h/k)·tol counts as a near miss.
pub fn near_miss_bound(tol: f64, k: usize, h: usize) -> f64 {
    (1.0 + 9.0 * h as f64 / k as f64) * tol
}

/// Augmentation-depth rule on working-scale (shifted, nonnegative) Ritz
/// values: deepen when the wanted values decay too slowly (ratio above 0.95)
/// while residuals also stall (ratio above 0.1).
pub fn adapt_p_rule(
    p: usize,
    p_max: usize,
    mu_k_shifted: f64,
    mu_kq_shifted: f64,
    maxres: f64,
    maxresp: f64,
) -> usize {
    if mu_k_shifted > 0.0 && mu_kq_shifted / mu_k_shifted > 0.95 && maxres / maxresp > 0.1 {
        (p + 1).min(p_max)
    } else {
        p
    }
}

/// Degree rule: smallest d ≥ 3 whose filter damps the (k+q)-th best Ritz
/// value below 0.9 of the k-th, else d_max. Evaluation points are the best
/// Ritz values seen so far, clamped into the filter interval from the left.
pub fn adapt_degree_rule(
    kind: FilterKind,
    a: f64,
    b: f64,
    mu_star_k: f64,
    mu_star_kq: f64,
    d_max: usize,
) -> usize {
    let xk = (mu_star_k - a).max(0.0);
    let xkq = (mu_star_kq - a).max(0.0);
    for d in 3..=d_max {
        let Ok(f) = build_filter(kind, d, b - a) else {
            continue;
        };
        let rk = scalar::abs(f.eval_scalar(xk));
        let rkq = scalar::abs(f.eval_scalar(xkq));
        if rk == 0.0 {
            continue;
        }
        if rkq / rk < 0.9 {
            return d;
        }
    }
    d_max
}

fn build_filter(kind: FilterKind, d: usize, span: f64) -> Result<PolyFilter, FilterError> {
    let raw = match kind {
        FilterKind::Interpolant => PolyFilter::build_interpolant(d),
        FilterKind::ClassicChebyshev => PolyFilter::build_classic_chebyshev(d),
    }?;
    raw.with_interval(0.0, span)
}

/// Like [`build_filter`] but walks the degree down when the requested one is
/// not representable (the interpolant refuses degrees whose monomial form
/// misses its nodes).
fn build_filter_with_fallback(
    kind: FilterKind,
    d: usize,
    span: f64,
) -> Result<(PolyFilter, usize), SolveError> {
    let mut degree = d;
    loop {
        match build_filter(kind, degree, span) {
            Ok(f) => {
                if degree != d {
                    log::warn!("filter degree {d} not representable; using {degree}");
                }
                return Ok((f, degree));
            }
            Err(FilterError::InterpolationCheckFailed { .. }) if degree > 1 => degree -= 1,
            Err(e) => return Err(e.into()),
        }
    }
}

/// Estimates the filter interval: `a` at or just below the smallest
/// eigenvalue (power iteration on the reflected operator, with the Gershgorin
/// lower bound as fallback), `b` as the smallest eigenvalue of the projection
/// of the operator onto `x0` — an underestimate of the (k+q)-th eigenvalue.
pub fn estimate_interval<O: SymOperator, R: Rng + ?Sized>(
    op: &O,
    x0: &DenseBlock,
    rng: &mut R,
) -> (f64, f64) {
    let (g_lo, g_hi) = op.gershgorin_bounds();

    let reflected = Reflected::new(op, g_hi);
    let mut a = match power_dominant(&reflected, rng, |rq| g_hi - rq) {
        Some((rq, resid)) => g_hi - rq - resid,
        None => {
            log::warn!("extreme-eigenvalue estimator did not settle; using Gershgorin bound");
            g_lo
        }
    };

    let ax = op.apply_block(x0);
    let h = x0.tr_mul(&ax);
    let eig = sym_eig_dense(&h).expect("projected matrix is symmetric and finite");
    let b = *eig.values.last().expect("projection basis is nonempty");

    if !(a < b) {
        a = b - 1e-8 * (scalar::abs(b) + 1.0);
    }
    (a, b)
}

/// Basis size for the Krylov refinement stage of [`power_dominant`].
const REFINE_DIM: usize = 8;

/// Estimate of the largest eigenvalue of `op`: power iteration until the
/// Rayleigh quotient settles to 1e-3 relative change (at most 300 steps),
/// then a small Krylov projection from the final iterate to tighten the
/// estimate. The operators passed here are shifted or reflected forms of the
/// matrix of interest, so the settling test measures the change of `map(rq)`
/// — the quantity the caller is actually estimating — against its own scale.
/// Returns the refined quotient and its residual norm, or None when the
/// quotient never settles.
fn power_dominant<O, R, F>(op: &O, rng: &mut R, map: F) -> Option<(f64, f64)>
where
    O: SymOperator,
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let n = op.dim();
    let mut v = DenseBlock::gaussian(n, 1, rng);
    let norm = v.col_norm(0);
    for x in v.col_mut(0) {
        *x /= norm;
    }
    let mut rq = f64::INFINITY;
    let mut settled = false;
    for _ in 0..300 {
        let w = op.apply_block(&v);
        let rq_prev = rq;
        rq = 0.0;
        for (vi, wi) in v.col(0).iter().zip(w.col(0).iter()) {
            rq += vi * wi;
        }
        if (map(rq) - map(rq_prev)).abs() <= 1e-3 * map(rq).abs().max(1.0) {
            settled = true;
            break;
        }
        let wnorm = w.col_norm(0);
        if wnorm == 0.0 {
            // The iterate landed in the null space; the quotient is exact.
            return Some((0.0, 0.0));
        }
        v = w;
        for x in v.col_mut(0) {
            *x /= wnorm;
        }
    }
    if !settled {
        return None;
    }

    // A lone power iterate converges slowly when the top of the spectrum is
    // crowded, and the settling test then trips well before the quotient is
    // accurate. Projecting onto a few Krylov directions grown from the final
    // iterate recovers most of the missing accuracy for a handful of extra
    // operator applications.
    let mut basis = v.clone();
    let mut u = v;
    for _ in 1..REFINE_DIM {
        u = op.apply_block(&u);
        let norm = u.col_norm(0);
        if norm == 0.0 {
            break;
        }
        for x in u.col_mut(0) {
            *x /= norm;
        }
        basis = basis.hcat(&u);
    }
    let (q, rank) = orthonormalize(&basis);
    if rank == 0 {
        return Some((rq, 0.0));
    }
    let bq = op.apply_block(&q);
    let h = q.tr_mul(&bq);
    let eig = sym_eig_dense(&h).expect("projected matrix is symmetric and finite");
    let theta = *eig.values.first().expect("projection basis is nonempty");
    // Residual of the refined pair, reusing the products already computed:
    // ||B q y - theta q y|| with y the leading projected eigenvector.
    let y = eig.vectors.leading_cols(1);
    let z = q.mul(&y);
    let mut bz = bq.mul(&y);
    bz.add_scaled(-theta, &z);
    Some((theta, bz.col_norm(0)))
}

/// Estimate of the algebraically largest eigenvalue, biased upward by the
/// estimator residual; Gershgorin upper bound on failure.
fn estimate_largest<O: SymOperator, R: Rng + ?Sized>(op: &O, rng: &mut R) -> f64 {
    let (g_lo, g_hi) = op.gershgorin_bounds();
    // Shift by the lower bound so the largest eigenvalue dominates in
    // magnitude regardless of sign.
    let shifted = ShiftedUp { inner: op, shift: g_lo };
    match power_dominant(&shifted, rng, |rq| g_lo + rq) {
        Some((rq, resid)) => g_lo + rq + resid,
        None => {
            log::warn!("largest-eigenvalue estimator did not settle; using Gershgorin bound");
            g_hi
        }
    }
}

/// `A - shift I` as an operator; only `apply_block` is exercised.
struct ShiftedUp<'a, O: SymOperator> {
    inner: &'a O,
    shift: f64,
}

impl<O: SymOperator> SymOperator for ShiftedUp<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply_block(&self, x: &DenseBlock) -> DenseBlock {
        self.inner.apply_shifted_block(self.shift, x)
    }
    fn apply_shifted_block(&self, shift: f64, x: &DenseBlock) -> DenseBlock {
        self.inner.apply_shifted_block(self.shift + shift, x)
    }
    fn gershgorin_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.gershgorin_bounds();
        (lo - self.shift, hi - self.shift)
    }
    fn spmv_count(&self) -> u64 {
        self.inner.spmv_count()
    }
}

/// Computes the k extreme pairs requested by `cfg`. Equivalent to
/// [`solve_with_observer`] with the null observer.
pub fn solve<O: SymOperator>(op: &O, cfg: &SolverConfig) -> Result<SolveOutput, SolveError> {
    solve_with_observer(op, cfg, &mut NullObserver)
}

/// Computes the k extreme pairs requested by `cfg`, reporting each outer
/// iteration to `obs`.
pub fn solve_with_observer<O: SymOperator, Obs: SolveObserver>(
    op: &O,
    cfg: &SolverConfig,
    obs: &mut Obs,
) -> Result<SolveOutput, SolveError> {
    cfg.validate(op.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.which {
        TargetEnd::Largest => run_core(op, cfg, obs, &mut rng, None),
        TargetEnd::Smallest => {
            let lambda_top = estimate_largest(op, &mut rng);
            let beta = lambda_top + 0.01 * (scalar::abs(lambda_top) + 1.0);
            let reflected = Reflected::new(op, beta);
            let mut out = run_core(&reflected, cfg, obs, &mut rng, Some(beta))?;

            // Map values back to original units (ascending from the bottom
            // of the spectrum) and recompute residuals against the original
            // operator; the locked flags must certify the recomputed values.
            for v in out.pairs.values.iter_mut() {
                *v = beta - *v;
            }
            out.pairs.residuals = residuals(op, &out.pairs.values, &out.pairs.vectors);
            out.stats.final_maxres =
                out.pairs.residuals.iter().fold(0.0, |m: f64, &r| m.max(r));
            out.stats.locked = certify_locked(&mut out.pairs, cfg.tol);
            Ok(out)
        }
    }
}

/// The main loop: largest pairs of `op`. When `op` is the reflection
/// `beta I - A` of the caller's operator, `reflect` carries `beta` so that
/// every residual-based decision runs on residuals rescaled to the original
/// operator's units — the ones the caller's tolerance refers to.
fn run_core<O: SymOperator, Obs: SolveObserver>(
    op: &O,
    cfg: &SolverConfig,
    obs: &mut Obs,
    rng: &mut ChaCha8Rng,
    reflect: Option<f64>,
) -> Result<SolveOutput, SolveError> {
    let n = op.dim();
    let width = cfg.k + cfg.q;
    let spmv_start = op.spmv_count();
    let time_start = obs.now_seconds();

    let mut topups = 0usize;
    let raw = DenseBlock::gaussian(n, width, rng);
    let (x0, rank) = orthonormalize(&raw);
    let mut x = if rank < width {
        topups += 1;
        top_up(x0, width, &Deflation::empty(n), rng)
    } else {
        x0
    };

    let (a, mut b) = estimate_interval(op, &x, rng);

    let mut tol_t = if cfg.tol <= 1e-6 { 1e-4_f64.max(cfg.tol) } else { cfg.tol };
    let mut stage = 1usize;
    let mut p = cfg.p;
    let mut d = cfg.d;
    let mut defl = Deflation::empty(n);
    let mut history: Vec<IterationRecord> = Vec::with_capacity(cfg.maxit);
    let mut maxresp = f64::INFINITY;
    let mut best_maxres = f64::INFINITY;
    let mut best_pairs: Option<RitzSet> = None;
    let mut best_mu_k = 0.0;
    let mut best_mu_kq = 0.0;
    let mut no_improve = 0usize;
    let mut status = SolveStatus::MaxIterations;
    let mut last_merged = RitzSet::empty();

    for outer in 1..=cfg.maxit {
        let (filter, d_eff) = build_filter_with_fallback(cfg.filter, d, b - a)?;
        d = d_eff;

        // Inner phase: blocks of sweeps with conditioning probes between.
        let mut inner = InnerStatus::new();
        for _probe in 0..cfg.maxit1 {
            match cfg.inner {
                InnerKind::Mpm => {
                    mpm_sweep(op, a, &mut x, &filter, &defl, cfg.maxit2, rng);
                    inner.sweeps_done += cfg.maxit2;
                }
                InnerKind::Gn => match gn_sweep(op, a, &mut x, &filter, &defl, cfg.maxit2) {
                    SweepOutcome::Completed { sweeps } => inner.sweeps_done += sweeps,
                    SweepOutcome::RankLoss { sweeps } => {
                        inner.sweeps_done += sweeps;
                        inner.stop = StopReason::RankLoss;
                        break;
                    }
                },
            }
            inner_stop_check(&x, &mut inner, tol_t);
            if inner.stop != StopReason::None {
                break;
            }
        }

        // Projection phase: augmented Rayleigh-Ritz for the active pairs,
        // then merge with the locked ones.
        let keep = width - defl.count();
        let fresh = arr(op, &x, p, &defl, keep)
            .expect("config validation bounds the augmented width");
        let mut merged = merge_with_locked(op, &defl, &fresh);
        if let Some(beta) = reflect {
            reflected_residuals_to_original(&mut merged, beta);
        }
        let have = merged.len();
        let k_eff = cfg.k.min(have);
        let maxres = max_residual(&merged, k_eff);

        // Track the best iteration; its Ritz values steer the degree rule.
        if maxres < best_maxres {
            best_maxres = maxres;
            best_pairs = Some(merged.leading(k_eff));
            best_mu_k = merged.values[k_eff.saturating_sub(1)];
            best_mu_kq = merged.values[have - 1];
        }
        // The stagnation streak compares each iteration with its
        // predecessor, not with the best seen: the inner updates are not
        // monotone, and a run drifting downward through small oscillations
        // is progressing, not stuck.
        if maxres < maxresp {
            no_improve = 0;
        } else {
            no_improve += 1;
        }

        // Exit rules: the plain tolerance test, the relaxed near-miss bound,
        // and stagnation over three consecutive outer iterations.
        let mut exit = false;
        if maxres <= cfg.tol {
            status = SolveStatus::Converged;
            exit = true;
        } else {
            let h = merged.residuals[..k_eff].iter().filter(|&&r| r < 0.1 * cfg.tol).count();
            if maxres < near_miss_bound(cfg.tol, cfg.k, h) {
                status = SolveStatus::NearMiss;
                exit = true;
            } else if no_improve >= 3 {
                status = SolveStatus::Stagnated;
                exit = true;
            }
        }

        // Continuation: once the working tolerance is met, tighten it and
        // refresh the right end of the filter interval from the current
        // guard-pair value.
        if !exit && maxres <= tol_t && tol_t > cfg.tol {
            tol_t = continuation_tol(tol_t, cfg.tol);
            stage += 1;
            let b_new = merged.values[have - 1];
            if b_new > a {
                b = b_new;
            }
        }

        // Deflation: re-partition the merged pairs under the current
        // tolerance. Pairs locked earlier stay locked as long as their
        // freshly computed residuals still pass the (possibly tightened)
        // test.
        let (locked_set, active) = deflate(&merged, tol_t);
        defl = Deflation::from_ritz(&locked_set);

        let record = IterationRecord {
            outer,
            maxres,
            spmv: op.spmv_count() - spmv_start,
            rr_calls: outer,
            p,
            d,
            locked: defl.count(),
            seconds: obs.now_seconds() - time_start,
        };
        obs.on_outer_iteration(&record);
        history.push(record);
        last_merged = merged;

        if exit {
            break;
        }

        // Next block: the active pairs, topped up to full width if the
        // projection lost rank.
        let target = width - defl.count();
        x = if active.vectors.cols() < target {
            topups += 1;
            top_up(active.vectors, target, &defl, rng)
        } else {
            active.vectors
        };

        // Adapt the augmentation depth on working-scale values, then the
        // filter degree from the best iteration's values.
        let mu_k_shifted = last_merged.values[k_eff.saturating_sub(1)] - a;
        let mu_kq_shifted = last_merged.values[have - 1] - a;
        p = adapt_p_rule(p, cfg.p_max, mu_k_shifted, mu_kq_shifted, maxres, maxresp);
        d = adapt_degree_rule(cfg.filter, a, b, best_mu_k, best_mu_kq, cfg.d_max);
        maxresp = maxres;
    }

    // Non-converged exits hand back the best pairs seen, not the last.
    let mut pairs = match status {
        SolveStatus::Converged | SolveStatus::NearMiss => {
            last_merged.leading(cfg.k.min(last_merged.len()))
        }
        SolveStatus::Stagnated | SolveStatus::MaxIterations => {
            best_pairs.unwrap_or_else(|| last_merged.leading(cfg.k.min(last_merged.len())))
        }
    };
    let locked_count = certify_locked(&mut pairs, cfg.tol);

    let final_maxres = pairs.residuals.iter().fold(0.0, |m: f64, &r| m.max(r));
    let stats = SolveStats {
        outer_iterations: history.len(),
        total_spmv: op.spmv_count() - spmv_start,
        rr_calls: history.len(),
        locked: locked_count,
        final_maxres,
        continuation_stages: stage,
        rank_topups: topups,
    };
    Ok(SolveOutput { pairs, status, history, stats })
}

/// Residuals measured against the reflected operator `beta I - A` carry the
/// denominator `max(1, |beta - lambda|)`; the caller's tolerance refers to
/// the original operator's `max(1, |lambda|)`. The residual two-norm itself
/// is identical for both operators, so the conversion is an exact rescale.
fn reflected_residuals_to_original(set: &mut RitzSet, beta: f64) {
    for (r, &nu) in set.residuals.iter_mut().zip(set.values.iter()) {
        let lambda = beta - nu;
        *r *= scalar::abs(nu).max(1.0) / scalar::abs(lambda).max(1.0);
    }
}

/// Rewrites the locked flags so they certify the deflation test at the
/// target tolerance. During the run, pairs lock under the current
/// continuation stage's looser threshold; a run that converges before the
/// ladder tightens would otherwise hand those stage-local flags back.
fn certify_locked(pairs: &mut RitzSet, tol: f64) -> usize {
    let threshold = deflation_threshold(tol);
    let mut count = 0;
    for (flag, &res) in pairs.locked.iter_mut().zip(pairs.residuals.iter()) {
        *flag = res <= threshold;
        count += *flag as usize;
    }
    count
}

/// Merges the locked pairs with fresh projection output: all locked pairs
/// are kept (their residuals recomputed at today's iterate), then everything
/// is ordered by descending value with locked pairs winning ties.
fn merge_with_locked<O: SymOperator>(op: &O, defl: &Deflation, fresh: &RitzSet) -> RitzSet {
    if defl.is_empty() {
        return fresh.clone();
    }
    let mut locked = defl.as_ritz();
    locked.residuals = residuals(op, &locked.values, &locked.vectors);

    let combined = RitzSet {
        values: locked.values.iter().chain(fresh.values.iter()).copied().collect(),
        vectors: locked.vectors.hcat(&fresh.vectors),
        residuals: locked.residuals.iter().chain(fresh.residuals.iter()).copied().collect(),
        locked: locked.locked.iter().chain(fresh.locked.iter()).copied().collect(),
    };
    let mut order: Vec<usize> = (0..combined.len()).collect();
    order.sort_by(|&i, &j| {
        combined.values[j]
            .partial_cmp(&combined.values[i])
            .expect("Ritz values are finite")
            .then((combined.locked[j] as u8).cmp(&(combined.locked[i] as u8)))
    });
    combined.select(&order)
}

/// Appends fresh random columns to reach `target` width, keeps them clear of
/// the locked subspace and re-orthonormalizes the whole block.
fn top_up<R: Rng + ?Sized>(
    existing: DenseBlock,
    target: usize,
    defl: &Deflation,
    rng: &mut R,
) -> DenseBlock {
    let n = existing.rows();
    let mut block = existing;
    for _attempt in 0..4 {
        let missing = target - block.cols();
        let mut fresh = DenseBlock::gaussian(n, missing, rng);
        project_out(&mut fresh, defl);
        let joint = block.hcat(&fresh);
        let (u, rank) = orthonormalize(&joint);
        block = u;
        if rank >= target {
            return block;
        }
    }
    // Statistically unreachable: four batches of Gaussian columns cannot all
    // collapse. Proceed with what we have; the next projection copes.
    log::warn!("block top-up fell short: {} of {target} columns", block.cols());
    block
}
