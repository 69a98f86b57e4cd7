//! Randomized verification sweeps over the acceleration bounds, plus the
//! filter comparison run. The `verify` subcommand and the acceptance tests
//! share this code so they exercise identical instances.

use arrabit_core::analysis::{self, BoundOutcome};
use arrabit_core::{
    dense_oracle, solve, verify_power_bound, verify_thm_bound, AnalysisError, DenseBlock,
    FilterKind, PolyFilter, SolveError, SolveStatus, SolverConfig, SparseSymMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Shape of a randomized theory sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheorySweep {
    /// Instances per bound family, seeded 0..seeds.
    pub seeds: u64,
    /// Largest matrix dimension drawn; instances use n in [12, max_n].
    pub max_n: usize,
}

impl Default for TheorySweep {
    fn default() -> Self {
        TheorySweep { seeds: 30, max_n: 60 }
    }
}

/// Outcome counts of one bound family over a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTally {
    pub instances: usize,
    pub held: usize,
    pub violated: usize,
    /// Instances where a premise failed (rank assumption, filter ordering,
    /// degenerate ratio); these are inapplicable, not failures.
    pub skipped: usize,
    /// Instance tags of genuine violations.
    pub violations: Vec<String>,
    /// Instance tags and reasons of skipped checks.
    pub skips: Vec<String>,
}

impl SweepTally {
    fn new() -> Self {
        SweepTally {
            instances: 0,
            held: 0,
            violated: 0,
            skipped: 0,
            violations: Vec::new(),
            skips: Vec::new(),
        }
    }

    fn absorb(&mut self, report: &analysis::BoundReport) {
        self.instances += 1;
        match report.outcome {
            BoundOutcome::Holds => self.held += 1,
            BoundOutcome::Violated => {
                self.violated += 1;
                self.violations.push(format!(
                    "{} lhs={:e} rhs={:e}",
                    report.instance, report.lhs, report.rhs
                ));
            }
            BoundOutcome::Skipped => {
                self.skipped += 1;
                let reason = report.skip_reason.as_deref().unwrap_or("unknown");
                self.skips.push(format!("{} ({reason})", report.instance));
            }
        }
    }
}

/// Tallies for both bound families.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheorySweepReport {
    /// Projection accuracy bound on random blocks.
    pub projection: SweepTally,
    /// Filtered power-iterate bounds (accuracy and ratio pooled).
    pub power: SweepTally,
}

impl TheorySweepReport {
    pub fn violations(&self) -> usize {
        self.projection.violated + self.power.violated
    }
}

/// One random instance: a rotated distinct geometric spectrum, a Gaussian
/// block, and admissible augmentation parameters drawn from the seed.
fn draw_instance(
    seed: u64,
    max_n: usize,
) -> Result<(analysis::SpectrumOracle, DenseBlock, usize, usize, ChaCha8Rng), AnalysisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(12..=max_n.max(12));
    let k = rng.gen_range(2..=3usize);
    let p = (seed % 3) as usize;
    let ratio = rng.gen_range(0.75..0.92);
    let values = analysis::geometric_spectrum(n, 3.0, ratio);
    let a = analysis::rotated_from_spectrum(&values, &mut rng)?;
    let oracle = dense_oracle(&a)?;
    let x = DenseBlock::gaussian(n, k, &mut rng);
    let m = rng.gen_range(k..=(k + p * k).min(n - 1));
    Ok((oracle, x, p, m, rng))
}

/// Runs both bound families over `sweep.seeds` random instances each.
pub fn run_theory_sweep(sweep: &TheorySweep) -> Result<TheorySweepReport, AnalysisError> {
    if sweep.max_n > analysis::MAX_ORACLE_DIM {
        return Err(AnalysisError::DimensionTooLarge { n: sweep.max_n });
    }
    let mut projection = SweepTally::new();
    let mut power = SweepTally::new();
    // The identity filter: degree-1 classic recursion on [-1, 1].
    let identity = PolyFilter::build_classic_chebyshev(1)
        .expect("degree 1 is always buildable")
        .with_interval(-1.0, 1.0)
        .expect("a finite nondegenerate interval");

    for seed in 0..sweep.seeds {
        let (oracle, x, p, m, mut rng) = draw_instance(seed, sweep.max_n)?;
        projection.absorb(&verify_thm_bound(&oracle, &x, p, m));

        let q_steps = rng.gen_range(1..=3usize);
        let report = verify_power_bound(&oracle, &x, &identity, q_steps, p, m);
        power.absorb(&report.accuracy);
        power.absorb(&report.ratio);
    }
    Ok(TheorySweepReport { projection, power })
}

/// Totals of one solve in the filter comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterRunSummary {
    pub filter: FilterKind,
    pub status: SolveStatus,
    pub outer_iterations: usize,
    pub spmv: u64,
    pub maxres: f64,
}

/// Side-by-side totals of the two filter kinds on the flat-decay instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterComparison {
    pub instance: String,
    pub tol: f64,
    pub interpolant: FilterRunSummary,
    pub classic: FilterRunSummary,
}

/// Diagonal matrix with the slow linear decay `1 - 0.0005 i`, `i = 1..=n`.
/// Crowded leading eigenvalues make acceleration visible in iteration counts.
pub fn flat_decay_matrix(n: usize) -> SparseSymMatrix {
    let triplets: Vec<(usize, usize, f64)> = (0..n)
        .map(|i| (i, i, 1.0 - 0.0005 * ((i + 1) as f64)))
        .collect();
    SparseSymMatrix::from_triplets(n, &triplets).expect("diagonal triplets are always valid")
}

fn run_one_filter(
    matrix: &SparseSymMatrix,
    filter: FilterKind,
    seed: u64,
    tol: f64,
    k: usize,
) -> Result<FilterRunSummary, SolveError> {
    let mut cfg = SolverConfig::new(k);
    cfg.tol = tol;
    cfg.filter = filter;
    cfg.seed = seed;
    cfg.maxit = 60;
    matrix.reset_spmv_count();
    let out = solve(matrix, &cfg)?;
    Ok(FilterRunSummary {
        filter,
        status: out.status,
        outer_iterations: out.stats.outer_iterations,
        spmv: out.stats.total_spmv,
        maxres: out.stats.final_maxres,
    })
}

/// Solves the flat-decay instance (n = 400, k = 20, tol = 1e-12) once per
/// filter kind and reports the iteration and multiply totals side by side.
pub fn compare_filters(seed: u64) -> Result<FilterComparison, SolveError> {
    let n = 400;
    let k = 20;
    let tol = 1e-12;
    let matrix = flat_decay_matrix(n);
    let interpolant = run_one_filter(&matrix, FilterKind::Interpolant, seed, tol, k)?;
    let classic = run_one_filter(&matrix, FilterKind::ClassicChebyshev, seed, tol, k)?;
    Ok(FilterComparison {
        instance: format!("flat-decay diagonal n={n} k={k}"),
        tol,
        interpolant,
        classic,
    })
}

/// Everything the `verify` subcommand reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub sweep: TheorySweep,
    pub bounds: TheorySweepReport,
    pub filter_comparison: FilterComparison,
}

impl VerifyReport {
    /// Genuine bound violations; skipped premises do not count.
    pub fn failures(&self) -> usize {
        self.bounds.violations()
    }
}

/// Runs the full verification: bound sweeps plus the filter comparison.
pub fn run_verify(sweep: TheorySweep, seed: u64) -> Result<VerifyReport, VerifyError> {
    let bounds = run_theory_sweep(&sweep)?;
    let filter_comparison = compare_filters(seed)?;
    Ok(VerifyReport {
        schema_version: crate::report::SCHEMA_VERSION,
        sweep,
        bounds,
        filter_comparison,
    })
}

/// Failure modes of a verification run.
#[derive(Debug)]
pub enum VerifyError {
    Analysis(AnalysisError),
    Solve(SolveError),
}

impl core::fmt::Display for VerifyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            VerifyError::Analysis(e) => write!(f, "{e}"),
            VerifyError::Solve(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for VerifyError {}

impl From<AnalysisError> for VerifyError {
    fn from(e: AnalysisError) -> Self {
        VerifyError::Analysis(e)
    }
}

impl From<SolveError> for VerifyError {
    fn from(e: SolveError) -> Self {
        VerifyError::Solve(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_has_no_violations() {
        let sweep = TheorySweep { seeds: 8, max_n: 30 };
        let report = run_theory_sweep(&sweep).unwrap();
        assert_eq!(report.projection.instances, 8);
        assert_eq!(report.power.instances, 16, "accuracy and ratio each count");
        assert_eq!(report.violations(), 0, "violations: {:?}", report.projection.violations);
        // Distinct spectra and Gaussian blocks: premises hold almost surely.
        assert!(report.projection.skipped <= 1);
    }

    #[test]
    fn oversized_sweeps_are_rejected() {
        let sweep = TheorySweep { seeds: 1, max_n: 2000 };
        match run_theory_sweep(&sweep) {
            Err(AnalysisError::DimensionTooLarge { n }) => assert_eq!(n, 2000),
            other => panic!("expected dimension guard, got {other:?}"),
        }
    }

    #[test]
    fn flat_decay_matrix_has_the_documented_spectrum() {
        let m = flat_decay_matrix(10);
        assert_eq!(m.n(), 10);
        assert_eq!(m.nnz(), 10);
        let oracle = dense_oracle(&m).unwrap();
        assert!((oracle.values[0] - 0.9995).abs() < 1e-15);
        assert!((oracle.values[9] - 0.995).abs() < 1e-15);
    }
}
