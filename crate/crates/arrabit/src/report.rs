//! Serializable run reports and convergence histories.
//!
//! A solve produces one [`RunResult`]: the requested pairs, the solver
//! totals, and the per-iteration history. The JSON layout is versioned
//! through `schema_version` so downstream consumers can detect changes.
//! Histories also export as CSV with a fixed column set.

use std::io::{self, Write};
use std::time::Instant;

use arrabit_core::{
    IterationRecord, SolveObserver, SolveOutput, SolveStats, SolveStatus, SolverConfig,
};
use serde::{Deserialize, Serialize};

/// Version of the JSON report layout. Bump on any field change.
pub const SCHEMA_VERSION: u32 = 1;

/// Header of the CSV history export, one column per history field.
pub const HISTORY_CSV_HEADER: &str = "outer,maxres,spmv,rr,p,d,locked,seconds";

/// Complete record of one solver run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    /// Where the matrix came from: a file path or a generator label.
    pub matrix: String,
    pub n: usize,
    pub nnz: usize,
    /// Worker threads used for block multiplies; 0 means sequential.
    pub threads: usize,
    pub config: SolverConfig,
    pub status: SolveStatus,
    /// Converged and near-converged eigenvalues, descending for the largest
    /// end of the spectrum and ascending for the smallest.
    pub eigenvalues: Vec<f64>,
    /// Relative residuals, one per eigenvalue.
    pub residuals: Vec<f64>,
    /// Largest relative residual over the returned pairs.
    pub maxres: f64,
    pub stats: SolveStats,
    pub wall_seconds: f64,
    pub history: Vec<IterationRecord>,
}

impl RunResult {
    /// Packages a finished solve. Eigenvectors stay out of the report; they
    /// are block data, not run metadata.
    pub fn new(
        matrix: impl Into<String>,
        n: usize,
        nnz: usize,
        threads: usize,
        config: &SolverConfig,
        output: &SolveOutput,
        wall_seconds: f64,
    ) -> Self {
        RunResult {
            schema_version: SCHEMA_VERSION,
            matrix: matrix.into(),
            n,
            nnz,
            threads,
            config: config.clone(),
            status: output.status,
            eigenvalues: output.pairs.values.clone(),
            residuals: output.pairs.residuals.clone(),
            maxres: output.stats.final_maxres,
            stats: output.stats.clone(),
            wall_seconds,
            history: output.history.clone(),
        }
    }

    /// Zeroes every wall-clock field so repeated runs with the same seed and
    /// thread count serialize to byte-identical JSON.
    pub fn strip_timing(&mut self) {
        self.wall_seconds = 0.0;
        for record in &mut self.history {
            record.seconds = 0.0;
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization");
        text.push('\n');
        text
    }
}

/// Writes the convergence history as CSV with the fixed column set.
pub fn write_history_csv<W: Write>(w: &mut W, history: &[IterationRecord]) -> io::Result<()> {
    writeln!(w, "{HISTORY_CSV_HEADER}")?;
    for r in history {
        writeln!(
            w,
            "{},{:e},{},{},{},{},{},{}",
            r.outer, r.maxres, r.spmv, r.rr_calls, r.p, r.d, r.locked, r.seconds
        )?;
    }
    Ok(())
}

/// Observer that stamps history records with elapsed wall-clock time.
pub struct WallClockObserver {
    start: Instant,
}

impl WallClockObserver {
    pub fn new() -> Self {
        WallClockObserver {
            start: Instant::now(),
        }
    }
}

impl Default for WallClockObserver {
    fn default() -> Self {
        Self::new()
    }
}

impl SolveObserver for WallClockObserver {
    fn now_seconds(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}
