//! IO, reporting and parallel operators around the core block eigensolver.
//!
//! The core crate holds the numerics; this crate adds everything that needs
//! an operating system: Matrix Market files, JSON and CSV reports, wall-clock
//! observers, a thread-pool operator, randomized verification sweeps, and the
//! `arrabit` command line binary.

pub mod matrix_market;
pub mod parallel;
pub mod report;
pub mod sweeps;

pub use matrix_market::{
    load_matrix_market, read_matrix_market, save_matrix_market, write_matrix_market,
    MatrixMarketError,
};
pub use parallel::ParallelOperator;
pub use report::{write_history_csv, RunResult, WallClockObserver, SCHEMA_VERSION};
pub use sweeps::{
    compare_filters, flat_decay_matrix, run_theory_sweep, run_verify, FilterComparison,
    FilterRunSummary, SweepTally, TheorySweep, TheorySweepReport, VerifyError, VerifyReport,
};
