//! Core kernels for a block eigensolver on large sparse symmetric matrices.
//!
//! The solver computes a set of extreme eigenpairs by alternating two phases:
//! a cheap inner update of a block of vectors (multi-power or Gauss-Newton
//! sweeps, both accelerated by a polynomial filter) and a projection phase
//! that extracts Ritz pairs from the block augmented with powers of the
//! operator applied to it. Converged pairs are deflated and the remaining
//! block keeps iterating until the requested residual tolerance is met.
//!
//! This crate is `no_std` (with `alloc`); file formats, the command line
//! front end and anything else that needs an operating system live in the
//! companion crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
// `!(x > t)` differs from `x <= t` on purpose throughout the numerical code:
// the negated form also takes the guarded branch when `x` is NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index-based loops are the house style for the dense kernels; the indices
// mirror the subscripts of the expressions they implement.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod analysis;
pub mod block;
pub mod dense;
pub mod driver;
pub mod filter;
pub mod inner;
pub mod projection;
mod scalar;
pub mod sparse;

pub use analysis::{
    build_decomposition, delta_k, dense_oracle, gamma_km, largest_admissible_m, vandermonde,
    verify_power_bound, verify_thm_bound, AnalysisError, AugmentationDecomposition, BoundOutcome,
    BoundReport, PowerBoundReport, SpectrumOracle,
};
pub use block::DenseBlock;
pub use dense::{DenseLaError, SymEig};
pub use driver::{
    solve, solve_with_observer, InnerKind, IterationRecord, NullObserver, SolveError,
    SolveObserver, SolveOutput, SolveStats, SolveStatus, SolverConfig, TargetEnd,
};
pub use filter::{FilterKind, PolyFilter};
pub use inner::{InnerStatus, StopReason, SweepOutcome};
pub use projection::{Deflation, RitzSet};
pub use sparse::{BuildError, Reflected, SparseSymMatrix, SymOperator};
