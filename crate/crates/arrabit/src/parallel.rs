//! Multi-threaded wrapper around the sparse kernel.
//!
//! Block multiplies split by column: each worker computes a contiguous slice
//! of the output block with the ordinary sequential kernel. Every output
//! column is produced by exactly one thread with the same per-row summation
//! order as a single-threaded run, so results are bitwise identical for any
//! thread count. The wrapper owns a dedicated thread pool sized at
//! construction; the rest of the process stays single-threaded.

use arrabit_core::{DenseBlock, SparseSymMatrix, SymOperator};
use rayon::iter::{IndexedParallelIterator, ParallelIterator};
use rayon::slice::{ParallelSlice, ParallelSliceMut};

/// A sparse symmetric operator whose block multiplies run on a thread pool.
pub struct ParallelOperator<'a> {
    matrix: &'a SparseSymMatrix,
    pool: rayon::ThreadPool,
    threads: usize,
}

impl<'a> ParallelOperator<'a> {
    /// Wraps `matrix` with a pool of `threads` workers. `threads` must be
    /// at least 1; sequential runs should use the matrix directly.
    pub fn new(
        matrix: &'a SparseSymMatrix,
        threads: usize,
    ) -> Result<Self, rayon::ThreadPoolBuildError> {
        assert!(threads >= 1, "thread count must be at least 1");
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(ParallelOperator {
            matrix,
            pool,
            threads,
        })
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    fn apply(&self, shift: f64, x: &DenseBlock) -> DenseBlock {
        let n = self.matrix.n();
        assert_eq!(x.rows(), n, "operand rows must match the matrix dimension");
        let cols = x.cols();
        let mut y = DenseBlock::zeros(n, cols);
        if cols > 0 {
            // Contiguous column ranges; column-major layout makes each range
            // a contiguous slice of both blocks.
            let per = cols.div_ceil(self.threads).max(1) * n;
            self.pool.install(|| {
                y.data_mut()
                    .par_chunks_mut(per)
                    .zip(x.data().par_chunks(per))
                    .for_each(|(yc, xc)| self.matrix.spmv_into_uncounted(shift, xc, yc));
            });
        }
        self.matrix.add_spmv_count(cols as u64);
        y
    }
}

impl SymOperator for ParallelOperator<'_> {
    fn dim(&self) -> usize {
        self.matrix.n()
    }

    fn apply_block(&self, x: &DenseBlock) -> DenseBlock {
        self.apply(0.0, x)
    }

    fn apply_shifted_block(&self, shift: f64, x: &DenseBlock) -> DenseBlock {
        self.apply(shift, x)
    }

    fn gershgorin_bounds(&self) -> (f64, f64) {
        self.matrix.gershgorin_bounds()
    }

    fn spmv_count(&self) -> u64 {
        self.matrix.spmv_count()
    }
}
