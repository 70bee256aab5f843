//! Thread-pool executor for replicate loops.

use proximate_core::simulate::Executor;
use rayon::prelude::*;

/// Runs replicates on the global rayon pool. Results come back in index
/// order, so tables match the sequential executor exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl Executor for Parallel {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}
