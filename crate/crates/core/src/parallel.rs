//! Index-parallel map used for replication fan-out.
//!
//! With the `parallel` feature (on by default) work runs on the rayon pool;
//! without it, or under [`Execution::Sequential`], it runs in order on the
//! calling thread. Results come back in index order either way, and each
//! task derives its own RNG stream, so output does not depend on scheduling.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// `(0..len).map(f)`, collected in order, stopping at the first error.
pub fn try_map_indexed<T, F>(len: usize, execution: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    match execution {
        Execution::Sequential => (0..len).map(f).collect(),
        Execution::Parallel => parallel_map(len, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(len: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(len: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..len).map(f).collect()
}

/// Whether this build can run work in parallel.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
