//! Order-preserving parallel map over an index range.
//!
//! With the `parallel` feature and more than one worker, indices are spread
//! over a dedicated rayon pool; otherwise they run in a plain loop. Results
//! always come back in index order.

use crate::error::{Error, Result};

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if workers == 0 {
        return Err(Error::validation("workers must be >= 1"));
    }
    if workers == 1 || n <= 1 {
        return Ok((0..n).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::numeric(format!("could not start worker pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(u64) -> T,
{
    if workers == 0 {
        return Err(Error::validation("workers must be >= 1"));
    }
    Ok((0..n).map(f).collect())
}

/// Number of hardware threads, at least 1.
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
