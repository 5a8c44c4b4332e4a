//! Worker pools. Every parallel stage collects results in input order, so
//! outputs do not depend on the number of workers.

use crate::error::{AppError, AppResult};

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs `f` on a dedicated pool of `jobs` workers (0 means one per core).
pub fn install<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> AppResult<T> {
    let jobs = if jobs == 0 { default_jobs() } else { jobs };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| AppError::Internal(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}
