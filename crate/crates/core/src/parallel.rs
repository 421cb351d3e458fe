//! Job execution shared by the solvers.
//!
//! Work is cut into a fixed list of jobs whose boundaries depend only on the
//! problem, never on the worker count. Workers pull jobs from a shared queue
//! and their partial results are handed back in job order, so merging them
//! sequentially gives the same floating point result for any number of
//! workers.

use rayon::prelude::*;

/// Runs `job(0..jobs)` on `workers` threads and returns the results in job
/// order.
pub fn run_jobs<R, F>(workers: usize, jobs: usize, job: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    if workers <= 1 || jobs <= 1 {
        return (0..jobs).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .thread_name(|i| format!("shapley-worker-{i}"))
        .build()
        .expect("thread pool builds");
    pool.install(|| (0..jobs).into_par_iter().map(job).collect())
}

/// Splits `0..total` into consecutive ranges of at most `size` items.
pub fn ranges(total: u64, size: u64) -> impl Iterator<Item = std::ops::Range<u64>> {
    let size = size.max(1);
    (0..total.div_ceil(size)).map(move |j| j * size..((j + 1) * size).min(total))
}
