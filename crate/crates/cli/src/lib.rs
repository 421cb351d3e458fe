//! Orchestration behind the `alloc-shapley` binary: the `solve` policy that
//! routes preprocessed components to solvers, and the thread budget.

pub mod solve;

pub use solve::{solve, Policy, Sampler};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "ALLOCSHAP_THREADS";

/// Worker count from [`THREADS_ENV`], else the available parallelism.
pub fn default_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&t: &usize| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from))
}
