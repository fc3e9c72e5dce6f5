//! Execution policy for data-parallel work.
//!
//! Every helper here applies a pure per-item function, so the result does not
//! depend on the policy. With the `parallel` feature disabled all policies run
//! sequentially.

use serde::{Deserialize, Serialize};

/// Below this many independent items `Auto` stays sequential.
pub const AUTO_PARALLEL_THRESHOLD: usize = 48;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    /// Parallel when the item count reaches [`AUTO_PARALLEL_THRESHOLD`] and
    /// more than one worker thread is available.
    #[default]
    Auto,
    Sequential,
    Parallel,
}

impl Execution {
    pub fn runs_parallel(self, items: usize) -> bool {
        match self {
            Execution::Sequential => false,
            Execution::Parallel => cfg!(feature = "parallel") && items > 1,
            Execution::Auto => items >= AUTO_PARALLEL_THRESHOLD && worker_threads() > 1,
        }
    }
}

/// Threads available to `Auto`; 1 without the `parallel` feature.
pub fn worker_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();
    #[cfg(not(feature = "parallel"))]
    1
}

/// Applies `f(index, item)` to every element of `items`.
pub fn for_each_mut<T, F>(exec: Execution, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.runs_parallel(items.len()) {
        use rayon::prelude::*;
        items.par_iter_mut().enumerate().for_each(|(i, item)| f(i, item));
        return;
    }
    let _ = exec;
    items.iter_mut().enumerate().for_each(|(i, item)| f(i, item));
}

/// Applies `f(chunk_index, chunk)` to consecutive chunks of length `chunk`.
pub fn for_each_chunk_mut<T, F>(exec: Execution, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk > 0, "chunk length must be positive");
    #[cfg(feature = "parallel")]
    if exec.runs_parallel(data.len() / chunk) {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Collects `f(0), f(1), …, f(n-1)` in index order.
pub fn map_range<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.runs_parallel(n) {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Maps a slice of independent jobs, preserving order.
pub fn map_slice<S, T, F>(exec: Execution, jobs: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.runs_parallel(jobs.len()) {
        use rayon::prelude::*;
        return jobs.par_iter().map(f).collect();
    }
    let _ = exec;
    jobs.iter().map(f).collect()
}
