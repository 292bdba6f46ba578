//! Execution policy for the data-parallel loops (grid sweeps, path batches,
//! bootstrap resamples).
//!
//! Every parallel map collects results in index order, so output never
//! depends on scheduling. Without the `parallel` feature everything runs
//! sequentially and [`Execution::Parallel`] silently degrades.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `0..n` through `op`, with a per-worker scratch value built by `init`.
pub fn map_indexed<T, S, I, F>(exec: Execution, n: usize, init: I, op: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec.is_parallel() {
            use rayon::prelude::*;
            return (0..n)
                .into_par_iter()
                .map_init(&init, |s, i| op(s, i))
                .collect();
        }
    }
    let _ = exec;
    let mut scratch = init();
    (0..n).map(|i| op(&mut scratch, i)).collect()
}
