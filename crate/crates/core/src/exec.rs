//! Execution strategy for the data-parallel loops (bootstrap replicates,
//! sweep repetitions, per-model metrics).
//!
//! Work items are addressed by index and results are collected in index
//! order, so both strategies produce identical output. Without the
//! `parallel` feature, [`Execution::Parallel`] runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Evaluate `f(0..n)` and collect the results in index order.
    pub fn map_indices<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Fallible variant of [`Execution::map_indices`]; the error of the lowest
    /// failing index is returned.
    pub fn try_map_indices<R, E, F>(self, n: usize, f: F) -> Result<Vec<R>, E>
    where
        R: Send,
        E: Send,
        F: Fn(usize) -> Result<R, E> + Sync + Send,
    {
        self.map_indices(n, f).into_iter().collect()
    }

    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Cap the global worker pool. Must run before any parallel work; later calls
/// are ignored. No-op without the `parallel` feature.
pub fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}
