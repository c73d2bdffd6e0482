/// How data-parallel loops are executed.
///
/// `Parallel` uses the rayon global pool (or whatever pool the caller is
/// installed in). Without the `parallel` feature it degrades to sequential
/// execution. Results are always collected in index order, so both modes
/// produce bit-identical output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Maps `f` over `0..n`, returning results in index order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
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

    /// Runs `op` with parallel work confined to a pool of `jobs` threads.
    /// `None` uses the global pool; `Sequential` ignores `jobs`.
    pub fn with_jobs<R, F>(self, jobs: Option<usize>, op: F) -> crate::Result<R>
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        match (self, jobs) {
            #[cfg(feature = "parallel")]
            (Execution::Parallel, Some(n)) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| crate::Error::Config(format!("cannot start {n} worker threads: {e}")))?;
                Ok(pool.install(op))
            }
            _ => Ok(op()),
        }
    }
}
