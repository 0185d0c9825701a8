use clclsa_core::train::TrialExecutor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Runs trials on a dedicated pool. Trials are independent, so results do
/// not depend on the thread count.
pub struct Pool {
    pool: ThreadPool,
}

impl Pool {
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl TrialExecutor for Pool {
    fn run<T, F>(&self, n: usize, trial: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if self.threads() == 1 {
            return (0..n).map(trial).collect();
        }
        self.pool
            .install(|| (0..n).into_par_iter().map(&trial).collect())
    }
}
