use alloc::vec::Vec;

/// Runs independent trials `0..n`. Implementations may run them in any
/// order or concurrently but must return results in index order.
pub trait TrialExecutor: Sync {
    fn run<T, F>(&self, n: usize, trial: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs trials one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl TrialExecutor for Sequential {
    fn run<T, F>(&self, n: usize, trial: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(trial).collect()
    }
}
