//! The training loop, learning-rate schedule and weight grid search.

mod config;
mod executor;
mod grid;
mod run;

pub use config::{lr_at, BatchMode, LrSchedule, TrainConfig};
pub use executor::{Sequential, TrialExecutor};
pub use grid::{grid_search, GridResult, GridSpec, GridTrial, TrialStatus};
pub use run::{train, train_model, EpochLog, TrainAbort, TrainError, TrainOutcome};
