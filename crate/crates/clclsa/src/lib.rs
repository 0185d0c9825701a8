//! File formats, checkpoints, result tables and run plumbing around
//! `clclsa-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod parallel;
pub mod report;

pub use error::{Error, Result};
