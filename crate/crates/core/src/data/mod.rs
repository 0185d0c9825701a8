//! Datasets, simulated missingness, the synthetic generator and splitting.

mod dataset;
mod mask;
mod missing;
mod split;
mod synth;

pub use dataset::{min_max_scale, MultiOmicsDataset};
pub use mask::Mask;
pub use missing::{apply_missingness, apply_missingness_on, MissingnessPolicy, MissingnessSpec};
pub use split::{split, split_indices, SplitSpec};
pub use synth::{synth_generate, SyntheticSpec};
