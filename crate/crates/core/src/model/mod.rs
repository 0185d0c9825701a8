//! The multi-view network: per-view feature- and view-level attention,
//! latent fusion, cross-view completion of missing views, and the
//! classification, auxiliary, cross-view reconstruction and contrastive
//! loss terms.

mod config;
mod forward;
mod loss;
mod net;

pub use config::{CompletionMode, LossToggles, LossWeights, ModelConfig, Reduction, WEIGHT_GRID};
pub use forward::{
    fuse, ForwardCache, Objective, ObjectiveConfig, Prediction, Provenance, ViewCache, ViewOutput,
};
pub use loss::{
    joint_distribution, loss_auxiliary, loss_classification, loss_contrastive,
    loss_contrastive_pair, total_loss, LossBreakdown,
};
pub use net::{BatchNormLayer, Decoder, Encoder, Linear, Model, ViewLayers};
