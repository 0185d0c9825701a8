//! Dense tensors, the layer kernels used by the network, a reverse-mode
//! recorder over those kernels, Adam, and seeded random streams.

mod adam;
mod graph;
mod init;
mod kernels;
mod rng;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use graph::{backward, Gradients, Graph, NodeId, ParamId, ParamStore};
pub(crate) use graph::contrastive_pair_value as graph_contrastive_value;
pub use init::{init_bias, init_weight};
pub use kernels::{
    affine, batch_norm, dropout, matmul, relu, sigmoid, softmax_rows, BatchNormConfig, BnSaved,
    RunningStats,
};
pub use rng::RngStream;
pub use tensor::Tensor;

/// Lower clamp applied before every logarithm.
pub const LOG_EPS: f64 = 1e-12;

/// Whether stochastic layers sample (train) or pass through (eval).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

#[inline]
pub(crate) fn ln_clamped(x: f64) -> f64 {
    libm::log(if x > LOG_EPS { x } else { LOG_EPS })
}
