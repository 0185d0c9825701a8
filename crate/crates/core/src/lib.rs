//! Attention-gated multi-view classification with cross-view latent
//! completion and an entropy-regularized contrastive consistency objective.
//!
//! The crate is `no_std` (with `alloc`) and contains the whole numerical
//! pipeline: a small dense tensor type with a reverse-mode recorder
//! ([`numerics`]), the multi-view network and its four loss terms
//! ([`model`]), dataset handling and simulation ([`data`]), the training
//! loop and grid search ([`train`]), and metrics plus experiment runners
//! ([`eval`]). File formats, checkpoints and the command line live in the
//! companion `clclsa` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
