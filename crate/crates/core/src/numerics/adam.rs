use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Gradients, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = store
            .iter()
            .map(|(_, _, t)| Tensor::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update of every parameter in `store`.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::InvalidHyperparameter {
            name: "learning rate",
            value: lr,
        });
    }
    if grads.as_slice().len() != store.len() || state.m.len() != store.len() {
        return Err(Error::LengthMismatch {
            left: store.len(),
            right: grads.as_slice().len(),
        });
    }
    for (id, g) in store.ids().zip(grads.as_slice()) {
        let p = store.get(id);
        if p.shape() != g.shape() || state.m[id.index()].shape() != p.shape() {
            return Err(Error::Shape {
                op: "adam_step",
                lhs: p.shape(),
                rhs: g.shape(),
            });
        }
    }
    state.t += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let t = state.t as i32;
    let bc1 = 1.0 - libm::pow(beta1, t as f64);
    let bc2 = 1.0 - libm::pow(beta2, t as f64);
    for (id, g) in store.ids().zip(grads.as_slice()) {
        let k = id.index();
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        let p = store.get_mut(id);
        for (((pv, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mv = beta1 * *mv + (1.0 - beta1) * gv;
            *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
            let mhat = *mv / bc1;
            let vhat = *vv / bc2;
            *pv -= lr * mhat / (libm::sqrt(vhat) + eps);
        }
    }
    Ok(())
}
