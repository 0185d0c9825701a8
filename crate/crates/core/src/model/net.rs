//! Parameters of the multi-view network and their layout.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{
    init_bias, init_weight, Graph, Mode, NodeId, ParamId, ParamStore, RngStream, RunningStats,
};

use super::ModelConfig;

/// A dense layer `x W + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    fn new(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &RngStream,
    ) -> Self {
        let mut r = rng.derive(name);
        let weight = store.add(format!("{name}.weight"), init_weight(fan_in, fan_out, &mut r));
        let bias = store.add(format!("{name}.bias"), init_bias(fan_out));
        Self { weight, bias }
    }

    pub(crate) fn apply(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        g.affine(x, w, b)
    }
}

/// Batch normalization with learnable scale/shift and an index into the
/// model's running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchNormLayer {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub stats: usize,
}

impl BatchNormLayer {
    fn new(
        store: &mut ParamStore,
        stats: &mut Vec<RunningStats>,
        name: &str,
        width: usize,
    ) -> Self {
        let gamma = store.add(
            format!("{name}.gamma"),
            crate::numerics::Tensor::filled(1, width, 1.0),
        );
        let beta = store.add(format!("{name}.beta"), init_bias(width));
        stats.push(RunningStats::new(width));
        Self {
            gamma,
            beta,
            stats: stats.len() - 1,
        }
    }
}

/// Per-view attention, embedding and auxiliary classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViewLayers {
    /// Feature-level attention, `|V| -> |V|`, sigmoid-gated.
    pub feature_attention: Linear,
    /// `|V| -> D`, followed by ReLU and dropout.
    pub embed: Linear,
    /// View-level attention, `D -> 1`, sigmoid-gated.
    pub view_attention: Linear,
    /// `D -> C`, softmax.
    pub aux_classifier: Linear,
}

/// `D -> h1 -> BN -> ReLU -> h2 -> ReLU`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encoder {
    pub fc1: Linear,
    pub bn: BatchNormLayer,
    pub fc2: Linear,
}

/// `h2 -> h1 -> BN -> ReLU -> D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoder {
    pub fc1: Linear,
    pub bn: BatchNormLayer,
    pub fc2: Linear,
}

/// The full set of learnable weights plus batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub(crate) config: ModelConfig,
    pub(crate) params: ParamStore,
    pub(crate) bn_stats: Vec<RunningStats>,
    pub(crate) views: Vec<ViewLayers>,
    pub(crate) encoders: Vec<Encoder>,
    pub(crate) decoders: Vec<Decoder>,
    pub(crate) classifier: Linear,
}

impl Model {
    /// Builds and initializes a model from the `"init"` stream of `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let rng = RngStream::new(seed, "init");
        let mut params = ParamStore::new();
        let mut bn_stats = Vec::new();
        let d = config.embed_dim();
        let c = config.num_classes;
        let [h1, h2] = config.ae_hidden;
        let views = config
            .input_dims
            .iter()
            .enumerate()
            .map(|(i, &v)| ViewLayers {
                feature_attention: Linear::new(
                    &mut params,
                    &format!("view{i}.feature_attention"),
                    v,
                    v,
                    &rng,
                ),
                embed: Linear::new(&mut params, &format!("view{i}.embed"), v, d, &rng),
                view_attention: Linear::new(
                    &mut params,
                    &format!("view{i}.view_attention"),
                    d,
                    1,
                    &rng,
                ),
                aux_classifier: Linear::new(
                    &mut params,
                    &format!("view{i}.aux_classifier"),
                    d,
                    c,
                    &rng,
                ),
            })
            .collect();
        let m = config.num_views();
        let encoders = (0..m)
            .map(|k| Encoder {
                fc1: Linear::new(&mut params, &format!("enc{k}.fc1"), d, h1, &rng),
                bn: BatchNormLayer::new(&mut params, &mut bn_stats, &format!("enc{k}.bn"), h1),
                fc2: Linear::new(&mut params, &format!("enc{k}.fc2"), h1, h2, &rng),
            })
            .collect();
        let decoders = (0..m)
            .map(|i| Decoder {
                fc1: Linear::new(&mut params, &format!("dec{i}.fc1"), h2, h1, &rng),
                bn: BatchNormLayer::new(&mut params, &mut bn_stats, &format!("dec{i}.bn"), h1),
                fc2: Linear::new(&mut params, &format!("dec{i}.fc2"), h1, d, &rng),
            })
            .collect();
        let classifier = Linear::new(&mut params, "classifier", m * d, c, &rng);
        Ok(Self {
            config,
            params,
            bn_stats,
            views,
            encoders,
            decoders,
            classifier,
        })
    }

    /// Rebuilds a model from stored tensors; names and shapes must match the
    /// layout implied by `config`.
    pub fn from_parts(
        config: ModelConfig,
        params: ParamStore,
        bn_stats: Vec<RunningStats>,
    ) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        if params.len() != model.params.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} parameter tensors, found {}",
                model.params.len(),
                params.len()
            )));
        }
        for ((_, want_name, want), (_, name, got)) in model.params.iter().zip(params.iter()) {
            if want_name != name || want.shape() != got.shape() {
                return Err(Error::InvalidConfig(format!(
                    "parameter {name} {:?} does not match expected {want_name} {:?}",
                    got.shape(),
                    want.shape()
                )));
            }
        }
        if bn_stats.len() != model.bn_stats.len()
            || bn_stats
                .iter()
                .zip(&model.bn_stats)
                .any(|(a, b)| a.mean.len() != b.mean.len() || a.var.len() != b.var.len())
        {
            return Err(Error::InvalidConfig(
                "batch-norm statistics do not match the architecture".into(),
            ));
        }
        model.params = params;
        model.bn_stats = bn_stats;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn bn_stats(&self) -> &[RunningStats] {
        &self.bn_stats
    }

    pub fn view_layers(&self, view: usize) -> &ViewLayers {
        &self.views[view]
    }

    pub fn encoder(&self, view: usize) -> &Encoder {
        &self.encoders[view]
    }

    pub fn decoder(&self, view: usize) -> &Decoder {
        &self.decoders[view]
    }

    pub fn classifier(&self) -> &Linear {
        &self.classifier
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|(_, n, _)| String::from(n)).collect()
    }

    pub(crate) fn bn_apply(
        &self,
        g: &mut Graph,
        stats: &mut [RunningStats],
        layer: &BatchNormLayer,
        x: NodeId,
        mode: Mode,
    ) -> Result<NodeId> {
        let gamma = g.param(&self.params, layer.gamma);
        let beta = g.param(&self.params, layer.beta);
        // Train-mode statistics need two rows; smaller batches use the
        // running estimates instead.
        let mode = if g.value(x).rows() < 2 { Mode::Eval } else { mode };
        g.batch_norm(
            x,
            gamma,
            beta,
            &mut stats[layer.stats],
            mode,
            self.config.batch_norm,
        )
    }
}
