//! Central finite differences against the recorded gradient of the full
//! objective on a tiny model.
#![allow(dead_code)]

use clclsa_core::data::Mask;
use clclsa_core::model::{LossWeights, Model, ModelConfig, ObjectiveConfig};
use clclsa_core::numerics::{backward, Mode, RngStream, Tensor};

pub fn tiny() -> (Model, Vec<Tensor>, Mask, Vec<usize>) {
    let mut config = ModelConfig::desk(&[6, 6, 6], 2);
    config.embed_dims = vec![4, 4, 4];
    config.ae_hidden = [5, 3];
    config.dropout = 0.0;
    let model = Model::new(config, 11).unwrap();
    let mut rng = RngStream::new(3, "inputs");
    let views = (0..3)
        .map(|_| Tensor::from_fn(5, 6, |_, _| rng.uniform()))
        .collect();
    let mask = Mask::from_rows(&[
        [true, true, true],
        [true, false, true],
        [false, true, true],
        [true, true, false],
        [true, true, true],
    ])
    .unwrap();
    (model, views, mask, vec![0, 1, 1, 0, 1])
}

// The confidence target of the auxiliary term is a constant, so the
// finite-difference side holds it at its value at the unperturbed point.
fn objective_value(
    model: &mut Model,
    views: &[Tensor],
    mask: &Mask,
    labels: &[usize],
    cfg: &ObjectiveConfig,
    targets: &[Tensor],
) -> f64 {
    let mut rng = RngStream::new(0, "dropout");
    let obj = model
        .objective_with_confidence(views, mask, labels, cfg, Mode::Train, &mut rng, targets)
        .unwrap();
    obj.graph.value(obj.total).item()
}

pub fn max_relative_error(weights: LossWeights) -> f64 {
    let (mut model, views, mask, labels) = tiny();
    let cfg = ObjectiveConfig {
        weights,
        ..Default::default()
    };
    let mut rng = RngStream::new(0, "dropout");
    let obj = model.objective(&views, &mask, &labels, &cfg, Mode::Train, &mut rng).unwrap();
    let grads = backward(&obj.graph, obj.total, model.params()).unwrap();
    let targets = obj.cache.confidence();
    let ids: Vec<_> = model.params().ids().collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for id in ids {
        for e in 0..model.params().get(id).len() {
            let orig = model.params().get(id).data()[e];
            model.params_mut().get_mut(id).data_mut()[e] = orig + h;
            let up = objective_value(&mut model, &views, &mask, &labels, &cfg, &targets);
            model.params_mut().get_mut(id).data_mut()[e] = orig - h;
            let down = objective_value(&mut model, &views, &mask, &labels, &cfg, &targets);
            model.params_mut().get_mut(id).data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id).data()[e];
            // Biases feeding batch norm have an exactly zero gradient; their
            // central differences are pure roundoff (about 1e-9), so entries
            // agreeing to 1e-8 absolute are not scored relatively.
            let diff = (numeric - analytic).abs();
            let err = if diff <= 1e-8 {
                0.0
            } else {
                diff / numeric.abs().max(analytic.abs())
            };
            if err > worst {
                worst = err;
            }
        }
    }
    worst
}
