use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MultiOmicsDataset;
use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};

/// Parameters of the simulated multi-view family.
///
/// Each subject has a shared latent `s = class_sep * mu_y + e` with standard
/// normal `e` and class means `mu_c` drawn from a standard normal. View `i`
/// observes `A_i s + noise / snr`, with `A_i` entries drawn from
/// `N(0, 1/shared_dim)` and standard normal noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub subjects: usize,
    pub view_dims: Vec<usize>,
    pub num_classes: usize,
    pub shared_dim: usize,
    pub snr: f64,
    pub class_sep: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            subjects: 400,
            view_dims: alloc::vec![20, 20, 20],
            num_classes: 3,
            shared_dim: 8,
            snr: 5.0,
            class_sep: 3.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0
            || self.view_dims.is_empty()
            || self.view_dims.contains(&0)
            || self.num_classes == 0
            || self.shared_dim == 0
        {
            return Err(Error::InvalidConfig("synthetic counts must be at least 1".into()));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::InvalidHyperparameter {
                name: "snr",
                value: self.snr,
            });
        }
        if !(self.class_sep >= 0.0 && self.class_sep.is_finite()) {
            return Err(Error::InvalidHyperparameter {
                name: "class_sep",
                value: self.class_sep,
            });
        }
        Ok(())
    }
}

/// Draws a fully observed dataset. Labels are balanced (class sizes differ
/// by at most one) and shuffled.
pub fn synth_generate(spec: &SyntheticSpec) -> Result<MultiOmicsDataset> {
    spec.validate()?;
    let n = spec.subjects;
    let c = spec.num_classes;
    let s_dim = spec.shared_dim;
    let root = RngStream::new(spec.seed, "synthetic");

    let mut rng = root.derive("labels");
    let mut labels: Vec<usize> = (0..n).map(|j| j % c).collect();
    rng.shuffle(&mut labels);

    let mut rng = root.derive("means");
    let means = Tensor::from_fn(c, s_dim, |_, _| rng.normal());

    let mut rng = root.derive("shared");
    let shared = Tensor::from_fn(n, s_dim, |j, d| {
        spec.class_sep * means.get(labels[j], d) + rng.normal()
    });

    let scale = 1.0 / libm::sqrt(s_dim as f64);
    let views = spec
        .view_dims
        .iter()
        .enumerate()
        .map(|(i, &dim)| {
            let view_rng = root.derive(&format!("view{i}"));
            let mut rng = view_rng.derive("map");
            let map = Tensor::from_fn(s_dim, dim, |_, _| scale * rng.normal());
            let mut rng = view_rng.derive("noise");
            let mut x = crate::numerics::matmul(&shared, &map).expect("shapes agree");
            for v in x.data_mut() {
                *v += rng.normal() / spec.snr;
            }
            x
        })
        .collect();
    let mut ds = MultiOmicsDataset::new(views, labels, c)?;
    ds.provenance = format!(
        "synthetic: n={} dims={:?} classes={} shared_dim={} snr={} class_sep={} seed={}",
        n, spec.view_dims, c, s_dim, spec.snr, spec.class_sep, spec.seed
    );
    Ok(ds)
}
