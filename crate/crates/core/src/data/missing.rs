use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MultiOmicsDataset;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Which views an incomplete subject loses.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingnessPolicy {
    /// Retained count uniform on `1..M`, then the retained set uniform among
    /// subsets of that size.
    #[default]
    Uniform,
    /// Every incomplete subject loses exactly these views.
    DropViews(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub eta: f64,
    pub seed: u64,
    #[serde(default)]
    pub policy: MissingnessPolicy,
}

impl MissingnessSpec {
    pub fn new(eta: f64, seed: u64) -> Self {
        Self {
            eta,
            seed,
            policy: MissingnessPolicy::Uniform,
        }
    }

    /// Number of incomplete subjects out of `n`.
    pub fn incomplete_count(&self, n: usize) -> usize {
        libm::round(self.eta * n as f64) as usize
    }
}

/// Marks `round(eta * N)` subjects, chosen uniformly, as incomplete.
pub fn apply_missingness(
    ds: &MultiOmicsDataset,
    spec: &MissingnessSpec,
) -> Result<MultiOmicsDataset> {
    apply_missingness_on(ds, spec, "missingness")
}

/// [`apply_missingness`] drawing from the stream labelled `stream`, so the
/// same seed can mask several datasets independently.
pub fn apply_missingness_on(
    ds: &MultiOmicsDataset,
    spec: &MissingnessSpec,
    stream: &str,
) -> Result<MultiOmicsDataset> {
    if !(0.0..=1.0).contains(&spec.eta) {
        return Err(Error::InvalidHyperparameter {
            name: "eta",
            value: spec.eta,
        });
    }
    if !ds.mask().is_complete() {
        return Err(Error::AlreadyMasked);
    }
    let n = ds.num_subjects();
    let m = ds.num_views();
    let count = spec.incomplete_count(n);
    if count > 0 && m < 2 {
        return Err(Error::InvalidConfig(
            "a single-view dataset cannot have incomplete subjects".into(),
        ));
    }
    if let MissingnessPolicy::DropViews(drop) = &spec.policy {
        let mut d = drop.clone();
        d.sort_unstable();
        d.dedup();
        if d.is_empty() || d.len() >= m || d.iter().any(|&v| v >= m) {
            return Err(Error::InvalidConfig(
                "dropped views must be a nonempty proper subset of the views".into(),
            ));
        }
    }
    let mut rng = RngStream::new(spec.seed, stream);
    let mut mask = ds.mask().clone();
    let mut subjects = rng.sample_indices(n, count);
    subjects.sort_unstable();
    for j in subjects {
        match &spec.policy {
            MissingnessPolicy::Uniform => {
                let keep = 1 + rng.below(m - 1);
                let retained = rng.sample_indices(m, keep);
                for v in 0..m {
                    mask.set(j, v, retained.contains(&v));
                }
            }
            MissingnessPolicy::DropViews(drop) => {
                for &v in drop {
                    mask.set(j, v, false);
                }
            }
        }
    }
    let mut out = ds.clone();
    out.set_mask(mask)?;
    Ok(out)
}
