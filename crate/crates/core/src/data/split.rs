use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MultiOmicsDataset;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    /// Stratified 70/30.
    pub fn new(seed: u64) -> Self {
        Self {
            train_fraction: 0.7,
            seed,
            stratified: true,
        }
    }
}

/// Train and test subject indices (each sorted ascending).
pub fn split_indices(labels: &[usize], classes: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::InvalidHyperparameter {
            name: "train_fraction",
            value: f,
        });
    }
    let n = labels.len();
    let mut rng = RngStream::new(spec.seed, "split");
    let total_train = libm::round(f * n as f64) as usize;
    let mut train = Vec::with_capacity(total_train);
    if spec.stratified {
        let mut groups = vec![Vec::new(); classes];
        for (j, &y) in labels.iter().enumerate() {
            groups[y].push(j);
        }
        for (class, g) in groups.iter().enumerate() {
            if g.len() == 1 {
                return Err(Error::Stratification { class, count: 1 });
            }
        }
        // Largest-remainder allocation of the train budget across classes.
        let quotas: Vec<f64> = groups.iter().map(|g| f * g.len() as f64).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|&q| libm::floor(q) as usize).collect();
        let mut order: Vec<usize> = (0..classes).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - counts[a] as f64;
            let rb = quotas[b] - counts[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut left = total_train.saturating_sub(counts.iter().sum());
        for &c in order.iter().cycle().take(classes * 2) {
            if left == 0 {
                break;
            }
            if counts[c] < groups[c].len() {
                counts[c] += 1;
                left -= 1;
            }
        }
        for (g, &k) in groups.iter_mut().zip(&counts) {
            rng.shuffle(g);
            train.extend_from_slice(&g[..k]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut all);
        train.extend_from_slice(&all[..total_train]);
    }
    train.sort_unstable();
    let mut in_train = vec![false; n];
    for &j in &train {
        in_train[j] = true;
    }
    let test = (0..n).filter(|&j| !in_train[j]).collect();
    Ok((train, test))
}

/// Seeded partition into train and test datasets.
pub fn split(
    ds: &MultiOmicsDataset,
    spec: &SplitSpec,
) -> Result<(MultiOmicsDataset, MultiOmicsDataset)> {
    let (train, test) = split_indices(ds.labels(), ds.num_classes(), spec)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}
