use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Mask;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Subjects measured on several views, with per-view observation flags.
///
/// Cells of unobserved views stay in storage (useful as ground truth in
/// simulations) but the mask is authoritative: nothing downstream reads them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiOmicsDataset {
    views: Vec<Tensor>,
    mask: Mask,
    labels: Vec<usize>,
    num_classes: usize,
    pub view_names: Vec<String>,
    pub feature_names: Vec<Vec<String>>,
    pub provenance: String,
}

impl MultiOmicsDataset {
    /// Fully observed dataset with generated view and feature names.
    pub fn new(views: Vec<Tensor>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let n = labels.len();
        let mask = Mask::full(n, views.len());
        Self::with_mask(views, mask, labels, num_classes)
    }

    pub fn with_mask(
        views: Vec<Tensor>,
        mask: Mask,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let view_names = (0..views.len()).map(|i| format!("view{i}")).collect();
        let feature_names = views
            .iter()
            .map(|v| (0..v.cols()).map(|c| format!("f{c}")).collect())
            .collect();
        let ds = Self {
            views,
            mask,
            labels,
            num_classes,
            view_names,
            feature_names,
            provenance: String::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.views.is_empty() {
            return Err(Error::InvalidConfig("dataset has no views".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidConfig("dataset has no classes".into()));
        }
        for v in &self.views {
            if v.rows() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: v.rows(),
                });
            }
        }
        if self.mask.subjects() != n || self.mask.views() != self.views.len() {
            return Err(Error::Shape {
                op: "mask",
                lhs: (self.mask.subjects(), self.mask.views()),
                rhs: (n, self.views.len()),
            });
        }
        if let Some(&label) = self.labels.iter().find(|&&y| y >= self.num_classes) {
            return Err(Error::InvalidLabel {
                label,
                classes: self.num_classes,
            });
        }
        if let Some(subject) = self.mask.first_empty_subject() {
            return Err(Error::InvalidSubject { subject });
        }
        if self.view_names.len() != self.views.len()
            || self.feature_names.len() != self.views.len()
            || self
                .feature_names
                .iter()
                .zip(&self.views)
                .any(|(f, v)| f.len() != v.cols())
        {
            return Err(Error::InvalidConfig("name lists do not match view shapes".into()));
        }
        Ok(())
    }

    pub fn views(&self) -> &[Tensor] {
        &self.views
    }

    pub fn view(&self, i: usize) -> &Tensor {
        &self.views[i]
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_subjects(&self) -> usize {
        self.labels.len()
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Tensor::cols).collect()
    }

    /// Fraction of subjects missing at least one view.
    pub fn missing_rate(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.mask.incomplete_count() as f64 / self.labels.len() as f64
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Replaces the mask. Fails if any subject would lose every view.
    pub fn set_mask(&mut self, mask: Mask) -> Result<()> {
        if mask.subjects() != self.num_subjects() || mask.views() != self.num_views() {
            return Err(Error::Shape {
                op: "mask",
                lhs: (mask.subjects(), mask.views()),
                rhs: (self.num_subjects(), self.num_views()),
            });
        }
        if let Some(subject) = mask.first_empty_subject() {
            return Err(Error::InvalidSubject { subject });
        }
        self.mask = mask;
        Ok(())
    }

    /// Rows `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            views: self.views.iter().map(|v| v.gather_rows(indices)).collect(),
            mask: self.mask.gather_subjects(indices),
            labels: indices.iter().map(|&j| self.labels[j]).collect(),
            num_classes: self.num_classes,
            view_names: self.view_names.clone(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Only the listed views, in that order. Subjects left with no observed
    /// view are dropped.
    pub fn select_views(&self, views: &[usize]) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidSubset("no views selected".into()));
        }
        if let Some(&v) = views.iter().find(|&&v| v >= self.num_views()) {
            return Err(Error::InvalidSubset(format!("no view {v}")));
        }
        let mask = self.mask.select_views(views);
        let keep: Vec<usize> = (0..self.num_subjects())
            .filter(|&j| mask.observed_count(j) > 0)
            .collect();
        let ds = Self {
            views: views.iter().map(|&v| self.views[v].clone()).collect(),
            mask,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            view_names: views.iter().map(|&v| self.view_names[v].clone()).collect(),
            feature_names: views.iter().map(|&v| self.feature_names[v].clone()).collect(),
            provenance: self.provenance.clone(),
        };
        Ok(if keep.len() == ds.num_subjects() {
            ds
        } else {
            ds.subset(&keep)
        })
    }

    /// Subjects observing every view.
    pub fn complete_cases(&self) -> Self {
        let keep: Vec<usize> = (0..self.num_subjects())
            .filter(|&j| self.mask.is_complete_subject(j))
            .collect();
        self.subset(&keep)
    }

    /// Per-feature min-max scaling to `[0, 1]` using observed rows only;
    /// constant columns map to zero.
    pub fn min_max_scale(&mut self) {
        for (i, v) in self.views.iter_mut().enumerate() {
            let rows = self.mask.observed_subjects(i);
            min_max_scale_rows(v, &rows);
        }
    }
}

pub(crate) fn min_max_scale_rows(v: &mut Tensor, rows: &[usize]) {
    for c in 0..v.cols() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in rows {
            lo = lo.min(v.get(r, c));
            hi = hi.max(v.get(r, c));
        }
        let range = hi - lo;
        for r in 0..v.rows() {
            let x = v.get(r, c);
            v.set(r, c, if range > 0.0 { (x - lo) / range } else { 0.0 });
        }
    }
}

/// Per-feature min-max scaling of a matrix.
pub fn min_max_scale(v: &mut Tensor) {
    let rows: Vec<usize> = (0..v.rows()).collect();
    min_max_scale_rows(v, &rows);
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ds() -> MultiOmicsDataset {
        MultiOmicsDataset::new(
            vec![Tensor::zeros(5, 4), Tensor::zeros(5, 3), Tensor::zeros(5, 2)],
            vec![0, 1, 0, 1, 1],
            2,
        )
        .unwrap()
    }

    #[test]
    fn shapes() {
        let d = ds();
        assert_eq!((d.num_views(), d.num_subjects()), (3, 5));
        assert_eq!(d.view_dims(), vec![4, 3, 2]);
        assert_eq!(d.class_counts(), vec![2, 3]);
    }

    #[test]
    fn label_out_of_range() {
        let err = MultiOmicsDataset::new(vec![Tensor::zeros(2, 1)], vec![0, 2], 2).unwrap_err();
        assert!(matches!(err, Error::InvalidLabel { label: 2, classes: 2 }));
    }

    #[test]
    fn constant_column_scales_to_zero() {
        let mut t = Tensor::from_rows(&[[3.0, 1.0], [3.0, 5.0], [3.0, 3.0]]);
        min_max_scale(&mut t);
        assert_eq!(t.data(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.5]);
    }

    #[test]
    fn select_views_drops_empty_subjects() {
        let mut d = ds();
        let mask = Mask::from_rows(&[
            [true, true, true],
            [false, false, true],
            [true, false, false],
            [true, true, true],
            [false, true, true],
        ])
        .unwrap();
        d.set_mask(mask).unwrap();
        let s = d.select_views(&[0, 1]).unwrap();
        assert_eq!(s.num_subjects(), 4);
        assert_eq!(s.labels(), &[0, 0, 1, 1]);
        assert_eq!(d.complete_cases().num_subjects(), 2);
    }
}
