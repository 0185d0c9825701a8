use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subject-by-view observation flags (`true` = observed).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    subjects: usize,
    views: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn full(subjects: usize, views: usize) -> Self {
        Self {
            subjects,
            views,
            bits: vec![true; subjects * views],
        }
    }

    pub fn from_rows<R: AsRef<[bool]>>(rows: &[R]) -> Result<Self> {
        let views = rows.first().map_or(0, |r| r.as_ref().len());
        let mut bits = Vec::with_capacity(rows.len() * views);
        for r in rows {
            let r = r.as_ref();
            if r.len() != views {
                return Err(Error::LengthMismatch {
                    left: views,
                    right: r.len(),
                });
            }
            bits.extend_from_slice(r);
        }
        Ok(Self {
            subjects: rows.len(),
            views,
            bits,
        })
    }

    pub fn subjects(&self) -> usize {
        self.subjects
    }

    pub fn views(&self) -> usize {
        self.views
    }

    #[inline]
    pub fn observed(&self, subject: usize, view: usize) -> bool {
        self.bits[subject * self.views + view]
    }

    pub fn set(&mut self, subject: usize, view: usize, observed: bool) {
        self.bits[subject * self.views + view] = observed;
    }

    pub fn row(&self, subject: usize) -> &[bool] {
        &self.bits[subject * self.views..(subject + 1) * self.views]
    }

    /// Subjects with `view` observed, ascending.
    pub fn observed_subjects(&self, view: usize) -> Vec<usize> {
        (0..self.subjects).filter(|&j| self.observed(j, view)).collect()
    }

    /// Subjects with both views observed, ascending.
    pub fn jointly_observed(&self, a: usize, b: usize) -> Vec<usize> {
        (0..self.subjects)
            .filter(|&j| self.observed(j, a) && self.observed(j, b))
            .collect()
    }

    pub fn observed_views(&self, subject: usize) -> Vec<usize> {
        (0..self.views).filter(|&i| self.observed(subject, i)).collect()
    }

    pub fn observed_count(&self, subject: usize) -> usize {
        self.row(subject).iter().filter(|&&b| b).count()
    }

    pub fn is_complete_subject(&self, subject: usize) -> bool {
        self.row(subject).iter().all(|&b| b)
    }

    pub fn is_complete(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    /// Number of subjects missing at least one view.
    pub fn incomplete_count(&self) -> usize {
        (0..self.subjects)
            .filter(|&j| !self.is_complete_subject(j))
            .count()
    }

    /// First subject with no observed view, if any.
    pub fn first_empty_subject(&self) -> Option<usize> {
        (0..self.subjects).find(|&j| self.observed_count(j) == 0)
    }

    pub fn gather_subjects(&self, indices: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(indices.len() * self.views);
        for &j in indices {
            bits.extend_from_slice(self.row(j));
        }
        Self {
            subjects: indices.len(),
            views: self.views,
            bits,
        }
    }

    pub fn select_views(&self, views: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(self.subjects * views.len());
        for j in 0..self.subjects {
            for &v in views {
                bits.push(self.observed(j, v));
            }
        }
        Self {
            subjects: self.subjects,
            views: views.len(),
            bits,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queries() {
        let m = Mask::from_rows(&[[true, false, true], [true, true, true], [false, true, false]])
            .unwrap();
        assert_eq!(m.observed_subjects(0), [0, 1]);
        assert_eq!(m.jointly_observed(1, 2), [1]);
        assert_eq!(m.observed_views(0), [0, 2]);
        assert_eq!(m.incomplete_count(), 2);
        assert!(!m.is_complete());
        assert_eq!(m.first_empty_subject(), None);
        assert_eq!(m.select_views(&[2, 0]).row(2), &[false, false]);
        assert_eq!(m.select_views(&[2, 0]).first_empty_subject(), Some(2));
    }
}
