use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

fn f1_from_counts(tp: usize, fp: usize, fneg: usize) -> f64 {
    // Equal to 2PR/(P+R); a zero denominator scores 0.
    let denom = 2 * tp + fp + fneg;
    if tp == 0 || denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// F1 of `positive` against the rest, for labels in `{0, 1}`.
pub fn f1_binary(pred: &[usize], truth: &[usize], positive: usize) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.iter().chain(truth).any(|&y| y > 1) || positive > 1 {
        return Err(Error::NonBinary);
    }
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    Ok(f1_from_counts(tp, fp, fneg))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, computed from midranks.
pub fn auc_binary(scores: &[f64], truth: &[usize]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: truth.len(),
        });
    }
    if truth.iter().any(|&y| y > 1) {
        return Err(Error::NonBinary);
    }
    let pos = truth.iter().filter(|&&y| y == 1).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the positive rank sum, kept in integers until the end.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share the midrank (i + j + 2) / 2.
        let positives = order[i..=j].iter().filter(|&&k| truth[k] == 1).count() as u128;
        rank_sum2 += positives * (i + j + 2) as u128;
        i = j + 1;
    }
    let (pos, neg) = (pos as u128, neg as u128);
    let u2 = rank_sum2 - pos * (pos + 1);
    Ok(u2 as f64 / (2 * pos * neg) as f64)
}

/// `counts[t][p]`: subjects of true class `t` predicted as `p`.
pub fn confusion_matrix(pred: &[usize], truth: &[usize], classes: usize) -> Result<Vec<Vec<usize>>> {
    check_lengths(pred, truth)?;
    let mut m = vec![vec![0; classes]; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= classes || t >= classes {
            return Err(Error::InvalidLabel {
                label: p.max(t),
                classes,
            });
        }
        m[t][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Average {
    Weighted,
    Macro,
}

/// One-vs-rest F1 per class, averaged by true-class support (weighted) or
/// uniformly (macro). Classes never predicted nor present score 0.
pub fn multiclass_f1(pred: &[usize], truth: &[usize], classes: usize, mode: F1Average) -> Result<f64> {
    let cm = confusion_matrix(pred, truth, classes)?;
    Ok(f1_from_confusion(&cm, mode))
}

pub(crate) fn f1_from_confusion(cm: &[Vec<usize>], mode: F1Average) -> f64 {
    let c = cm.len();
    let n: usize = cm.iter().flatten().sum();
    let mut total = 0.0;
    for k in 0..c {
        let tp = cm[k][k];
        let support: usize = cm[k].iter().sum();
        let predicted: usize = cm.iter().map(|r| r[k]).sum();
        let f1 = f1_from_counts(tp, predicted - tp, support - tp);
        total += match mode {
            F1Average::Macro => f1 / c as f64,
            F1Average::Weighted => f1 * support as f64 / n as f64,
        };
    }
    total
}

/// All metrics for one evaluation. Binary-only fields are `None` for more
/// than two classes; AUC is also `None` when the truth has a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub weighted_f1: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<usize>>,
    pub n_subjects: usize,
}

impl MetricsReport {
    /// Metrics from class probabilities (`N x C`) and true labels.
    pub fn from_probs(probs: &Tensor, truth: &[usize]) -> Result<Self> {
        let pred = probs.argmax_rows();
        let classes = probs.cols();
        let confusion = confusion_matrix(&pred, truth, classes)?;
        let n = truth.len();
        let trace: usize = (0..classes).map(|k| confusion[k][k]).sum();
        let (f1, auc) = if classes == 2 {
            let scores: Vec<f64> = (0..n).map(|j| probs.get(j, 1)).collect();
            (Some(f1_binary(&pred, truth, 1)?), auc_binary(&scores, truth).ok())
        } else {
            (None, None)
        };
        Ok(Self {
            acc: trace as f64 / n as f64,
            f1,
            auc,
            weighted_f1: f1_from_confusion(&confusion, F1Average::Weighted),
            macro_f1: f1_from_confusion(&confusion, F1Average::Macro),
            confusion,
            n_subjects: n,
        })
    }

    pub fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Acc => Some(self.acc),
            Metric::F1 => self.f1,
            Metric::Auc => self.auc,
            Metric::WeightedF1 => Some(self.weighted_f1),
            Metric::MacroF1 => Some(self.macro_f1),
        }
    }
}

/// A scalar summary usable for model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Acc,
    F1,
    Auc,
    WeightedF1,
    MacroF1,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 1], &[0, 1, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1], &[1, 0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 1, 1]).unwrap(), 0.75);
        assert!(accuracy(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn f1_examples() {
        // TP=1, FP=1, FN=1
        assert_eq!(f1_binary(&[1, 1, 0, 0], &[1, 0, 1, 0], 1).unwrap(), 0.5);
        assert_eq!(f1_binary(&[1, 0], &[1, 0], 1).unwrap(), 1.0);
        assert_eq!(f1_binary(&[0, 0], &[0, 0], 1).unwrap(), 0.0);
        assert!(matches!(f1_binary(&[2], &[0], 1), Err(Error::NonBinary)));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_binary(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc_binary(&[0.5; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(matches!(auc_binary(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedAuc)));
    }

    #[test]
    fn report_counts() {
        let probs = Tensor::from_rows(&[[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]]);
        let r = MetricsReport::from_probs(&probs, &[0, 1, 1]).unwrap();
        assert_eq!(r.confusion, vec![vec![1, 0], vec![1, 1]]);
        assert_eq!(r.n_subjects, 3);
        assert!((r.acc - 2.0 / 3.0).abs() < 1e-15);
        assert!(r.auc.is_some());
        let probs = Tensor::from_rows(&[[0.9, 0.05, 0.05]]);
        let r = MetricsReport::from_probs(&probs, &[0]).unwrap();
        assert_eq!((r.f1, r.auc), (None, None));
    }
}
