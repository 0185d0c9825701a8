mod common;

use clclsa_core::eval::{
    accuracy, auc_binary, confusion_matrix, f1_binary, multiclass_f1, F1Average, MetricsReport,
};
use clclsa_core::numerics::{RngStream, Tensor};
use common::oracle;

#[test]
fn auc_matches_pairwise_oracle() {
    let mut rng = RngStream::new(0, "auc");
    for case in 0..500 {
        let n = 2 + rng.below(499);
        let mut truth: Vec<usize> = (0..n).map(|_| rng.below(2)).collect();
        truth[0] = 0;
        truth[1] = 1;
        // Coarse scores force ties in a share of the cases.
        let levels = if case % 2 == 0 { 5 } else { 1_000_000 };
        let scores: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64 / levels as f64).collect();
        let got = auc_binary(&scores, &truth).unwrap();
        let want = oracle::auc_pairwise(&scores, &truth);
        assert!((got - want).abs() < 1e-12, "case {case}: {got} vs {want}");
    }
}

#[test]
fn auc_edge_cases() {
    assert_eq!(auc_binary(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
    assert_eq!(auc_binary(&[0.4; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
    assert!(auc_binary(&[0.1, 0.2], &[1, 1]).is_err());
}

#[test]
fn f1_matches_confusion_oracles() {
    let mut rng = RngStream::new(1, "f1");
    for case in 0..200 {
        let classes = 2 + rng.below(4);
        let n = 1 + rng.below(40);
        let truth: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
        let cm = confusion_matrix(&pred, &truth, classes).unwrap();
        for t in 0..classes {
            for p in 0..classes {
                let count = pred.iter().zip(&truth).filter(|&(&a, &b)| a == p && b == t).count();
                assert_eq!(cm[t][p], count);
            }
        }
        let macro_ = multiclass_f1(&pred, &truth, classes, F1Average::Macro).unwrap();
        let weighted = multiclass_f1(&pred, &truth, classes, F1Average::Weighted).unwrap();
        assert!((macro_ - oracle::macro_f1(&pred, &truth, classes)).abs() < 1e-12, "case {case}");
        assert!((weighted - oracle::weighted_f1(&pred, &truth, classes)).abs() < 1e-12, "case {case}");
        if classes == 2 {
            let f1 = f1_binary(&pred, &truth, 1).unwrap();
            assert!((f1 - oracle::class_f1(&pred, &truth, 1)).abs() < 1e-12);
            let mean = (f1_binary(&pred, &truth, 0).unwrap() + f1) / 2.0;
            assert!((macro_ - mean).abs() < 1e-12);
        } else if pred.iter().chain(&truth).any(|&y| y > 1) {
            assert!(f1_binary(&pred, &truth, 1).is_err());
        }
    }
}

#[test]
fn hand_cases() {
    // Class 1: TP 1, FP 1, FN 1.
    let pred = [1, 1, 0, 0];
    let truth = [1, 0, 1, 0];
    assert_eq!(f1_binary(&pred, &truth, 1).unwrap(), 0.5);
    assert_eq!(f1_binary(&[0, 0], &[0, 0], 1).unwrap(), 0.0);
    assert_eq!(accuracy(&[0, 1, 2, 2], &[0, 1, 2, 0]).unwrap(), 0.75);
    assert_eq!(accuracy(&[0, 1], &[1, 0]).unwrap(), 0.0);

    // Three classes: per-class F1 1/2, 2/3, 4/5 with supports 2, 1, 3.
    let truth = [0, 0, 1, 2, 2, 2];
    let pred = [0, 1, 1, 2, 2, 0];
    let macro_ = multiclass_f1(&pred, &truth, 3, F1Average::Macro).unwrap();
    let weighted = multiclass_f1(&pred, &truth, 3, F1Average::Weighted).unwrap();
    assert!((macro_ - (0.5 + 2.0 / 3.0 + 0.8) / 3.0).abs() < 1e-12);
    assert!((weighted - (2.0 * 0.5 + 2.0 / 3.0 + 3.0 * 0.8) / 6.0).abs() < 1e-12);
}

#[test]
fn balanced_weighted_equals_macro() {
    let mut rng = RngStream::new(2, "balanced");
    for _ in 0..100 {
        let classes = 2 + rng.below(4);
        let per = 1 + rng.below(10);
        let truth: Vec<usize> = (0..classes * per).map(|j| j % classes).collect();
        let pred: Vec<usize> = truth.iter().map(|_| rng.below(classes)).collect();
        let w = multiclass_f1(&pred, &truth, classes, F1Average::Weighted).unwrap();
        let m = multiclass_f1(&pred, &truth, classes, F1Average::Macro).unwrap();
        assert!((w - m).abs() < 1e-12);
    }
    let truth = [0, 1, 2, 0, 1, 2];
    for mode in [F1Average::Weighted, F1Average::Macro] {
        assert_eq!(multiclass_f1(&truth, &truth, 3, mode).unwrap(), 1.0);
    }
}

#[test]
fn report_from_probabilities() {
    let probs = Tensor::from_rows(&[[0.9, 0.1], [0.4, 0.6], [0.3, 0.7], [0.8, 0.2]]);
    let r = MetricsReport::from_probs(&probs, &[0, 1, 0, 1]).unwrap();
    assert_eq!(r.acc, 0.5);
    assert_eq!(r.confusion, vec![vec![1, 1], vec![1, 1]]);
    assert_eq!(r.auc, Some(oracle::auc_pairwise(&[0.1, 0.6, 0.7, 0.2], &[0, 1, 0, 1])));
    let three = Tensor::filled(3, 3, 1.0 / 3.0);
    let r = MetricsReport::from_probs(&three, &[0, 1, 2]).unwrap();
    assert_eq!((r.f1, r.auc), (None, None));
}
