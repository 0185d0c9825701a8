//! Scalar reference implementations written independently of the library.
#![allow(dead_code)]

pub fn ln_clamped(v: f64) -> f64 {
    v.max(1e-12).ln()
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Average over subjects of outer products of row-softmaxed latents,
/// normalized to unit mass.
pub fn joint(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let (da, db) = (a[0].len(), b[0].len());
    let mut p = vec![vec![0.0; db]; da];
    for j in 0..n {
        let (sa, sb) = (softmax(&a[j]), softmax(&b[j]));
        for d in 0..da {
            for e in 0..db {
                p[d][e] += sa[d] * sb[e] / n as f64;
            }
        }
    }
    let total: f64 = p.iter().flatten().sum();
    p.iter().map(|r| r.iter().map(|v| v / total).collect()).collect()
}

pub fn contrastive(p: &[Vec<f64>], alpha: f64) -> f64 {
    let rows: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..p[0].len()).map(|e| p.iter().map(|r| r[e]).sum()).collect();
    let mut s = 0.0;
    for d in 0..p.len() {
        for e in 0..p[0].len() {
            let v = p[d][e];
            s -= v * (ln_clamped(v) - (alpha + 1.0) * (ln_clamped(rows[d]) + ln_clamped(cols[e])));
        }
    }
    s
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean negative log-likelihood of the true class.
pub fn nll_mean(probs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let s: f64 = probs.iter().zip(labels).map(|(p, &y)| -ln_clamped(p[y])).sum();
    s / labels.len() as f64
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting
/// one half.
pub fn auc_pairwise(scores: &[f64], truth: &[usize]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if truth[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if truth[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                credit += 1.0;
            } else if si == sj {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

/// Per-class F1 from counts, zero when undefined.
pub fn class_f1(pred: &[usize], truth: &[usize], class: usize) -> f64 {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == class, t == class) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            _ => {}
        }
    }
    let denom = 2.0 * tp + fp + fn_;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * tp / denom
    }
}

pub fn macro_f1(pred: &[usize], truth: &[usize], classes: usize) -> f64 {
    (0..classes).map(|c| class_f1(pred, truth, c)).sum::<f64>() / classes as f64
}

pub fn weighted_f1(pred: &[usize], truth: &[usize], classes: usize) -> f64 {
    let n = truth.len() as f64;
    (0..classes)
        .map(|c| {
            let support = truth.iter().filter(|&&t| t == c).count() as f64;
            support / n * class_f1(pred, truth, c)
        })
        .sum()
}
