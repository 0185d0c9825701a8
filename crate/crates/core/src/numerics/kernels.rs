//! Forward kernels shared by the eager API and the recorder.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Mode, RngStream, Tensor};
use crate::error::{Error, Result};

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols() != b.rows() {
        return Err(Error::Shape {
            op: "matmul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = Tensor::zeros(n, m);
    let bd = b.data();
    for i in 0..n {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (p, &av) in arow.iter().enumerate().take(k) {
            if av == 0.0 {
                continue;
            }
            let brow = &bd[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

/// `x * w + bias`, with `bias` broadcast over rows.
pub fn affine(x: &Tensor, w: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if x.cols() != w.rows() {
        return Err(Error::Shape {
            op: "affine",
            lhs: x.shape(),
            rhs: w.shape(),
        });
    }
    if bias.shape() != (1, w.cols()) {
        return Err(Error::Shape {
            op: "affine bias",
            lhs: w.shape(),
            rhs: bias.shape(),
        });
    }
    let mut out = matmul(x, w)?;
    for r in 0..out.rows() {
        for (o, &b) in out.row_mut(r).iter_mut().zip(bias.data()) {
            *o += b;
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Draws the scaled keep-mask for inverted dropout.
pub(crate) fn dropout_mask(
    rows: usize,
    cols: usize,
    p: f64,
    rng: &mut RngStream,
) -> Result<Tensor> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let keep = 1.0 / (1.0 - p);
    let mut mask = Tensor::filled(rows, cols, keep);
    if p > 0.0 {
        for v in mask.data_mut() {
            if rng.bernoulli(p) {
                *v = 0.0;
            }
        }
    }
    Ok(mask)
}

/// Inverted dropout: identity in eval mode.
pub fn dropout(x: &Tensor, p: f64, mode: Mode, rng: &mut RngStream) -> Result<Tensor> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.rows(), x.cols(), p, rng)?;
    x.zip_map(&mask, |a, m| a * m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchNormConfig {
    pub momentum: f64,
    pub eps: f64,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        Self {
            momentum: 0.1,
            eps: 1e-5,
        }
    }
}

/// Exponential moving averages of per-column mean and variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }
}

/// Quantities kept from the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BnSaved {
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
    pub mode: Mode,
}

/// Batch normalization. Train mode uses batch statistics (biased variance)
/// and folds them into `state`; eval mode uses `state`.
pub fn batch_norm(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    state: &mut RunningStats,
    mode: Mode,
    cfg: BatchNormConfig,
) -> Result<(Tensor, BnSaved)> {
    let (n, d) = x.shape();
    if gamma.shape() != (1, d) || beta.shape() != (1, d) {
        return Err(Error::Shape {
            op: "batch_norm",
            lhs: x.shape(),
            rhs: gamma.shape(),
        });
    }
    if state.mean.len() != d {
        return Err(Error::Shape {
            op: "batch_norm running stats",
            lhs: x.shape(),
            rhs: (1, state.mean.len()),
        });
    }
    let (mean, var) = match mode {
        Mode::Train => {
            if n < 2 {
                return Err(Error::InsufficientBatch { rows: n });
            }
            let mut mean = vec![0.0; d];
            for r in 0..n {
                for (m, &v) in mean.iter_mut().zip(x.row(r)) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= n as f64;
            }
            let mut var = vec![0.0; d];
            for r in 0..n {
                for ((s, &v), &m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            for s in &mut var {
                *s /= n as f64;
            }
            let m = cfg.momentum;
            for c in 0..d {
                state.mean[c] = (1.0 - m) * state.mean[c] + m * mean[c];
                state.var[c] = (1.0 - m) * state.var[c] + m * var[c];
            }
            (mean, var)
        }
        Mode::Eval => (state.mean.clone(), state.var.clone()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / libm::sqrt(v + cfg.eps)).collect();
    let xhat = Tensor::from_fn(n, d, |r, c| (x.get(r, c) - mean[c]) * inv_std[c]);
    let g = gamma.data();
    let b = beta.data();
    let out = Tensor::from_fn(n, d, |r, c| g[c] * xhat.get(r, c) + b[c]);
    Ok((out, BnSaved { xhat, inv_std, mode }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
        Tensor::from_fn(x.rows(), w.cols(), |n, j| {
            let mut s = 0.0;
            for k in 0..x.cols() {
                s += x.get(n, k) * w.get(k, j);
            }
            s + b.get(0, j)
        })
    }

    #[test]
    fn affine_identity_input() {
        let w = Tensor::from_rows(&[[2.0, 0.0], [0.0, 3.0]]);
        let out = affine(&Tensor::identity(2), &w, &Tensor::zeros(1, 2)).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn affine_forced_arithmetic() {
        let x = Tensor::from_rows(&[[1.0, 1.0]]);
        let w = Tensor::from_rows(&[[1.0], [1.0]]);
        let b = Tensor::from_rows(&[[-2.0]]);
        assert_eq!(affine(&x, &w, &b).unwrap().data(), &[0.0]);
    }

    #[test]
    fn affine_matches_triple_loop() {
        let mut rng = RngStream::new(5, "affine");
        let x = Tensor::from_fn(3, 4, |_, _| rng.normal());
        let w = Tensor::from_fn(4, 2, |_, _| rng.normal());
        let b = Tensor::from_fn(1, 2, |_, _| rng.normal());
        let got = affine(&x, &w, &b).unwrap();
        assert!(got.max_abs_diff(&naive_affine(&x, &w, &b)) < 1e-12);
    }

    #[test]
    fn affine_shape_error_names_both_shapes() {
        let err = affine(&Tensor::zeros(2, 3), &Tensor::zeros(4, 2), &Tensor::zeros(1, 2))
            .unwrap_err();
        assert_eq!(
            err,
            Error::Shape {
                op: "affine",
                lhs: (2, 3),
                rhs: (4, 2)
            }
        );
    }

    #[test]
    fn sigmoid_cases() {
        let x = Tensor::from_rows(&[[0.0, 50.0, -3.0, 3.0]]);
        let y = sigmoid(&x);
        assert_eq!(y.get(0, 0), 0.5);
        assert!((y.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((y.get(0, 2) + y.get(0, 3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn relu_cases() {
        assert_eq!(
            relu(&Tensor::from_rows(&[[-1.0, 0.0, 2.0]])).data(),
            &[0.0, 0.0, 2.0]
        );
        assert_eq!(relu(&Tensor::filled(2, 2, -1.0)), Tensor::zeros(2, 2));
        let pos = Tensor::from_rows(&[[0.5, 3.0]]);
        assert_eq!(relu(&pos), pos);
    }

    #[test]
    fn softmax_cases() {
        let y = softmax_rows(&Tensor::filled(1, 4, 2.5));
        assert!(y.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let y = softmax_rows(&Tensor::from_rows(&[[0.0, libm::log(3.0)]]));
        assert!((y.get(0, 0) - 0.25).abs() < 1e-12);
        assert!((y.get(0, 1) - 0.75).abs() < 1e-12);
        let x = Tensor::from_rows(&[[0.3, -1.0, 2.0]]);
        let shifted = x.map(|v| v + 1000.0);
        assert!(softmax_rows(&x).max_abs_diff(&softmax_rows(&shifted)) < 1e-12);
    }

    #[test]
    fn dropout_eval_and_zero_p_pass_through() {
        let x = Tensor::from_rows(&[[1.0, -2.0], [3.0, 4.0]]);
        let mut rng = RngStream::new(1, "dropout");
        assert_eq!(dropout(&x, 0.5, Mode::Eval, &mut rng).unwrap(), x);
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut rng).unwrap(), x);
        assert_eq!(
            dropout(&x, 1.0, Mode::Train, &mut rng).unwrap_err(),
            Error::InvalidProbability(1.0)
        );
    }

    #[test]
    fn dropout_preserves_expectation() {
        let x = Tensor::filled(1, 100_000, 1.0);
        let mut rng = RngStream::new(11, "dropout");
        let y = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let mean = y.sum() / y.len() as f64;
        assert!((0.98..=1.02).contains(&mean), "{mean}");
    }

    #[test]
    fn batch_norm_standardizes_columns() {
        // Output variance is v / (v + eps), so |v_out - 1| < 1e-6 needs v > 10 eps / 1e-6.
        let mut rng = RngStream::new(2, "bn");
        let x = Tensor::from_fn(16, 3, |_, c| rng.normal() * 10.0 * (c as f64 + 1.0) + 5.0);
        let mut st = RunningStats::new(3);
        let (y, _) = batch_norm(
            &x,
            &Tensor::filled(1, 3, 1.0),
            &Tensor::zeros(1, 3),
            &mut st,
            Mode::Train,
            BatchNormConfig::default(),
        )
        .unwrap();
        for c in 0..3 {
            let col: Vec<f64> = (0..16).map(|r| y.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / 16.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 16.0;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-6, "{var}");
        }
    }

    #[test]
    fn batch_norm_constant_column_is_zero() {
        let x = Tensor::from_rows(&[[2.0, 1.0], [2.0, 3.0], [2.0, 5.0]]);
        let mut st = RunningStats::new(2);
        let (y, _) = batch_norm(
            &x,
            &Tensor::filled(1, 2, 1.0),
            &Tensor::zeros(1, 2),
            &mut st,
            Mode::Train,
            BatchNormConfig::default(),
        )
        .unwrap();
        assert!((0..3).all(|r| y.get(r, 0) == 0.0));
    }

    #[test]
    fn batch_norm_needs_two_rows_in_train() {
        let mut st = RunningStats::new(2);
        let err = batch_norm(
            &Tensor::zeros(1, 2),
            &Tensor::filled(1, 2, 1.0),
            &Tensor::zeros(1, 2),
            &mut st,
            Mode::Train,
            BatchNormConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err, Error::InsufficientBatch { rows: 1 });
    }

    #[test]
    fn batch_norm_eval_converges_to_train() {
        let mut rng = RngStream::new(4, "bn");
        let x = Tensor::from_fn(32, 4, |_, c| rng.normal() * 2.0 + c as f64);
        let gamma = Tensor::filled(1, 4, 1.3);
        let beta = Tensor::filled(1, 4, -0.2);
        let mut st = RunningStats::new(4);
        let cfg = BatchNormConfig::default();
        let mut train_out = Tensor::zeros(0, 0);
        for _ in 0..300 {
            train_out = batch_norm(&x, &gamma, &beta, &mut st, Mode::Train, cfg)
                .unwrap()
                .0;
        }
        let eval_out = batch_norm(&x, &gamma, &beta, &mut st, Mode::Eval, cfg)
            .unwrap()
            .0;
        assert!(train_out.max_abs_diff(&eval_out) < 1e-3);
    }
}
