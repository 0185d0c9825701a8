mod common;

use clclsa_core::data::Mask;
use clclsa_core::model::{
    joint_distribution, loss_auxiliary, loss_classification, loss_contrastive,
    loss_contrastive_pair, total_loss, LossWeights, Model, ModelConfig, Reduction,
};
use clclsa_core::numerics::{Mode, RngStream, Tensor};
use common::oracle;

fn random_tensor(rng: &mut RngStream, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.normal())
}

fn rows_of(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn random_distribution(rng: &mut RngStream, d: usize, e: usize) -> Tensor {
    let raw = Tensor::from_fn(d, e, |_, _| rng.uniform() + 1e-3);
    let s = raw.sum();
    raw.map(|v| v / s)
}

#[test]
fn joint_of_uniform_rows() {
    let z = Tensor::from_rows(&[[0.3, 0.3]]);
    let p = joint_distribution(&z, &z).unwrap();
    for v in p.data() {
        assert!((v - 0.25).abs() < 1e-15);
    }
}

#[test]
fn joint_matches_matrix_product() {
    let mut rng = RngStream::new(1, "joint");
    for _ in 0..20 {
        let a = random_tensor(&mut rng, 5, 3);
        let b = random_tensor(&mut rng, 5, 3);
        let p = joint_distribution(&a, &b).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-12);
        assert!(p.data().iter().all(|&v| v >= 0.0));
        let soft = |t: &Tensor| {
            let rows: Vec<f64> = rows_of(t).iter().flat_map(|r| oracle::softmax(r)).collect();
            nalgebra::DMatrix::from_row_slice(t.rows(), t.cols(), &rows)
        };
        let q = soft(&a).transpose() * soft(&b) / 5.0;
        let q = &q / q.sum();
        for d in 0..3 {
            for e in 0..3 {
                assert!((p.get(d, e) - q[(d, e)]).abs() < 1e-12);
            }
        }
        let loop_oracle = oracle::joint(&rows_of(&a), &rows_of(&b));
        for d in 0..3 {
            for e in 0..3 {
                assert!((p.get(d, e) - loop_oracle[d][e]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn contrastive_pair_matches_double_loop() {
    let mut rng = RngStream::new(2, "pair");
    for case in 0..100 {
        let d = 1 + rng.below(8);
        let e = 1 + rng.below(8);
        let alpha = [0.0, 1.0, 9.0][case % 3];
        let p = random_distribution(&mut rng, d, e);
        let got = loss_contrastive_pair(&p, alpha).unwrap();
        let want = oracle::contrastive(&rows_of(&p), alpha);
        assert!((got - want).abs() < 1e-10, "case {case}: {got} vs {want}");
    }
}

#[test]
fn contrastive_pair_closed_forms() {
    for d in 1..=8 {
        let uniform = Tensor::filled(d, d, 1.0 / (d * d) as f64);
        for alpha in [0.0, 1.0, 9.0] {
            let v = loss_contrastive_pair(&uniform, alpha).unwrap();
            let want = -2.0 * alpha * (d as f64).ln();
            assert!((v - want).abs() < 1e-12, "d {d} alpha {alpha}");
        }
        let diag = Tensor::from_fn(d, d, |i, j| if i == j { 1.0 / d as f64 } else { 0.0 });
        let v = loss_contrastive_pair(&diag, 0.0).unwrap();
        assert!((v + (d as f64).ln()).abs() < 1e-12);
    }
}

#[test]
fn contrastive_pair_rejects_non_distributions() {
    assert!(loss_contrastive_pair(&Tensor::filled(2, 2, 0.5), 1.0).is_err());
    assert!(loss_contrastive_pair(&Tensor::from_rows(&[[1.5, -0.5]]), 1.0).is_err());
}

#[test]
fn two_view_contrastive_is_twice_one_pair() {
    let mut rng = RngStream::new(3, "two");
    let a = random_tensor(&mut rng, 6, 4);
    let b = random_tensor(&mut rng, 6, 4);
    let mask = Mask::full(6, 2);
    let total = loss_contrastive(&[a.clone(), b.clone()], &mask, 9.0).unwrap();
    let one = loss_contrastive_pair(&joint_distribution(&a, &b).unwrap(), 9.0).unwrap();
    assert!((total - 2.0 * one).abs() < 1e-12 * one.abs().max(1.0));
}

#[test]
fn identical_views_match_pair_oracle() {
    let mut rng = RngStream::new(4, "same");
    let a = random_tensor(&mut rng, 5, 3);
    let mask = Mask::full(5, 3);
    let total = loss_contrastive(&[a.clone(), a.clone(), a.clone()], &mask, 1.0).unwrap();
    let p = oracle::joint(&rows_of(&a), &rows_of(&a));
    for d in 0..3 {
        for e in 0..3 {
            assert!((p[d][e] - p[e][d]).abs() < 1e-15);
        }
    }
    let want = 6.0 * oracle::contrastive(&p, 1.0);
    assert!((total - want).abs() < 1e-10);
}

#[test]
fn pairs_without_joint_subjects_contribute_nothing() {
    let mut rng = RngStream::new(5, "empty");
    let z: Vec<Tensor> = (0..3).map(|_| random_tensor(&mut rng, 4, 3)).collect();
    // Views 0 and 2 are never observed together.
    let mask = Mask::from_rows(&[
        [true, true, false],
        [true, true, false],
        [false, true, true],
        [false, true, true],
    ])
    .unwrap();
    let total = loss_contrastive(&z, &mask, 9.0).unwrap();
    let pair = |i: usize, k: usize, rows: &[usize]| {
        let p = joint_distribution(&z[i].gather_rows(rows), &z[k].gather_rows(rows)).unwrap();
        loss_contrastive_pair(&p, 9.0).unwrap()
    };
    let want = 2.0 * pair(0, 1, &[0, 1]) + 2.0 * pair(1, 2, &[2, 3]);
    assert!((total - want).abs() < 1e-10);
}

fn tiny_model(m: usize, d: usize, seed: u64) -> Model {
    let mut cfg = ModelConfig::desk(&vec![4; m], 2);
    cfg.embed_dims = vec![d; m];
    cfg.ae_hidden = [5, 3];
    let mut model = Model::new(cfg, seed).unwrap();
    // Train-mode passes move the running statistics away from their
    // initial values so eval-mode batch norm is exercised.
    let mut rng = RngStream::new(seed, "stats");
    for k in 0..m {
        let z = random_tensor(&mut rng, 8, d).map(|v| 2.0 * v + 1.0);
        model.cross_predict(&z, k, (k + 1) % m, Mode::Train).unwrap();
    }
    model
}

#[test]
fn cross_omics_matches_triple_loop() {
    for seed in 0..5 {
        let (n, m, d) = (4, 3, 3);
        let mut model = tiny_model(m, d, seed);
        let mut rng = RngStream::new(seed, "latents");
        let z: Vec<Tensor> = (0..m).map(|_| random_tensor(&mut rng, n, d)).collect();
        let mask = Mask::from_rows(&[
            [true, true, true],
            [true, false, true],
            [false, true, true],
            [true, true, false],
        ])
        .unwrap();
        let got = model.loss_cross_omics(&z, &mask, Mode::Eval).unwrap();
        let mut want = 0.0;
        for j in 0..n {
            for i in 0..m {
                for k in 0..m {
                    if i == k || !mask.observed(j, i) || !mask.observed(j, k) {
                        continue;
                    }
                    let zk = z[k].gather_rows(&[j]);
                    let h = model.cross_predict(&zk, k, i, Mode::Eval).unwrap();
                    want += oracle::squared_distance(h.row(0), z[i].row(j));
                }
            }
        }
        assert!((got - want).abs() < 1e-10, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn two_view_cross_omics_is_both_directions() {
    let mut model = tiny_model(2, 3, 7);
    let mut rng = RngStream::new(7, "two-view");
    let z1 = random_tensor(&mut rng, 5, 3);
    let z2 = random_tensor(&mut rng, 5, 3);
    let mask = Mask::full(5, 2);
    for mode in [Mode::Eval, Mode::Train] {
        let got = model
            .loss_cross_omics(&[z1.clone(), z2.clone()], &mask, mode)
            .unwrap();
        let h12 = model.cross_predict(&z2, 1, 0, mode).unwrap();
        let h21 = model.cross_predict(&z1, 0, 1, mode).unwrap();
        let want = (0..5)
            .map(|j| {
                oracle::squared_distance(h12.row(j), z1.row(j))
                    + oracle::squared_distance(h21.row(j), z2.row(j))
            })
            .sum::<f64>();
        assert_eq!(got, want, "{mode:?}");
    }
}

#[test]
fn classification_examples() {
    let uniform = Tensor::filled(4, 3, 1.0 / 3.0);
    let v = loss_classification(&uniform, &[0, 1, 2, 0], Reduction::Mean).unwrap();
    assert!((v - 3f64.ln()).abs() < 1e-15);
    let one_hot = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
    assert!(loss_classification(&one_hot, &[0, 1], Reduction::Mean).unwrap() < 1e-11);
    let probs = Tensor::from_rows(&[[0.7, 0.3], [0.2, 0.8], [0.5, 0.5]]);
    let v = loss_classification(&probs, &[0, 1, 0], Reduction::Mean).unwrap();
    let want = -(0.7f64.ln() + 0.8f64.ln() + 0.5f64.ln()) / 3.0;
    assert!((v - want).abs() < 1e-15);
    let s = loss_classification(&probs, &[0, 1, 0], Reduction::PaperSum).unwrap();
    assert!((s - 3.0 * want).abs() < 1e-14);
}

#[test]
fn auxiliary_examples() {
    let mask = Mask::full(2, 2);
    let matt = vec![Tensor::filled(2, 1, 0.5); 2];
    let yhat = vec![Tensor::filled(2, 2, 0.5); 2];
    let v = loss_auxiliary(&matt, &yhat, &[0, 0], &mask, Reduction::Mean).unwrap();
    assert!((v - 2.0 * 2f64.ln()).abs() < 1e-15);
    let confident = vec![Tensor::filled(2, 1, 1.0); 2];
    let exact = vec![Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]); 2];
    let v = loss_auxiliary(&confident, &exact, &[0, 1], &mask, Reduction::Mean).unwrap();
    assert!(v < 1e-11);
}

#[test]
fn auxiliary_matches_loop_oracle() {
    let mut rng = RngStream::new(8, "aux");
    let (n, m, c) = (6, 3, 3);
    let mask = Mask::from_rows(&[
        [true, true, true],
        [true, false, false],
        [false, true, true],
        [true, true, false],
        [false, false, true],
        [true, true, true],
    ])
    .unwrap();
    let labels: Vec<usize> = (0..n).map(|j| j % c).collect();
    let matt: Vec<Tensor> = (0..m).map(|_| Tensor::from_fn(n, 1, |_, _| rng.uniform())).collect();
    let yhat: Vec<Tensor> = (0..m)
        .map(|_| {
            let raw = random_tensor(&mut rng, n, c);
            Tensor::from_rows(&rows_of(&raw).iter().map(|r| oracle::softmax(r)).collect::<Vec<_>>())
        })
        .collect();
    for reduction in [Reduction::Mean, Reduction::PaperSum] {
        let got = loss_auxiliary(&matt, &yhat, &labels, &mask, reduction).unwrap();
        let mut want = 0.0;
        for i in 0..m {
            let rows = mask.observed_subjects(i);
            let mut s = 0.0;
            for &j in &rows {
                let conf = yhat[i].row(j).iter().cloned().fold(f64::MIN, f64::max);
                s += (matt[i].get(j, 0) - conf).powi(2) - oracle::ln_clamped(yhat[i].get(j, labels[j]));
            }
            want += match reduction {
                Reduction::Mean => s / rows.len() as f64,
                Reduction::PaperSum => s,
            };
        }
        assert!((got - want).abs() < 1e-12, "{reduction:?}");
    }
}

#[test]
fn total_loss_examples() {
    let b = total_loss(1.0, 2.0, 3.0, 4.0, &LossWeights::new(0.1, 1.0, 0.01)).unwrap();
    assert!((b.total - 4.24).abs() < 1e-12);
    let b = total_loss(0.7, 2.0, 3.0, 4.0, &LossWeights::zero()).unwrap();
    assert_eq!(b.total, 0.7);
    let err = total_loss(1.0, f64::NAN, 0.0, 0.0, &LossWeights::default()).unwrap_err();
    assert!(err.to_string().contains("l_al"));
}
