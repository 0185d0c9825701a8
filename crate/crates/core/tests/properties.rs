use clclsa_core::data::{
    apply_missingness, split_indices, synth_generate, MissingnessSpec, MultiOmicsDataset, SplitSpec,
    SyntheticSpec,
};
use clclsa_core::eval::{accuracy, aggregate, MetricsReport, TrialRecord};
use clclsa_core::model::{joint_distribution, loss_contrastive_pair, LossWeights};
use clclsa_core::numerics::{softmax_rows, Tensor};
use proptest::prelude::*;

fn full_dataset(n: usize, m: usize) -> MultiOmicsDataset {
    let views = (0..m).map(|i| Tensor::from_fn(n, 2, |j, c| (j * 3 + c + i) as f64)).collect();
    MultiOmicsDataset::new(views, vec![0; n], 1).unwrap()
}

fn tensor(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-5.0f64..5.0, rows * cols)
        .prop_map(move |v| Tensor::from_vec(rows, cols, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn missingness_hits_the_rate(n in 1usize..120, m in 2usize..5, eta in 0.0f64..=1.0, seed in any::<u64>()) {
        let ds = full_dataset(n, m);
        let out = apply_missingness(&ds, &MissingnessSpec::new(eta, seed)).unwrap();
        let mask = out.mask();
        let want = (eta * n as f64).round() as usize;
        prop_assert_eq!(mask.incomplete_count(), want);
        prop_assert!((out.missing_rate() - eta).abs() <= 0.5 / n as f64 + 1e-12);
        for j in 0..n {
            let k = mask.observed_count(j);
            prop_assert!(k >= 1 && k <= m);
        }
        prop_assert_eq!(out.views(), ds.views());
        let again = apply_missingness(&ds, &MissingnessSpec::new(eta, seed)).unwrap();
        prop_assert_eq!(again.mask(), mask);
    }

    #[test]
    fn split_partitions(per_class in prop::collection::vec(2usize..20, 1..5), frac in 0.1f64..0.9, seed in any::<u64>(), stratified in any::<bool>()) {
        let mut labels = Vec::new();
        for (c, &k) in per_class.iter().enumerate() {
            labels.extend(std::iter::repeat(c).take(k));
        }
        let n = labels.len();
        let spec = SplitSpec { train_fraction: frac, seed, stratified };
        let (train, test) = split_indices(&labels, per_class.len(), &spec).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!((train.len() as f64 - frac * n as f64).abs() <= 1.0 + 1e-9);
        if stratified {
            for (c, &k) in per_class.iter().enumerate() {
                let in_train = train.iter().filter(|&&j| labels[j] == c).count();
                prop_assert!((in_train as f64 - frac * k as f64).abs() <= 1.0 + 1e-9);
            }
        }
        prop_assert_eq!(split_indices(&labels, per_class.len(), &spec).unwrap(), (train, test));
    }

    #[test]
    fn accuracy_ignores_relabeling(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60), shift in 1usize..4) {
        let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let relabel = |v: &[usize]| v.iter().map(|&y| (y + shift) % 4).collect::<Vec<_>>();
        prop_assert_eq!(accuracy(&pred, &truth).unwrap(), accuracy(&relabel(&pred), &relabel(&truth)).unwrap());
    }

    #[test]
    fn softmax_rows_normalize_and_shift(x in tensor(4, 5), c in -50.0f64..50.0) {
        let s = softmax_rows(&x);
        for r in 0..4 {
            prop_assert!((s.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert!(softmax_rows(&x.map(|v| v + c)).max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn joint_is_a_distribution(a in tensor(5, 3), b in tensor(5, 3)) {
        let p = joint_distribution(&a, &b).unwrap();
        prop_assert!((p.sum() - 1.0).abs() < 1e-12);
        prop_assert!(p.data().iter().all(|&v| v >= 0.0));
        prop_assert_eq!(joint_distribution(&b, &a).unwrap(), p.transpose());
    }

    #[test]
    fn contrastive_is_transpose_symmetric(a in tensor(6, 4), b in tensor(6, 4), alpha in 0.0f64..10.0) {
        let p = joint_distribution(&a, &b).unwrap();
        let x = loss_contrastive_pair(&p, alpha).unwrap();
        let y = loss_contrastive_pair(&p.transpose(), alpha).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn aggregates_match_recomputation(accs in prop::collection::vec(0.0f64..=1.0, 1..12)) {
        let trials: Vec<TrialRecord> = accs
            .iter()
            .enumerate()
            .map(|(i, &a)| TrialRecord {
                dataset: "d".into(),
                variant: "clclsa".into(),
                eta: 0.2,
                seed: i as u64,
                weights: LossWeights::default(),
                report: Some(MetricsReport {
                    acc: a,
                    f1: Some(1.0 - a),
                    auc: None,
                    weighted_f1: a / 2.0,
                    macro_f1: a / 3.0,
                    confusion: vec![],
                    n_subjects: 10,
                }),
                status: "ok".into(),
            })
            .collect();
        let agg = aggregate(&trials).unwrap();
        let n = accs.len() as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let std = if accs.len() < 2 {
            0.0
        } else {
            (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        prop_assert!((agg.mean.acc - mean).abs() < 1e-12);
        prop_assert!((agg.std.acc - std).abs() < 1e-12);
        prop_assert!((agg.mean.f1.unwrap() - (1.0 - mean)).abs() < 1e-12);
        prop_assert_eq!(agg.mean.auc, None);
        prop_assert_eq!(agg.count, accs.len());
    }
}

#[test]
fn retained_view_counts_are_uniform() {
    let n = 6000;
    let ds = full_dataset(n, 4);
    let out = apply_missingness(&ds, &MissingnessSpec::new(1.0, 11)).unwrap();
    let mut counts = [0usize; 4];
    let mut per_view = [0usize; 4];
    for j in 0..n {
        counts[out.mask().observed_count(j)] += 1;
        for (v, c) in per_view.iter_mut().enumerate() {
            *c += out.mask().observed(j, v) as usize;
        }
    }
    for k in 1..4 {
        let share = counts[k] as f64 / n as f64;
        assert!((share - 1.0 / 3.0).abs() < 0.03, "{counts:?}");
    }
    // Every view is equally likely to be kept: E[kept] = 2 of 4.
    for c in per_view {
        assert!((c as f64 / n as f64 - 0.5).abs() < 0.03, "{per_view:?}");
    }
}

#[test]
fn nearest_centroid_separates_noise_free_views() {
    let spec = SyntheticSpec {
        subjects: 200,
        snr: 1e6,
        seed: 12,
        ..SyntheticSpec::default()
    };
    let ds = synth_generate(&spec).unwrap();
    let x: Vec<Vec<f64>> = (0..200)
        .map(|j| ds.views().iter().flat_map(|v| v.row(j).to_vec()).collect())
        .collect();
    let c = ds.num_classes();
    let dim = x[0].len();
    let mut centroids = vec![vec![0.0; dim]; c];
    let counts = ds.class_counts();
    for (row, &y) in x.iter().zip(ds.labels()) {
        for (m, v) in centroids[y].iter_mut().zip(row) {
            *m += v / counts[y] as f64;
        }
    }
    let pred: Vec<usize> = x
        .iter()
        .map(|row| {
            (0..c)
                .min_by(|&a, &b| {
                    let d = |k: usize| -> f64 {
                        row.iter().zip(&centroids[k]).map(|(p, q)| (p - q) * (p - q)).sum()
                    };
                    d(a).total_cmp(&d(b))
                })
                .unwrap()
        })
        .collect();
    assert!(accuracy(&pred, ds.labels()).unwrap() >= 0.99);
}
