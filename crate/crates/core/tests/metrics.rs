use illicit_walk::evaluation::{accuracy, f1_score};
use illicit_walk::{
    confusion, fit, micro_f1, permutation_importance, precision_recall_f1, recall_at_fpr,
    roc_and_auc, tp_diff, ForestConfig, Matrix,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn micro_f1_equals_accuracy(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..300)) {
        let (labels, preds): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        prop_assert_eq!(micro_f1(&labels, &preds).unwrap(), accuracy(&labels, &preds).unwrap());
    }

    #[test]
    fn f1_is_harmonic_mean(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..300)) {
        let (labels, preds): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let cm = confusion(&labels, &preds).unwrap();
        prop_assert_eq!(cm.total(), labels.len() as u64);
        let pr = precision_recall_f1(&cm);
        let (p, r) = (pr.precision, pr.recall);
        let expected = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        prop_assert!((pr.f1 - expected).abs() <= 1e-12);
    }

    #[test]
    fn auc_invariant_under_increasing_transform(
        data in prop::collection::vec((0u8..2, 0.0f64..1.0), 2..200)
    ) {
        let (labels, scores): (Vec<u8>, Vec<f64>) = data.into_iter().unzip();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let a = roc_and_auc(&labels, &scores).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        let b = roc_and_auc(&labels, &transformed).unwrap();
        prop_assert!((a.auc - b.auc).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.auc));
        for w in a.points.windows(2) {
            prop_assert!(w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr);
        }
        let last = a.points.last().unwrap();
        prop_assert_eq!((a.points[0].fpr, a.points[0].tpr, last.fpr, last.tpr), (0.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn recall_at_fpr_is_monotone(data in prop::collection::vec((0u8..2, 0.0f64..1.0), 2..200)) {
        let (labels, scores): (Vec<u8>, Vec<f64>) = data.into_iter().unzip();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let mut last = 0.0;
        for cap in [0.01, 0.05, 0.1, 0.2, 0.5, 0.9, 0.99] {
            let r = recall_at_fpr(&labels, &scores, cap).unwrap();
            prop_assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn tp_gained_and_lost_disjoint(rows in prop::collection::vec((0u8..2, 0u8..2, 0u8..2), 0..200)) {
        let labels: Vec<u8> = rows.iter().map(|r| r.0).collect();
        let a: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let b: Vec<u8> = rows.iter().map(|r| r.2).collect();
        let d = tp_diff(&labels, &a, &b).unwrap();
        prop_assert!(d.gained.iter().all(|i| !d.lost.contains(i)));
        let tp = |p: &[u8]| confusion(&labels, p).unwrap().tp as i64;
        prop_assert_eq!(tp(&b) - tp(&a), d.gained.len() as i64 - d.lost.len() as i64);
    }
}

#[test]
fn table_row_f1_values() {
    assert!((f1_score(0.91, 0.72) - 0.8039).abs() < 1e-4);
    assert!((f1_score(0.93, 0.11) - 0.1967).abs() < 1e-4);
}

#[test]
fn random_scores_give_half_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let labels: Vec<u8> = (0..10_000).map(|_| u8::from(rng.gen_bool(0.5))).collect();
    let scores: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
    let auc = roc_and_auc(&labels, &scores).unwrap().auc;
    assert!((auc - 0.5).abs() <= 0.02, "{auc}");
}

/// Column 0 copies the label, column 1 is constant, column 2 is noise.
fn importance_data(n: usize) -> (Matrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.3))).collect();
    let rows: Vec<[f64; 3]> = y
        .iter()
        .map(|&l| [f64::from(l), 4.0, rng.gen::<f64>()])
        .collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn importance_of_label_copy_constant_and_unused() {
    let (x, y) = importance_data(400);
    let model = fit(
        &x,
        &y,
        &ForestConfig {
            n_trees: 20,
            ..Default::default()
        },
    )
    .unwrap();
    let names: Vec<String> = ["copy", "constant", "noise"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let report = permutation_importance(&model, &x, &y, &[0, 1, 2], &names, 5, 1, 0.5).unwrap();
    let by_name = |n: &str| report.features.iter().find(|f| f.name == n).unwrap();
    assert_eq!(report.baseline_f1, 1.0);
    assert!(by_name("copy").mean_f1_drop > 0.5 * report.baseline_f1);
    assert_eq!(by_name("constant").mean_f1_drop, 0.0);
    assert_eq!(by_name("constant").std_over_repeats, 0.0);
    assert_eq!(report.features[0].name, "copy");
    assert_eq!(report.selected.first().map(String::as_str), Some("copy"));
    assert!(!model.uses_feature(1));
    for f in &report.features {
        if !model.uses_feature(f.column) {
            assert_eq!(f.mean_f1_drop, 0.0, "{}", f.name);
        }
    }
    let again = permutation_importance(&model, &x, &y, &[0, 1, 2], &names, 5, 1, 0.5).unwrap();
    assert_eq!(report, again);
    assert!(permutation_importance(&model, &x, &y, &[0], &names[..1], 0, 1, 0.5).is_err());
}
