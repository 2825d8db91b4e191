// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use pvil_core::datasets::{generate, make_split, preprocess, read_dataset, write_dataset, PreprocessMode};
use pvil_core::embed::DrMethod;
use pvil_core::labelprop::{run_label_propagation, LpParams};
use pvil_core::logistic::{train_logistic, LogisticParams};
use pvil_core::metrics::{accuracy, f1_report, f1_report_hard};

fn record_bytes(ds: &pvil_core::datasets::Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, ds).unwrap();
    buf
}

#[test]
fn dataset_records_round_trip_at_f32_precision() {
    let ds = generate("x_shape", 300, None, 5).unwrap();
    let bytes = record_bytes(&ds);
    let back = read_dataset(&mut bytes.as_slice()).unwrap();
    assert_eq!((back.name.as_str(), back.len(), back.dims()), (ds.name.as_str(), ds.len(), ds.dims()));
    assert_eq!(back.truth, ds.truth);
    assert_eq!(back.provenance, ds.provenance);
    for (a, b) in back.samples.as_slice().iter().zip(ds.samples.as_slice()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    assert_eq!(record_bytes(&back), bytes);
    assert!(read_dataset(&mut &bytes[..bytes.len() - 1]).is_err());
    assert!(read_dataset(&mut &b"PVDX"[..]).is_err());
}

#[test]
fn label_propagation_recovers_two_moons_from_few_seeds() {
    let ds = generate("two_moons", 400, None, 2).unwrap();
    let split = make_split(&ds, 0.9, 7).unwrap();
    let seeds: Vec<usize> = split.labeled.iter().map(|&i| ds.truth[i]).collect();
    let (hard, soft) = run_label_propagation(&ds.samples, &split, &seeds, 2, &LpParams::default()).unwrap();
    assert!(soft.converged);
    assert_eq!(hard.unreached, 0);
    for (&i, &c) in split.labeled.iter().zip(&seeds) {
        assert_eq!(hard.labels[i], c);
    }
    let report = f1_report_hard(&hard.labels, &ds.truth).unwrap();
    assert!(report.macro_f1 > 0.95, "{}", report.macro_f1);
    let (again, _) = run_label_propagation(&ds.samples, &split, &seeds, 2, &LpParams::default()).unwrap();
    assert_eq!(again, hard);
}

#[test]
fn pca_view_then_logistic_on_the_four_class_data() {
    let ds = preprocess(&generate("four_gaussians", 400, None, 1).unwrap(), PreprocessMode::Zscore).unwrap();
    let view = DrMethod::Pca.reduce(&ds.samples, (0..ds.len()).collect()).unwrap();
    assert_eq!((view.coords.rows(), view.coords.cols()), (400, 2));
    assert_eq!(view.scope(), (0..400).collect::<Vec<usize>>().as_slice());
    assert_eq!(view.lineage.len(), 1);
    assert_eq!(view.lineage[0].method, "pca");

    let model = train_logistic(&ds.samples, &ds.truth, &LogisticParams::default()).unwrap();
    let predicted = model.classify(&ds.samples).unwrap();
    assert_eq!(predicted, model.classify(&ds.samples).unwrap());
    let acc = accuracy(&predicted, &ds.truth).unwrap();
    assert!(acc > 0.95, "{acc}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn splits_are_seeded_sorted_and_sized(n in 8usize..300, r in 0.0f64..0.97, seed in 0u64..1000) {
        let ds = generate("two_moons", n, None, 0).unwrap();
        let budget = ((1.0 - r) * n as f64).round() as usize;
        prop_assume!(budget > 0);
        let split = make_split(&ds, r, seed).unwrap();
        prop_assert_eq!(split.labeled.len(), budget.min(n));
        prop_assert!(split.labeled.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(split.labeled.iter().all(|&i| i < n));
        if budget >= 2 {
            for c in 0..2 {
                prop_assert!(split.labeled.iter().any(|&i| ds.truth[i] == c));
            }
        }
        prop_assert_eq!(make_split(&ds, r, seed).unwrap(), split);
    }

    #[test]
    fn propagated_scores_stay_nonnegative_and_finite(seed in 0u64..200, k in 4usize..12) {
        let ds = generate("x_shape", 120, None, seed).unwrap();
        let split = make_split(&ds, 0.9, seed).unwrap();
        let seeds: Vec<usize> = split.labeled.iter().map(|&i| ds.truth[i]).collect();
        let params = LpParams { k, ..LpParams::default() };
        let (hard, soft) = run_label_propagation(&ds.samples, &split, &seeds, ds.num_classes(), &params).unwrap();
        prop_assert!(soft.f.as_slice().iter().all(|&v| v.is_finite() && v >= 0.0));
        prop_assert!(soft.step_norms.last().is_some_and(|&s| !soft.converged || s < params.epsilon));
        let report = f1_report(&hard.labels.iter().map(|&c| Some(c)).collect::<Vec<_>>(), &ds.truth).unwrap();
        prop_assert_eq!(report.total(), ds.len());
        prop_assert!((0.0..=1.0).contains(&report.macro_f1));
    }
}
