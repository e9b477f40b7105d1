//! Property tests for structural invariants.

use proptest::prelude::*;
use unlearn_core::data::{save_csv, synth_generate, LabeledDataset, Sample, SynthSpec};
use unlearn_core::metrics::{one_tailed_z_test, uar, ConfusionMatrix};
use unlearn_core::model::Classifier;

proptest! {
    #[test]
    fn flatten_unflatten_roundtrip(
        seed in 0u64..1000,
        input_dim in 1usize..6,
        h1 in 1usize..8,
        class_count in 2usize..6,
    ) {
        let model = Classifier::new(input_dim, &[h1], class_count, seed).unwrap();
        let flat = model.flatten();
        let mut rebuilt = Classifier::new(input_dim, &[h1], class_count, seed + 1).unwrap();
        rebuilt.set_from_flat(&flat).unwrap();
        prop_assert_eq!(rebuilt.flatten(), flat);
    }

    #[test]
    fn forward_is_a_distribution(
        seed in 0u64..1000,
        x in prop::collection::vec(-50.0f64..50.0, 4),
    ) {
        let model = Classifier::new(4, &[5], 3, seed).unwrap();
        let probs = model.forward(&x).unwrap();
        let sum: f64 = probs.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn csv_roundtrip_arbitrary_values(
        rows in prop::collection::vec(
            (prop::collection::vec(prop::num::f64::NORMAL, 3), 0usize..4, 0u32..5),
            1..20,
        )
    ) {
        let samples: Vec<Sample> = rows
            .iter()
            .map(|(f, label, group)| Sample { features: f.clone(), label: *label, group: *group })
            .collect();
        let ds = LabeledDataset::new(samples, 4, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prop.csv");
        save_csv(&ds, &path).unwrap();
        let loaded = unlearn_core::data::load_csv(&path, Some(4)).unwrap();
        prop_assert_eq!(loaded, ds);
    }

    #[test]
    fn zero_pvalue_monotonicity(
        base in 0.05f64..0.5,
        gap1 in 0.0f64..0.2,
        gap2 in 0.2f64..0.45,
        n in 10usize..500,
    ) {
        let small = one_tailed_z_test(base + gap1, base, n, n).unwrap();
        let large = one_tailed_z_test(base + gap2, base, n, n).unwrap();
        prop_assert!(large.p_value <= small.p_value);
    }
}

#[test]
fn uniform_random_predictor_converges_to_chance() {
    use rand::Rng;
    let mut rng = unlearn_core::rng::rng_from(31);
    let c = 7;
    let mut confusion = ConfusionMatrix::new(c);
    for _ in 0..100_000 {
        let truth = rng.random_range(0..c);
        let pred = rng.random_range(0..c);
        confusion.record(truth, pred);
    }
    let u = uar(&confusion).unwrap();
    assert!((u - 1.0 / c as f64).abs() < 0.02, "uar {u}");
}

#[test]
fn balanced_uar_equals_accuracy() {
    // on class-balanced data UAR and plain accuracy coincide
    let spec = SynthSpec {
        group_count: 5,
        samples_per_group_per_class: 3,
        ..SynthSpec::default()
    };
    let ds = synth_generate(&spec).unwrap();
    let model = Classifier::new(16, &[8], 7, 3).unwrap();
    let report = unlearn_core::metrics::evaluate(&model, &ds, "all").unwrap();
    let correct: u64 = (0..7).map(|c| report.confusion.count(c, c)).sum();
    let accuracy = correct as f64 / ds.len() as f64;
    assert!((report.uar - accuracy).abs() < 1e-12);
}
