//! Aggregate properties of the PGD attack on a trained benchmark model.

use unlearn_core::attacks::{generate_adversarial_set, AttackConfig};
use unlearn_core::data::{select_forget, split_by_group, synth_generate, SplitSpec, SynthSpec};
use unlearn_core::model::{cross_entropy, train_classifier, Classifier};
use unlearn_core::rng::child_seed;

fn trained_benchmark() -> (Classifier, unlearn_core::data::LabeledDataset) {
    let spec = SynthSpec {
        seed: child_seed(0, "data"),
        ..SynthSpec::default()
    };
    let ds = synth_generate(&spec).unwrap();
    let split = SplitSpec {
        seed: child_seed(0, "split"),
        ..SplitSpec::default()
    };
    let (train, _val, _test) = split_by_group(&ds, &split).unwrap();
    let mut model = Classifier::new(
        spec.feature_dim,
        &[64, 64],
        spec.class_count,
        child_seed(0, "init"),
    )
    .unwrap();
    train_classifier(&mut model, &train, 8, 16, 1e-3, child_seed(0, "shuffle")).unwrap();
    (model, train)
}

#[test]
fn linf_containment_over_the_tau_grid() {
    let (model, train) = trained_benchmark();
    let (forget, _) = select_forget(&train, 125, 5).unwrap();
    let mut checked = 0usize;
    for (i, tau) in [0.1, 0.3, 0.5, 0.7].iter().enumerate() {
        let cfg = AttackConfig::new(*tau, 10, 20, 100 + i as u64);
        let set = generate_adversarial_set(&model, &forget, &cfg).unwrap();
        for adv in &set {
            let source = &forget.samples()[adv.source_index];
            let linf = adv
                .features
                .iter()
                .zip(&source.features)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(linf <= tau + 1e-9, "tau {tau}: linf {linf}");
            checked += 1;
        }
    }
    assert!(checked >= 10_000, "only {checked} samples checked");
}

#[test]
fn attack_reduces_cross_entropy_toward_target_in_aggregate() {
    let (model, train) = trained_benchmark();
    let (forget, _) = select_forget(&train, 10, 6).unwrap();
    let cfg = AttackConfig::new(0.5, 50, 10, 42);
    let set = generate_adversarial_set(&model, &forget, &cfg).unwrap();
    assert!(set.len() >= 100);

    // compare against the loss at the attack's own starting point: the
    // initial perturbation drawn from the same per-replica stream
    let mut before = 0.0;
    let mut after = 0.0;
    for adv in &set {
        let source = &forget.samples()[adv.source_index];
        let mut rng = unlearn_core::rng::rng_from(unlearn_core::rng::stream_seed(
            cfg.seed,
            adv.source_index as u64,
            adv.replica_index as u64,
        ));
        // replay the stream: first the target draw, then the noise
        let target =
            unlearn_core::attacks::draw_wrong_label(&mut rng, source.label, 7).unwrap();
        assert_eq!(target, adv.target_label);
        let start = unlearn_core::attacks::init_perturbation(&source.features, cfg.tau, &mut rng);
        before += cross_entropy(&model.forward(&start).unwrap(), target).unwrap();
        after += cross_entropy(&model.forward(&adv.features).unwrap(), target).unwrap();
    }
    let n = set.len() as f64;
    assert!(
        after / n <= before / n,
        "mean CE toward target rose: {} -> {}",
        before / n,
        after / n
    );
}

#[test]
fn sequential_and_default_paths_agree_bitwise() {
    // the parallel feature maps then folds in fixed order, so outputs are
    // identical to a hand-rolled sequential loop over the same streams
    let (model, train) = trained_benchmark();
    let (forget, _) = select_forget(&train, 5, 9).unwrap();
    let cfg = AttackConfig::new(0.4, 6, 4, 17);
    let set = generate_adversarial_set(&model, &forget, &cfg).unwrap();

    let mut sequential = Vec::new();
    for i in 0..forget.len() {
        for j in 1..=cfg.per_sample_count {
            let source = &forget.samples()[i];
            let mut rng = unlearn_core::rng::rng_from(unlearn_core::rng::stream_seed(
                cfg.seed, i as u64, j as u64,
            ));
            let target =
                unlearn_core::attacks::draw_wrong_label(&mut rng, source.label, 7).unwrap();
            let features =
                unlearn_core::attacks::pgd_attack(&model, &source.features, target, &cfg, &mut rng)
                    .unwrap();
            sequential.push((features, target, i, j));
        }
    }
    assert_eq!(set.len(), sequential.len());
    for (got, (features, target, i, j)) in set.iter().zip(&sequential) {
        assert_eq!(&got.features, features);
        assert_eq!(got.target_label, *target);
        assert_eq!(got.source_index, *i);
        assert_eq!(got.replica_index, *j);
    }
}
