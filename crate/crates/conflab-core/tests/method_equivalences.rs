//! The documented method degeneracies, checked bit for bit.

use conflab_core::*;

fn datasets(seed: u64) -> (Dataset, Dataset) {
    let train = make_gaussian_mixture(2, 6, &[100, 100], 6.0, 1.0, seed, SplitTag::Train).unwrap();
    let test = make_gaussian_mixture(2, 6, &[50, 50], 6.0, 1.0, seed, SplitTag::Test).unwrap();
    (train, test)
}

fn base_config(method: Method) -> TrainConfig {
    TrainConfig {
        total_epochs: 12,
        start_epoch: 4,
        batch_size: 32,
        learning_rate: 0.1,
        seed: 77,
        method,
        hidden_sizes: vec![16],
        ..TrainConfig::default()
    }
}

#[test]
fn sat_with_unit_momentum_is_plain_ce() {
    let (train, test) = datasets(5);
    let (ce_net, ce_rec) = run_ce(&base_config(Method::Ce), &train, &test).unwrap();
    let cfg = TrainConfig {
        momentum: 1.0,
        ..base_config(Method::Sat)
    };
    let (sat_net, store, sat_rec) = run_sat(&cfg, &train, &test).unwrap();
    assert_eq!(ce_net, sat_net);
    assert_eq!(ce_rec, sat_rec);
    // Labels never moved: every row is still exactly one-hot.
    for i in 0..store.len() {
        assert!(store.row(i).iter().all(|&v| v == 0.0 || v == 1.0));
    }
}

#[test]
fn sat_with_start_epoch_at_total_is_plain_ce() {
    let (train, test) = datasets(6);
    let mut cfg = base_config(Method::Sat);
    cfg.start_epoch = cfg.total_epochs;
    let (sat_net, store, sat_rec) = run_sat(&cfg, &train, &test).unwrap();
    let (ce_net, ce_rec) = run_ce(&base_config(Method::Ce), &train, &test).unwrap();
    assert_eq!(ce_net, sat_net);
    assert_eq!(ce_rec, sat_rec);
    // Gate never opened: the store equals its initial one-hot state.
    for (i, &l) in train.labels.iter().enumerate() {
        let row = store.row(i);
        assert!(row
            .iter()
            .enumerate()
            .all(|(j, &v)| v == f64::from(u8::from(j == l))));
    }
}

#[test]
fn mixup_with_lambda_forced_to_one_is_plain_ce() {
    let (train, test) = datasets(7);
    let hooks = MixHooks {
        force_lambda: Some(1.0),
        ..MixHooks::default()
    };
    let (mix_net, mix_rec) =
        run_mixup_with_hooks(&base_config(Method::Mixup), &train, &test, &hooks).unwrap();
    let (ce_net, ce_rec) = run_ce(&base_config(Method::Ce), &train, &test).unwrap();
    assert_eq!(ce_net, mix_net);
    assert_eq!(ce_rec, mix_rec);
}

#[test]
fn sam_with_closed_gate_and_unit_weights_is_mixup() {
    let (train, test) = datasets(8);
    let hooks = MixHooks {
        close_gate: true,
        force_unit_weights: true,
        ..MixHooks::default()
    };
    let (sam_net, store, sam_rec) =
        run_sam_with_hooks(&base_config(Method::Sam), &train, &test, &hooks).unwrap();
    let (mix_net, mix_rec) = run_mixup(&base_config(Method::Mixup), &train, &test).unwrap();
    assert_eq!(mix_net, sam_net);
    assert_eq!(mix_rec, sam_rec);
    // Closed gate: original soft labels stayed one-hot.
    for i in 0..store.len() {
        assert!(store.row(i).iter().all(|&v| v == 0.0 || v == 1.0));
    }
}

#[test]
fn soft_labels_unchanged_until_start_epoch_passes() {
    // Run exactly start_epoch epochs; the store must still be one-hot.
    let (train, test) = datasets(9);
    let mut cfg = base_config(Method::Sat);
    cfg.total_epochs = cfg.start_epoch;
    let (_, store, _) = run_sat(&cfg, &train, &test).unwrap();
    for (i, &l) in train.labels.iter().enumerate() {
        assert_eq!(store.row(i)[l], 1.0);
        assert_eq!(store.row(i).iter().sum::<f64>(), 1.0);
    }
}

#[test]
fn method_wrappers_reject_mismatched_configs() {
    let (train, test) = datasets(10);
    assert!(run_sat(&base_config(Method::Ce), &train, &test).is_err());
    assert!(run_ce(&base_config(Method::Sat), &train, &test).is_err());
    assert!(run_sam(&base_config(Method::Mixup), &train, &test).is_err());
    assert!(run_mixup(&base_config(Method::Sam), &train, &test).is_err());
}

#[test]
fn simplex_and_weight_bounds_hold_across_a_noisy_sat_run() {
    let (train, test) = datasets(11);
    let noisy = inject_noise(
        &train,
        &NoiseSpec {
            kind: NoiseKind::Uniform,
            rate: 0.4,
            seed: 12,
        },
    )
    .unwrap();
    let cfg = TrainConfig {
        total_epochs: 20,
        start_epoch: 5,
        ..base_config(Method::Sat)
    };
    let (_, store, record) = run_sat(&cfg, &noisy, &test).unwrap();
    let c = store.class_count() as f64;
    for i in 0..store.len() {
        let row = store.row(i);
        assert!(row.iter().all(|&v| v >= 0.0));
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9, "row {i}");
    }
    for e in &record.epochs {
        assert!(e.min_weight >= 1.0 / c - 1e-12);
        assert!(e.mean_weight <= 1.0 + 1e-12);
    }
}

#[test]
fn sam_never_updates_labels_before_start_epoch() {
    let (train, test) = datasets(12);
    let mut cfg = base_config(Method::Sam);
    cfg.start_epoch = cfg.total_epochs;
    let (_, store, _) = run_sam(&cfg, &train, &test).unwrap();
    for (i, &l) in train.labels.iter().enumerate() {
        let row = store.row(i);
        assert!(row
            .iter()
            .enumerate()
            .all(|(j, &v)| v == f64::from(u8::from(j == l))));
    }
}

#[test]
fn sam_weights_stay_in_confidence_bounds() {
    let (train, test) = datasets(13);
    let noisy = inject_noise(
        &train,
        &NoiseSpec {
            kind: NoiseKind::Uniform,
            rate: 0.4,
            seed: 14,
        },
    )
    .unwrap();
    let cfg = TrainConfig {
        total_epochs: 20,
        start_epoch: 5,
        ..base_config(Method::Sam)
    };
    let (_, store, record) = run_sam(&cfg, &noisy, &test).unwrap();
    let c = store.class_count() as f64;
    for e in &record.epochs {
        assert!(e.min_weight >= 1.0 / c - 1e-12);
        assert!(e.mean_weight <= 1.0 + 1e-12);
    }
    for i in 0..store.len() {
        assert!((store.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}
