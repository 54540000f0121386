//! End-to-end training behavior at desk scale: separable data is learned,
//! the loss descends under repeated SGD steps, mixup refuses to memorize
//! random labels, and the calibration metric recognizes a calibrated model.

use conflab_core::nn::{weighted_soft_ce, Batch, Network};
use conflab_core::rng::seeded_stream;
use conflab_core::*;
use rand::Rng;

#[test]
fn plain_ce_solves_a_separable_mixture() {
    let train = make_gaussian_mixture(2, 8, &[100, 100], 10.0, 1.0, 1, SplitTag::Train).unwrap();
    let test = make_gaussian_mixture(2, 8, &[100, 100], 10.0, 1.0, 1, SplitTag::Test).unwrap();
    let cfg = TrainConfig {
        total_epochs: 50,
        start_epoch: 50,
        learning_rate: 0.02,
        method: Method::Ce,
        hidden_sizes: vec![16],
        seed: 4,
        ..TrainConfig::default()
    };
    let (net, record) = run_ce(&cfg, &train, &test).unwrap();
    assert!(record.last().unwrap().test_acc >= 0.99);
    // Fully fit: the memorizer scores 1.0 against its own training labels.
    assert_eq!(record.last().unwrap().train_acc_noisy, 1.0);
    assert!(
        (accuracy(&net, &test, LabelSet::Clean).unwrap() - record.last().unwrap().test_acc).abs()
            < 1e-12
    );
}

#[test]
fn repeated_sgd_steps_drive_the_loss_below_threshold() {
    let mut rng = seeded_stream(0x10, 0);
    let mut net = Network::with_rng(3, &[8], 2, &mut rng).unwrap();
    let inputs = Mat::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
    let mut labels = Mat::zeros(4, 2);
    for r in 0..4 {
        labels.set(r, r % 2, 1.0);
    }
    let batch = Batch::new(inputs, labels, vec![1.0, 0.5, 1.0, 0.75], vec![0, 1, 2, 3]).unwrap();

    let mut prev = f64::INFINITY;
    let mut steps = 0;
    loop {
        let probs = net.forward(&batch.inputs).unwrap();
        let loss = weighted_soft_ce(&probs, &batch.soft_labels, &batch.weights).unwrap();
        assert!(
            loss < prev,
            "loss must strictly decrease: {loss} after {prev}"
        );
        if loss < 1e-3 {
            break;
        }
        prev = loss;
        let grads = net.backward(&batch).unwrap();
        net.sgd_step(&grads, 0.5);
        steps += 1;
        assert!(steps < 50_000, "failed to descend below 1e-3");
    }
}

#[test]
fn mixup_stays_near_chance_on_fully_random_labels() {
    // The memorization probe: with random labels over 4 classes, mixup's
    // train accuracy must stay within 5 points of chance instead of climbing
    // toward 100%.
    let train = make_gaussian_mixture(4, 10, &[500; 4], 6.0, 1.0, 17, SplitTag::Train).unwrap();
    let test = make_gaussian_mixture(4, 10, &[500; 4], 6.0, 1.0, 17, SplitTag::Test).unwrap();
    let noisy = inject_noise(
        &train,
        &NoiseSpec {
            kind: NoiseKind::RandomAll,
            rate: 1.0,
            seed: 18,
        },
    )
    .unwrap();
    let cfg = TrainConfig {
        total_epochs: 100,
        start_epoch: 100,
        learning_rate: 0.1,
        weight_decay: 8e-3,
        method: Method::Mixup,
        seed: 19,
        ..TrainConfig::default()
    };
    let (_, record) = run_mixup(&cfg, &noisy, &test).unwrap();
    let train_acc = record.last().unwrap().train_acc_noisy;
    assert!(
        train_acc <= 0.25 + 0.05,
        "mixup memorized random labels: train accuracy {train_acc}"
    );
}

#[test]
fn calibrated_predictor_has_small_ece() {
    // Binary predictor whose stated confidence equals its true hit rate.
    let n = 10_000;
    let mut rng = seeded_stream(0x20, 0);
    let mut probs = Mat::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let conf = rng.random_range(0.5..1.0);
        let pred = usize::from(rng.random::<f64>() < 0.5);
        let hit = rng.random::<f64>() < conf;
        let label = if hit { pred } else { 1 - pred };
        probs.set(i, pred, conf);
        probs.set(i, 1 - pred, 1.0 - conf);
        labels.push(label);
    }
    let ece = expected_calibration_error(&probs, &labels, 10).unwrap();
    assert!(ece <= 0.02, "ECE {ece} for a calibrated predictor");
}

#[test]
fn accuracy_distinguishes_clean_from_noisy_labels() {
    let train = make_gaussian_mixture(2, 8, &[200, 200], 10.0, 1.0, 1, SplitTag::Train).unwrap();
    let noisy = inject_noise(
        &train,
        &NoiseSpec {
            kind: NoiseKind::RandomAll,
            rate: 1.0,
            seed: 24,
        },
    )
    .unwrap();
    let cfg = TrainConfig {
        total_epochs: 50,
        start_epoch: 50,
        learning_rate: 0.02,
        method: Method::Ce,
        hidden_sizes: vec![16],
        seed: 25,
        ..TrainConfig::default()
    };
    // Train on the clean copy, then evaluate the noisy dataset both ways.
    let (net, _) = run_ce(&cfg, &train, &train).unwrap();
    let clean_acc = accuracy(&net, &noisy, LabelSet::Clean).unwrap();
    let noisy_acc = accuracy(&net, &noisy, LabelSet::Noisy).unwrap();
    // Recount directly as an oracle.
    let preds = metrics::predictions(&net, &noisy.features).unwrap();
    let recount_noisy = preds
        .iter()
        .zip(&noisy.labels)
        .filter(|(p, l)| p == l)
        .count() as f64
        / preds.len() as f64;
    assert_eq!(noisy_acc, recount_noisy);
    assert!(clean_acc > 0.99);
    // With two classes, fully random labels agree with good predictions about
    // half the time.
    assert!((noisy_acc - 0.5).abs() < 0.1, "noisy accuracy {noisy_acc}");
    // A dataset without clean labels rejects the clean request.
    let mut stripped = noisy.clone();
    stripped.clean_labels = None;
    assert!(accuracy(&net, &stripped, LabelSet::Clean).is_err());
}
