//! Distributional checks on the mixing-coefficient sampler and the noise
//! injectors, against closed forms and an independent quadrature oracle.

use conflab_core::rng::seeded_stream;
use conflab_core::*;

mod quadrature;

fn draws(mix_alpha: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded_stream(seed, 0);
    (0..n)
        .map(|_| sample_lambda(mix_alpha, &mut rng).unwrap())
        .collect()
}

/// One-sample Kolmogorov-Smirnov statistic against the uniform CDF.
fn ks_vs_uniform(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((x - lo).abs()).max((hi - x).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len() as f64, b.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

#[test]
fn beta_one_one_is_uniform() {
    let mut xs = draws(1.0, 100_000, 1);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    assert!((mean - 0.5).abs() <= 0.01, "mean {mean}");
    let d = ks_vs_uniform(&mut xs);
    assert!(d <= 0.01, "KS statistic {d}");
}

#[test]
fn lambda_is_symmetric_about_half() {
    for &alpha in &[0.2, 1.0, 3.0] {
        let xs = draws(alpha, 100_000, 2);
        let mut a = xs.clone();
        let mut b: Vec<f64> = xs.iter().map(|x| 1.0 - x).collect();
        let d = ks_two_sample(&mut a, &mut b);
        assert!(d <= 0.01, "alpha {alpha}: KS statistic {d}");
    }
}

#[test]
fn tail_mass_matches_quadrature_oracle() {
    let (alpha, gamma) = (0.2, 0.1);
    let xs = draws(alpha, 100_000, 3);
    let outside = xs
        .iter()
        .filter(|&&x| !(gamma..=(1.0 - gamma)).contains(&x))
        .count() as f64
        / xs.len() as f64;
    let expected = quadrature::beta_tail_mass(alpha, gamma);
    assert!(
        (outside - expected).abs() <= 0.01,
        "empirical {outside:.4} vs quadrature {expected:.4}"
    );
}

#[test]
fn random_all_labels_leave_one_over_c_correct() {
    let ds = make_gaussian_mixture(10, 3, &[2_000; 10], 5.0, 1.0, 4, SplitTag::Train).unwrap();
    let noisy = inject_noise(
        &ds,
        &NoiseSpec {
            kind: NoiseKind::RandomAll,
            rate: 1.0,
            seed: 5,
        },
    )
    .unwrap();
    let correct = noisy
        .labels
        .iter()
        .zip(noisy.clean_labels.as_ref().unwrap())
        .filter(|(a, b)| a == b)
        .count() as f64
        / noisy.len() as f64;
    assert!((correct - 0.1).abs() <= 0.01, "correct fraction {correct}");
}

#[test]
fn uniform_noise_correct_fraction_matches_expectation() {
    // rate 0.8 over 10 classes: expected correct fraction 1 - 0.8 * 9/10 = 0.28
    let ds = make_gaussian_mixture(10, 3, &[5_000; 10], 5.0, 1.0, 6, SplitTag::Train).unwrap();
    let noisy = inject_noise(
        &ds,
        &NoiseSpec {
            kind: NoiseKind::Uniform,
            rate: 0.8,
            seed: 7,
        },
    )
    .unwrap();
    let correct = noisy
        .labels
        .iter()
        .zip(noisy.clean_labels.as_ref().unwrap())
        .filter(|(a, b)| a == b)
        .count() as f64
        / noisy.len() as f64;
    assert!((correct - 0.28).abs() <= 0.01, "correct fraction {correct}");
}

#[test]
fn uniform_noise_flips_spread_evenly_over_wrong_classes() {
    // Chi-square over flip targets conditioned on an actual flip; 10 classes
    // leaves 9 wrong targets, df = 8, critical value 26.12 at alpha = 0.001.
    let c = 10;
    let ds = make_gaussian_mixture(c, 3, &[3_000; 10], 5.0, 1.0, 8, SplitTag::Train).unwrap();
    let noisy = inject_noise(
        &ds,
        &NoiseSpec {
            kind: NoiseKind::Uniform,
            rate: 0.5,
            seed: 9,
        },
    )
    .unwrap();
    let clean = noisy.clean_labels.as_ref().unwrap();
    // Count flips by (wrong slot relative to the clean label).
    let mut counts = vec![0usize; c - 1];
    let mut flips = 0usize;
    for (&label, &truth) in noisy.labels.iter().zip(clean) {
        if label != truth {
            // Index wrong classes by their offset from the clean label.
            let slot = (label + c - truth) % c - 1;
            counts[slot] += 1;
            flips += 1;
        }
    }
    assert!(flips >= 10_000, "need at least 10^4 flips, got {flips}");
    let expected = flips as f64 / (c - 1) as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    assert!(chi2 <= 26.12, "chi-square {chi2:.2} over counts {counts:?}");
}

#[test]
fn tiny_alpha_concentrates_lambda_at_the_endpoints() {
    // Beta(a, a) approaches Bernoulli(0.5) as a -> 0: almost every draw sits
    // next to 0 or 1, and the two endpoints are hit about equally often.
    let xs = draws(0.005, 20_000, 10);
    let interior = xs.iter().filter(|&&x| (0.01..=0.99).contains(&x)).count();
    assert!(
        (interior as f64) < 0.05 * xs.len() as f64,
        "{interior} draws in the interior"
    );
    let high = xs.iter().filter(|&&x| x > 0.5).count() as f64 / xs.len() as f64;
    assert!((high - 0.5).abs() < 0.02, "high fraction {high}");
}
