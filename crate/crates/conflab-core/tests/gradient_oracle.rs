//! Backpropagation checked against central finite differences.
//!
//! The oracle only evaluates the loss through `forward` + `weighted_soft_ce`;
//! it never touches the analytic gradient path.

use conflab_core::nn::{weighted_soft_ce, Batch, Network};
use conflab_core::rng::seeded_stream;
use conflab_core::Mat;
use rand::Rng;

const FD_STEP: f64 = 1e-5;

fn random_simplex_row<R: Rng>(rng: &mut R, classes: usize) -> Vec<f64> {
    // Exponential spacings give a uniform draw on the simplex.
    let mut row: Vec<f64> = (0..classes)
        .map(|_| -(rng.random::<f64>().max(1e-12)).ln())
        .collect();
    let sum: f64 = row.iter().sum();
    for v in &mut row {
        *v /= sum;
    }
    row
}

fn random_instance<R: Rng>(rng: &mut R) -> (Network, Batch) {
    let input_dim = rng.random_range(1..=16);
    let classes = rng.random_range(2..=16);
    let depth = rng.random_range(1..=2);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=16)).collect();
    let batch = rng.random_range(1..=8);

    let net = Network::with_rng(input_dim, &hidden, classes, rng).unwrap();
    let inputs = Mat::from_fn(batch, input_dim, |_, _| rng.random_range(-2.0..2.0));
    let mut labels = Mat::zeros(batch, classes);
    for r in 0..batch {
        labels
            .row_mut(r)
            .copy_from_slice(&random_simplex_row(rng, classes));
    }
    let weights: Vec<f64> = (0..batch).map(|_| rng.random_range(0.05..=1.0)).collect();
    let ids: Vec<usize> = (0..batch).collect();
    (net, Batch::new(inputs, labels, weights, ids).unwrap())
}

fn loss_of(net: &Network, batch: &Batch) -> f64 {
    let probs = net.forward(&batch.inputs).unwrap();
    weighted_soft_ce(&probs, &batch.soft_labels, &batch.weights).unwrap()
}

/// Central differences straddle the ReLU kink whenever a hidden
/// pre-activation sits within the step size of zero, so such instances are
/// skipped. The margin is far above anything a 1e-5 parameter nudge can move
/// a pre-activation by at these scales.
fn near_relu_kink(net: &Network, inputs: &Mat) -> bool {
    let mut activations = inputs.clone();
    let hidden_layers = net.layers().len() - 1;
    for layer in &net.layers()[..hidden_layers] {
        let mut z = activations.matmul_nt(&layer.weights);
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&layer.biases) {
                *v += b;
            }
        }
        if z.data().iter().any(|v| v.abs() < 1e-2) {
            return true;
        }
        for v in z.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        activations = z;
    }
    false
}

/// Central finite differences over every parameter, flattened in layer order.
fn fd_gradient(net: &mut Network, batch: &Batch) -> Vec<f64> {
    let mut out = Vec::new();
    for layer_idx in 0..net.layers().len() {
        let n_weights = net.layers()[layer_idx].weights.data().len();
        for p in 0..n_weights {
            let orig = net.layers()[layer_idx].weights.data()[p];
            net.layers_mut()[layer_idx].weights.data_mut()[p] = orig + FD_STEP;
            let up = loss_of(net, batch);
            net.layers_mut()[layer_idx].weights.data_mut()[p] = orig - FD_STEP;
            let down = loss_of(net, batch);
            net.layers_mut()[layer_idx].weights.data_mut()[p] = orig;
            out.push((up - down) / (2.0 * FD_STEP));
        }
        let n_biases = net.layers()[layer_idx].biases.len();
        for p in 0..n_biases {
            let orig = net.layers()[layer_idx].biases[p];
            net.layers_mut()[layer_idx].biases[p] = orig + FD_STEP;
            let up = loss_of(net, batch);
            net.layers_mut()[layer_idx].biases[p] = orig - FD_STEP;
            let down = loss_of(net, batch);
            net.layers_mut()[layer_idx].biases[p] = orig;
            out.push((up - down) / (2.0 * FD_STEP));
        }
    }
    out
}

fn flatten(grads: &conflab_core::Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for l in &grads.layers {
        out.extend_from_slice(l.weights.data());
        out.extend_from_slice(&l.biases);
    }
    out
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = seeded_stream(0xFD, 0);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 100 {
        let (mut net, batch) = random_instance(&mut rng);
        attempts += 1;
        assert!(attempts < 1000, "could not find enough kink-free instances");
        if near_relu_kink(&net, &batch.inputs) {
            continue;
        }
        checked += 1;
        let instance = checked;
        let analytic = flatten(&net.backward(&batch).unwrap());
        let numeric = fd_gradient(&mut net, &batch);
        assert_eq!(analytic.len(), numeric.len());

        let diff_norm: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n) * (a - n))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = diff_norm / norm.max(1e-12);
        assert!(
            rel <= 1e-5,
            "instance {instance}: relative gradient error {rel:.3e}"
        );
    }
}
