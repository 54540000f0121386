//! Dense feed-forward classifier with a soft-label weighted cross-entropy
//! loss, exact backpropagation, and plain SGD updates.
//!
//! This is the substrate every training method in the crate runs on: ReLU
//! hidden layers, an identity output layer, and a softmax read-out with
//! max-subtraction for numerical stability. Gradients are computed exactly;
//! the output-layer logit gradient for example `i` is
//! `(w_i / sum(w)) * (p_i - t_i)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
// Redundant whenever std is in the crate graph (tests), required for the
// plain no_std build.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::{seeded_stream, stream};

/// Floor applied to probabilities before taking logs.
pub const PROB_EPS: f64 = 1e-12;

/// Tolerance for "row sums to one" checks on soft labels.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// One dense layer: weights are row-major `[fan_out x fan_in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Mat,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Mat, biases: Vec<f64>) -> Result<Self> {
        if biases.len() != weights.rows() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} biases", weights.rows()),
                got: format!("{}", biases.len()),
            });
        }
        if !weights.is_finite() || !biases.iter().all(|b| b.is_finite()) {
            return Err(Error::NonFinite(String::from("layer parameters")));
        }
        Ok(Layer { weights, biases })
    }

    #[inline]
    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }
}

/// Gradient of the loss with respect to every parameter of a [`Network`];
/// mirrors the network's layer shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Mat,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: Mat::zeros(l.fan_out(), l.fan_in()),
                    biases: vec![0.0; l.fan_out()],
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.biases.iter().all(|b| b.is_finite()))
    }
}

/// Dense feed-forward classifier: ReLU on hidden layers, identity on the
/// output layer, softmax read-out.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    class_count: usize,
}

impl Network {
    /// Builds a network from explicit layers, checking that adjacent layer
    /// dimensions compose and that the output layer matches `class_count`.
    pub fn from_layers(layers: Vec<Layer>, class_count: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(String::from(
                "network needs at least one layer",
            )));
        }
        for pair in layers.windows(2) {
            if pair[1].fan_in() != pair[0].fan_out() {
                return Err(Error::ShapeMismatch {
                    expected: format!("fan_in {}", pair[0].fan_out()),
                    got: format!("fan_in {}", pair[1].fan_in()),
                });
            }
        }
        let last = layers.last().unwrap();
        if last.fan_out() != class_count {
            return Err(Error::ShapeMismatch {
                expected: format!("output fan_out {class_count}"),
                got: format!("{}", last.fan_out()),
            });
        }
        Ok(Network {
            layers,
            class_count,
        })
    }

    /// He-style initialization: weights `~ N(0, 2 / fan_in)`, biases zero.
    pub fn with_rng<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_sizes: &[usize],
        class_count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || class_count == 0 || hidden_sizes.contains(&0) {
            return Err(Error::InvalidArgument(String::from(
                "layer sizes must be positive",
            )));
        }
        let mut dims = Vec::with_capacity(hidden_sizes.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden_sizes);
        dims.push(class_count);

        let mut layers = Vec::with_capacity(dims.len() - 1);
        for win in dims.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let std_dev = (2.0 / fan_in as f64).sqrt();
            let dist = Normal::new(0.0, std_dev).expect("finite std dev");
            let weights = Mat::from_fn(fan_out, fan_in, |_, _| dist.sample(rng));
            layers.push(Layer {
                weights,
                biases: vec![0.0; fan_out],
            });
        }
        Ok(Network {
            layers,
            class_count,
        })
    }

    /// Seeded variant of [`Network::with_rng`] drawing from the dedicated
    /// initialization stream.
    pub fn seeded(
        input_dim: usize,
        hidden_sizes: &[usize],
        class_count: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = seeded_stream(seed, stream::NET_INIT);
        Self::with_rng(input_dim, hidden_sizes, class_count, &mut rng)
    }

    #[inline]
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    #[inline]
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    #[inline]
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Forward pass: returns one probability row per input row.
    ///
    /// Softmax is applied with per-row max subtraction, so rows are always on
    /// the simplex for finite inputs.
    pub fn forward(&self, inputs: &Mat) -> Result<Mat> {
        Ok(self.forward_trace(inputs)?.probs)
    }

    /// Forward pass that keeps per-layer activations for backpropagation.
    pub(crate) fn forward_trace(&self, inputs: &Mat) -> Result<Trace> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("input dim {}", self.input_dim()),
                got: format!("{}", inputs.cols()),
            });
        }
        if !inputs.is_finite() {
            return Err(Error::NonFinite(String::from("forward inputs")));
        }

        // activations[l] is the input of layer l; the last entry is the logits.
        let mut activations: Vec<Mat> = Vec::with_capacity(self.layers.len());
        let mut current = inputs.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = current.matmul_nt(&layer.weights);
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.biases) {
                    *v += b;
                }
            }
            if l != last {
                for v in z.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            activations.push(current);
            current = z;
        }

        let probs = softmax_rows(&current);
        Ok(Trace { activations, probs })
    }

    /// Applies one SGD step: every parameter is decremented by
    /// `learning_rate * gradient`. Panics if `grads` does not mirror the
    /// network's shapes.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) {
        assert_eq!(
            grads.layers.len(),
            self.layers.len(),
            "gradient layer count"
        );
        for (layer, grad) in self.layers.iter_mut().zip(&grads.layers) {
            assert_eq!(grad.weights.rows(), layer.weights.rows(), "grad rows");
            assert_eq!(grad.weights.cols(), layer.weights.cols(), "grad cols");
            for (w, &g) in layer.weights.data_mut().iter_mut().zip(grad.weights.data()) {
                *w -= learning_rate * g;
            }
            for (b, &g) in layer.biases.iter_mut().zip(&grad.biases) {
                *b -= learning_rate * g;
            }
        }
    }

    /// Exact gradient of [`weighted_soft_ce`] composed with the network's
    /// softmax output, evaluated on `batch`.
    pub fn backward(&self, batch: &Batch) -> Result<Gradients> {
        let trace = self.forward_trace(&batch.inputs)?;
        self.backward_from_trace(&trace, &batch.soft_labels, &batch.weights)
    }

    pub(crate) fn backward_from_trace(
        &self,
        trace: &Trace,
        soft_labels: &Mat,
        weights: &[f64],
    ) -> Result<Gradients> {
        let batch = trace.probs.rows();
        if soft_labels.rows() != batch
            || soft_labels.cols() != self.class_count
            || weights.len() != batch
        {
            return Err(Error::ShapeMismatch {
                expected: format!("{batch} x {} labels and {batch} weights", self.class_count),
                got: format!(
                    "{} x {} labels, {} weights",
                    soft_labels.rows(),
                    soft_labels.cols(),
                    weights.len()
                ),
            });
        }
        let weight_sum: f64 = weights.iter().sum();
        if weight_sum <= 0.0 {
            return Err(Error::DegenerateBatch);
        }

        // Output-layer logit gradient: (w_i / sum(w)) * (p_i - t_i).
        let mut delta = Mat::zeros(batch, self.class_count);
        for (i, &weight) in weights.iter().enumerate() {
            let scale = weight / weight_sum;
            let p = trace.probs.row(i);
            let t = soft_labels.row(i);
            for (d, (&pv, &tv)) in delta.row_mut(i).iter_mut().zip(p.iter().zip(t)) {
                *d = scale * (pv - tv);
            }
        }

        let mut grads = Gradients {
            layers: Vec::with_capacity(self.layers.len()),
        };
        for _ in &self.layers {
            grads.layers.push(LayerGrads {
                weights: Mat::zeros(0, 0),
                biases: Vec::new(),
            });
        }

        for l in (0..self.layers.len()).rev() {
            let layer_input = &trace.activations[l];
            let d_weights = delta.matmul_tn(layer_input);
            let mut d_biases = vec![0.0; self.layers[l].fan_out()];
            for r in 0..delta.rows() {
                for (db, &d) in d_biases.iter_mut().zip(delta.row(r)) {
                    *db += d;
                }
            }
            grads.layers[l] = LayerGrads {
                weights: d_weights,
                biases: d_biases,
            };

            if l > 0 {
                // Propagate through the ReLU of the previous layer; the stored
                // activation is post-ReLU, so "> 0" recovers the mask.
                let mut d_prev = delta.matmul(&self.layers[l].weights);
                for (d, &a) in d_prev.data_mut().iter_mut().zip(layer_input.data()) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
                delta = d_prev;
            }
        }

        if !grads.is_finite() {
            return Err(Error::NonFinite(String::from("backward intermediates")));
        }
        Ok(grads)
    }
}

pub(crate) struct Trace {
    /// `activations[l]` is the input of layer `l` (post-ReLU for `l > 0`).
    pub activations: Vec<Mat>,
    pub probs: Mat,
}

fn softmax_rows(logits: &Mat) -> Mat {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Weighted soft-label cross entropy:
/// `-(1 / sum(w)) * sum_i w_i * sum_j t_ij * ln(max(p_ij, PROB_EPS))`.
///
/// Zero-weight rows are excluded exactly; a batch whose weights sum to zero
/// is rejected as degenerate.
pub fn weighted_soft_ce(probs: &Mat, soft_labels: &Mat, weights: &[f64]) -> Result<f64> {
    if probs.rows() != soft_labels.rows()
        || probs.cols() != soft_labels.cols()
        || weights.len() != probs.rows()
    {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "{} x {} and {} weights",
                probs.rows(),
                probs.cols(),
                probs.rows()
            ),
            got: format!(
                "{} x {} and {} weights",
                soft_labels.rows(),
                soft_labels.cols(),
                weights.len()
            ),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument(String::from(
            "weights must be finite and non-negative",
        )));
    }
    let weight_sum: f64 = weights.iter().sum();
    if weight_sum <= 0.0 {
        return Err(Error::DegenerateBatch);
    }

    let mut total = 0.0;
    for (i, &weight) in weights.iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        let mut row_loss = 0.0;
        for (&p, &t) in probs.row(i).iter().zip(soft_labels.row(i)) {
            if t == 0.0 {
                continue;
            }
            row_loss -= t * p.max(PROB_EPS).ln();
        }
        total += weight * row_loss;
    }
    Ok(total / weight_sum)
}

/// A mini-batch as consumed by the loss and backward pass.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Mat,
    pub soft_labels: Mat,
    pub weights: Vec<f64>,
    pub example_ids: Vec<usize>,
}

impl Batch {
    /// Validates the batch invariants: soft-label rows on the simplex within
    /// [`SIMPLEX_TOL`], weights in `(0, 1]`, matching row counts.
    pub fn new(
        inputs: Mat,
        soft_labels: Mat,
        weights: Vec<f64>,
        example_ids: Vec<usize>,
    ) -> Result<Self> {
        let n = inputs.rows();
        if soft_labels.rows() != n || weights.len() != n || example_ids.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} rows in every field"),
                got: format!(
                    "{} labels, {} weights, {} ids",
                    soft_labels.rows(),
                    weights.len(),
                    example_ids.len()
                ),
            });
        }
        for (i, &w) in weights.iter().enumerate() {
            if !is_simplex_row(soft_labels.row(i)) {
                return Err(Error::InvalidArgument(format!(
                    "soft label row {i} is not on the probability simplex"
                )));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "weight {w} at row {i} is outside (0, 1]"
                )));
            }
        }
        Ok(Batch {
            inputs,
            soft_labels,
            weights,
            example_ids,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Whether `row` lies on the probability simplex within [`SIMPLEX_TOL`].
pub fn is_simplex_row(row: &[f64]) -> bool {
    let mut sum = 0.0;
    for &v in row {
        if !(v >= 0.0) || !v.is_finite() {
            return false;
        }
        sum += v;
    }
    (sum - 1.0).abs() <= SIMPLEX_TOL
}
