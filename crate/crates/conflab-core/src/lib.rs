//! Label-noise-robust training on a small from-scratch neural network.
//!
//! The crate implements self-adaptive training (momentum label correction
//! plus confidence re-weighting), self-adaptive mixup (Beta-mixed example
//! pairs with a gated label-correction rule), the plain cross-entropy and
//! mixup baselines they reduce to, and a numerical laboratory that checks the
//! variance-optimal reweighting derivation behind the confidence weights.
//!
//! Everything here is deterministic given a seed and free of IO; file
//! formats, configuration, and the experiment command line live in the
//! companion `conflab` crate.
//!
//! # Layout
//!
//! - [`nn`] — dense ReLU classifier, weighted soft-label cross entropy,
//!   exact backpropagation, SGD.
//! - [`data`] — Gaussian-mixture dataset generation, label-noise injection,
//!   class-imbalance subsampling.
//! - [`sat`] — self-adaptive training and the plain cross-entropy baseline.
//! - [`sam`] — mixup and self-adaptive mixup.
//! - [`theory`] — the weighted-loss estimator, its closed-form variance, the
//!   optimal weights, and the label-update probability of the mixup gate.
//! - [`metrics`] — accuracies, generalization gap, calibration error,
//!   soft-label uniformity, and the overfit-curve detector.

#![no_std]
// Comparisons written as `!(x > 0.0)` are deliberate: they reject NaN along
// with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod mat;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod sam;
pub mod sat;
pub mod special;
pub mod theory;
mod trainer;

pub use data::{
    inject_noise, make_gaussian_mixture, make_imbalanced, Dataset, NoiseKind, NoiseSpec, SplitTag,
};
pub use error::{Error, Result};
pub use mat::Mat;
pub use metrics::{
    accuracy, detect_overfit_shape, expected_calibration_error, generalization_gap,
    soft_label_uniformity, worst_class_accuracy, EpochRecord, LabelSet, OverfitShape, RunRecord,
};
pub use nn::{weighted_soft_ce, Batch, Gradients, Layer, Network};
pub use sam::{
    label_update_gate, mix, run_mixup, run_mixup_with_hooks, run_sam, run_sam_with_hooks,
    sample_lambda, GateDecision, MixHooks, MixedExample,
};
pub use sat::{
    confidence_weight, run_ce, run_sat, update_soft_label, Method, SoftLabelStore, TrainConfig,
};
pub use theory::{
    closed_form_variance, label_update_probability, mc_estimate, optimal_weights, variance_sweep,
    SweepRow, WeightingScenario,
};
