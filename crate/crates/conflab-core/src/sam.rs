//! Self-adaptive mixup: training on Beta-sampled convex combinations of
//! example pairs, with soft-label correction gated on the mixing coefficient
//! and each mixed example weighted by the model's maximum predicted
//! probability on it.
//!
//! A mixed example `lambda * x_i + (1 - lambda) * x_j` updates the soft label
//! of `x_i` iff `lambda > 1 - gamma` and of `x_j` iff `lambda < gamma`; with
//! `gamma < 0.5` at most one side fires.

use alloc::format;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::RunRecord;
use crate::nn::Network;
use crate::sat::{Method, SoftLabelStore, TrainConfig};
use crate::trainer::train_run;

/// A convex combination of two training examples.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedExample {
    pub input: Vec<f64>,
    pub soft_label: Vec<f64>,
    pub lambda: f64,
    pub parent_ids: (usize, usize),
}

/// Draws `lambda ~ Beta(mix_alpha, mix_alpha)` as the ratio of two
/// Gamma(mix_alpha, 1) draws, which stays exact for shapes below 1.
pub fn sample_lambda<R: Rng + ?Sized>(mix_alpha: f64, rng: &mut R) -> Result<f64> {
    if !(mix_alpha > 0.0) || !mix_alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "mix_alpha {mix_alpha} must be positive"
        )));
    }
    let gamma = Gamma::new(mix_alpha, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("gamma sampler: {e}")))?;
    let g1: f64 = gamma.sample(rng);
    let g2: f64 = gamma.sample(rng);
    let sum = g1 + g2;
    if sum > 0.0 {
        Ok(g1 / sum)
    } else {
        // Both draws underflowed to zero; only reachable for tiny shapes.
        Ok(0.5)
    }
}

#[inline]
pub(crate) fn convex_combine_into(out: &mut [f64], a: &[f64], b: &[f64], lambda: f64) {
    debug_assert!(out.len() == a.len() && a.len() == b.len());
    let complement = 1.0 - lambda;
    for ((o, &av), &bv) in out.iter_mut().zip(a).zip(b) {
        *o = lambda * av + complement * bv;
    }
}

/// Builds the mixed example `(lambda * x_i + (1-lambda) * x_j,
/// lambda * t_i + (1-lambda) * t_j)`.
pub fn mix(
    x_i: &[f64],
    t_i: &[f64],
    x_j: &[f64],
    t_j: &[f64],
    lambda: f64,
    parent_ids: (usize, usize),
) -> MixedExample {
    assert_eq!(x_i.len(), x_j.len(), "input dims must match");
    assert_eq!(t_i.len(), t_j.len(), "label dims must match");
    assert!(
        (0.0..=1.0).contains(&lambda),
        "lambda {lambda} outside [0, 1]"
    );
    let mut input = alloc::vec![0.0; x_i.len()];
    convex_combine_into(&mut input, x_i, x_j, lambda);
    let mut soft_label = alloc::vec![0.0; t_i.len()];
    convex_combine_into(&mut soft_label, t_i, t_j, lambda);
    MixedExample {
        input,
        soft_label,
        lambda,
        parent_ids,
    }
}

/// Which parents of a mixed example get their soft label corrected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateDecision {
    /// Fires iff `lambda > 1 - gamma`.
    pub first_parent: bool,
    /// Fires iff `lambda < gamma`.
    pub second_parent: bool,
}

impl GateDecision {
    #[inline]
    pub fn any(&self) -> bool {
        self.first_parent || self.second_parent
    }
}

/// The label-correction gate for one mixed example.
pub fn label_update_gate(lambda: f64, gamma: f64) -> Result<GateDecision> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "gamma {gamma} outside (0, 0.5)"
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "lambda {lambda} outside [0, 1]"
        )));
    }
    Ok(GateDecision {
        first_parent: lambda > 1.0 - gamma,
        second_parent: lambda < gamma,
    })
}

/// Test hooks for the mixing loop. All default to off; they exist so the
/// reduction checks (mixup vs. plain training, self-adaptive mixup vs.
/// mixup) can pin down single differences.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MixHooks {
    /// Overrides every sampled lambda; the mixing RNG is then not consumed
    /// for lambdas.
    pub force_lambda: Option<f64>,
    /// Forces every mixed example's loss weight to 1.
    pub force_unit_weights: bool,
    /// Never fires the label-correction gate (the `gamma -> 0` limit).
    pub close_gate: bool,
}

/// Runs self-adaptive mixup.
pub fn run_sam(
    config: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Network, SoftLabelStore, RunRecord)> {
    run_sam_with_hooks(config, train, test, &MixHooks::default())
}

pub fn run_sam_with_hooks(
    config: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
    hooks: &MixHooks,
) -> Result<(Network, SoftLabelStore, RunRecord)> {
    if config.method != Method::Sam {
        return Err(Error::InvalidArgument(format!(
            "run_sam called with method {}",
            config.method.name()
        )));
    }
    let out = train_run(config, train, test, hooks)?;
    Ok((out.net, out.store, out.record))
}

/// Runs mixup with fixed one-hot labels and unit weights.
pub fn run_mixup(
    config: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Network, RunRecord)> {
    run_mixup_with_hooks(config, train, test, &MixHooks::default())
}

pub fn run_mixup_with_hooks(
    config: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
    hooks: &MixHooks,
) -> Result<(Network, RunRecord)> {
    if config.method != Method::Mixup {
        return Err(Error::InvalidArgument(format!(
            "run_mixup called with method {}",
            config.method.name()
        )));
    }
    let out = train_run(config, train, test, hooks)?;
    Ok((out.net, out.record))
}
