//! Self-adaptive training: per-example soft labels corrected toward model
//! predictions by a momentum rule after a start-up epoch, with per-example
//! loss weights equal to the soft label's maximum entry.
//!
//! With label momentum 1 the soft labels never move and every weight stays 1,
//! so the run degenerates to plain cross-entropy training — bit for bit, which
//! the test suite relies on.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::metrics::RunRecord;
use crate::nn::Network;
use crate::sam::MixHooks;
use crate::trainer::train_run;

/// Training method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Plain one-hot cross entropy.
    Ce,
    /// Plain cross entropy halted at `early_stop_epoch`.
    CeEarlyStop,
    /// Self-adaptive training.
    Sat,
    /// Mixup with fixed one-hot labels and unit weights.
    Mixup,
    /// Self-adaptive mixup.
    Sam,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ce => "ce",
            Method::CeEarlyStop => "ce_early_stop",
            Method::Sat => "sat",
            Method::Mixup => "mixup",
            Method::Sam => "sam",
        }
    }
}

/// All hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_epochs: usize,
    /// Start-up epochs before label correction begins; correction fires on
    /// epochs strictly greater than this.
    pub start_epoch: usize,
    /// Label-correction momentum; 1 keeps labels fixed, 0 overwrites them
    /// with the prediction.
    pub momentum: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub method: Method,
    /// Mixup Beta(alpha, alpha) concentration.
    pub mix_alpha: f64,
    /// Mixup label-correction cutoff; a parent's label updates only when its
    /// mixing share exceeds `1 - gamma`.
    pub gamma: f64,
    pub early_stop_epoch: Option<usize>,
    /// Hidden layer widths of the MLP.
    pub hidden_sizes: Vec<usize>,
    /// SGD momentum (0 disables the velocity buffer entirely).
    pub sgd_momentum: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_epochs: 150,
            start_epoch: 60,
            momentum: 0.9,
            learning_rate: 0.1,
            batch_size: 64,
            seed: 0,
            method: Method::Ce,
            mix_alpha: 1.0,
            gamma: 0.1,
            early_stop_epoch: None,
            hidden_sizes: alloc::vec![64, 64],
            sgd_momentum: 0.0,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_epochs == 0 {
            return Err(Error::InvalidArgument(String::from(
                "total_epochs must be positive",
            )));
        }
        if self.start_epoch == 0 || self.start_epoch > self.total_epochs {
            return Err(Error::InvalidArgument(format!(
                "start_epoch {} must lie in [1, total_epochs = {}]",
                self.start_epoch, self.total_epochs
            )));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "label momentum {} outside [0, 1]",
                self.momentum
            )));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(String::from(
                "batch_size must be positive",
            )));
        }
        if !(self.mix_alpha > 0.0) || !self.mix_alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mix_alpha {} must be positive",
                self.mix_alpha
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "gamma {} outside (0, 0.5)",
                self.gamma
            )));
        }
        if self.method == Method::CeEarlyStop && self.early_stop_epoch.is_none() {
            return Err(Error::InvalidArgument(String::from(
                "ce_early_stop needs early_stop_epoch",
            )));
        }
        if let Some(e) = self.early_stop_epoch {
            if e == 0 {
                return Err(Error::InvalidArgument(String::from(
                    "early_stop_epoch must be positive",
                )));
            }
        }
        if !(0.0..1.0).contains(&self.sgd_momentum) {
            return Err(Error::InvalidArgument(format!(
                "sgd_momentum {} outside [0, 1)",
                self.sgd_momentum
            )));
        }
        if self.weight_decay < 0.0 || !self.weight_decay.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "weight_decay {} must be non-negative",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Per-example soft labels maintained across epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelStore {
    labels: Mat,
    start_epoch: usize,
    momentum: f64,
}

impl SoftLabelStore {
    /// Initializes every row as the one-hot vector of the given hard label.
    pub fn from_hard_labels(
        hard_labels: &[usize],
        class_count: usize,
        start_epoch: usize,
        momentum: f64,
    ) -> Result<Self> {
        if hard_labels.is_empty() || class_count == 0 {
            return Err(Error::InvalidArgument(String::from(
                "store needs labels and classes",
            )));
        }
        if hard_labels.iter().any(|&l| l >= class_count) {
            return Err(Error::InvalidArgument(String::from("label out of range")));
        }
        if start_epoch == 0 {
            return Err(Error::InvalidArgument(String::from(
                "start_epoch must be positive",
            )));
        }
        if !(0.0..=1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum {momentum} outside [0, 1]"
            )));
        }
        let mut labels = Mat::zeros(hard_labels.len(), class_count);
        for (i, &l) in hard_labels.iter().enumerate() {
            labels.set(i, l, 1.0);
        }
        Ok(SoftLabelStore {
            labels,
            start_epoch,
            momentum,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn class_count(&self) -> usize {
        self.labels.cols()
    }

    #[inline]
    pub fn start_epoch(&self) -> usize {
        self.start_epoch
    }

    #[inline]
    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.labels.row(i)
    }

    #[inline]
    pub fn soft_labels(&self) -> &Mat {
        &self.labels
    }

    /// Momentum-corrects row `i` toward the prediction `p`.
    pub(crate) fn update_row(&mut self, i: usize, p: &[f64]) {
        update_in_place(self.labels.row_mut(i), p, self.momentum);
    }
}

#[inline]
fn update_in_place(t: &mut [f64], p: &[f64], momentum: f64) {
    debug_assert_eq!(t.len(), p.len());
    let blend = 1.0 - momentum;
    for (tv, &pv) in t.iter_mut().zip(p) {
        *tv = momentum * *tv + blend * pv;
    }
}

/// The label-correction momentum update `t <- momentum * t + (1 - momentum) * p`.
pub fn update_soft_label(t: &[f64], p: &[f64], momentum: f64) -> Vec<f64> {
    assert_eq!(t.len(), p.len(), "soft label and prediction lengths");
    assert!(
        (0.0..=1.0).contains(&momentum),
        "momentum {momentum} outside [0, 1]"
    );
    let mut out = t.to_vec();
    update_in_place(&mut out, p, momentum);
    out
}

/// The re-weighting rule: an example's weight is its soft label's maximum
/// entry, a confidence proxy in `[1/classes, 1]`.
pub fn confidence_weight(t: &[f64]) -> f64 {
    assert!(!t.is_empty(), "confidence weight of an empty vector");
    t.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Runs self-adaptive training and returns the trained network, the final
/// soft-label store, and the per-epoch metrics trace.
pub fn run_sat(
    config: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Network, SoftLabelStore, RunRecord)> {
    if config.method != Method::Sat {
        return Err(Error::InvalidArgument(format!(
            "run_sat called with method {}",
            config.method.name()
        )));
    }
    let out = train_run(config, train, test, &MixHooks::default())?;
    Ok((out.net, out.store, out.record))
}

/// Plain cross-entropy training (optionally early-stopped).
pub fn run_ce(
    config: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Network, RunRecord)> {
    if config.method != Method::Ce && config.method != Method::CeEarlyStop {
        return Err(Error::InvalidArgument(format!(
            "run_ce called with method {}",
            config.method.name()
        )));
    }
    let out = train_run(config, train, test, &MixHooks::default())?;
    Ok((out.net, out.record))
}
