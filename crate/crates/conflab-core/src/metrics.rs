//! Measurement: accuracies, generalization gap, soft-label uniformity, weight
//! statistics, calibration error, and the overfit-curve detector.
//!
//! Argmax ties are always broken toward the lowest class index so that every
//! reported number is deterministic.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::Network;
use crate::sat::SoftLabelStore;

/// Which label set accuracy is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSet {
    /// The labels the model was trained on (possibly noisy).
    Noisy,
    /// The retained pre-noise labels.
    Clean,
}

/// Per-epoch metrics trace of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_acc_noisy: f64,
    pub train_acc_clean: f64,
    pub test_acc: f64,
    pub mean_weight: f64,
    pub min_weight: f64,
    pub soft_label_uniformity: f64,
    pub per_class_test_acc: Vec<Option<f64>>,
    pub labels_changed_count: usize,
}

/// Epoch records in order, one per epoch starting at 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub class_count: usize,
    pub epochs: Vec<EpochRecord>,
}

impl RunRecord {
    pub fn new(class_count: usize) -> Self {
        RunRecord {
            class_count,
            epochs: Vec::new(),
        }
    }

    /// Appends a record, enforcing the one-entry-per-epoch ordering.
    pub fn push(&mut self, entry: EpochRecord) -> Result<()> {
        let expected = self.epochs.len() + 1;
        if entry.epoch != expected {
            return Err(Error::InvalidArgument(format!(
                "epoch {} out of order, expected {expected}",
                entry.epoch
            )));
        }
        if entry.per_class_test_acc.len() != self.class_count {
            return Err(Error::ShapeMismatch {
                expected: format!("{} per-class accuracies", self.class_count),
                got: format!("{}", entry.per_class_test_acc.len()),
            });
        }
        self.epochs.push(entry);
        Ok(())
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Argmax with ties broken toward the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = row[0];
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// The network's argmax predictions for every row of `features`.
pub fn predictions(net: &Network, features: &Mat) -> Result<Vec<usize>> {
    let probs = net.forward(features)?;
    Ok((0..probs.rows()).map(|r| argmax(probs.row(r))).collect())
}

/// Fraction of predictions matching the chosen label set.
pub fn accuracy(net: &Network, ds: &Dataset, against: LabelSet) -> Result<f64> {
    let labels: &[usize] = match against {
        LabelSet::Noisy => &ds.labels,
        LabelSet::Clean => ds.clean_labels.as_deref().ok_or_else(|| {
            Error::InvalidArgument(String::from(
                "clean accuracy requested but the dataset has no clean labels",
            ))
        })?,
    };
    let preds = predictions(net, &ds.features)?;
    Ok(fraction_matching(&preds, labels))
}

pub(crate) fn fraction_matching(preds: &[usize], labels: &[usize]) -> f64 {
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / preds.len() as f64
}

/// Per-class accuracy; `None` for classes without examples.
pub fn per_class_accuracy(
    preds: &[usize],
    labels: &[usize],
    class_count: usize,
) -> Vec<Option<f64>> {
    let mut hits = vec![0usize; class_count];
    let mut totals = vec![0usize; class_count];
    for (&p, &l) in preds.iter().zip(labels) {
        totals[l] += 1;
        if p == l {
            hits[l] += 1;
        }
    }
    hits.iter()
        .zip(&totals)
        .map(|(&h, &t)| {
            if t == 0 {
                None
            } else {
                Some(h as f64 / t as f64)
            }
        })
        .collect()
}

/// `|train_error - test_error|` with `error = 1 - accuracy`; both arguments
/// are accuracies on the same label distribution.
pub fn generalization_gap(train_metric: f64, test_metric: f64) -> f64 {
    assert!(
        (0.0..=1.0).contains(&train_metric) && (0.0..=1.0).contains(&test_metric),
        "metrics must be fractions"
    );
    ((1.0 - train_metric) - (1.0 - test_metric)).abs()
}

/// Minimum accuracy over classes that have test examples.
pub fn worst_class_accuracy(per_class: &[Option<f64>]) -> Result<f64> {
    per_class
        .iter()
        .flatten()
        .cloned()
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.min(v)))
        })
        .ok_or_else(|| Error::InvalidArgument(String::from("no class has any test examples")))
}

/// Max over examples of the L-infinity distance between the soft label and
/// the uniform vector.
pub fn soft_label_uniformity(store: &SoftLabelStore) -> f64 {
    assert!(!store.is_empty(), "soft-label store is empty");
    uniformity_of_rows(store.soft_labels())
}

pub(crate) fn uniformity_of_rows(rows: &Mat) -> f64 {
    let uniform = 1.0 / rows.cols() as f64;
    let mut worst = 0.0f64;
    for r in 0..rows.rows() {
        for &v in rows.row(r) {
            worst = worst.max((v - uniform).abs());
        }
    }
    worst
}

/// Standard expected calibration error with equal-width confidence bins over
/// the max-probability predictions.
pub fn expected_calibration_error(probs: &Mat, labels: &[usize], bin_count: usize) -> Result<f64> {
    if bin_count == 0 {
        return Err(Error::InvalidArgument(String::from(
            "bin_count must be at least 1",
        )));
    }
    if probs.rows() != labels.len() || probs.rows() == 0 {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels for a nonempty matrix", probs.rows()),
            got: format!("{}", labels.len()),
        });
    }
    let n = probs.rows();
    let mut bin_conf = vec![0.0; bin_count];
    let mut bin_hits = vec![0usize; bin_count];
    let mut bin_n = vec![0usize; bin_count];
    for (i, &label) in labels.iter().enumerate() {
        let row = probs.row(i);
        let pred = argmax(row);
        let conf = row[pred];
        let bin = ((conf * bin_count as f64) as usize).min(bin_count - 1);
        bin_conf[bin] += conf;
        bin_n[bin] += 1;
        if pred == label {
            bin_hits[bin] += 1;
        }
    }
    let mut ece = 0.0;
    for b in 0..bin_count {
        if bin_n[b] == 0 {
            continue;
        }
        let acc = bin_hits[b] as f64 / bin_n[b] as f64;
        let conf = bin_conf[b] / bin_n[b] as f64;
        ece += (bin_n[b] as f64 / n as f64) * (acc - conf).abs();
    }
    Ok(ece)
}

/// Shape summary of a training trace under label noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverfitShape {
    /// Highest clean-train accuracy reached over the run.
    pub peak_clean_train: f64,
    /// Whether clean-train accuracy rose above the expected fraction of
    /// still-correct labels, `1 - rate * (c - 1) / c`, by more than 0.02.
    pub exceeded_noise_ceiling: bool,
    /// Whether the final test accuracy sits below the peak test accuracy by
    /// more than the decline threshold.
    pub test_acc_declined: bool,
}

/// [`detect_overfit_shape_with`] at the default 0.02 decline threshold.
pub fn detect_overfit_shape(
    record: &RunRecord,
    noise_rate: f64,
    class_count: usize,
) -> OverfitShape {
    detect_overfit_shape_with(record, noise_rate, class_count, 0.02)
}

pub fn detect_overfit_shape_with(
    record: &RunRecord,
    noise_rate: f64,
    class_count: usize,
    decline_threshold: f64,
) -> OverfitShape {
    assert!(!record.is_empty(), "record must be nonempty");
    let c = class_count as f64;
    let ceiling = 1.0 - noise_rate * (c - 1.0) / c;
    let peak_clean_train = record
        .epochs
        .iter()
        .map(|e| e.train_acc_clean)
        .fold(f64::NEG_INFINITY, f64::max);
    let peak_test = record
        .epochs
        .iter()
        .map(|e| e.test_acc)
        .fold(f64::NEG_INFINITY, f64::max);
    let final_test = record.epochs.last().unwrap().test_acc;
    OverfitShape {
        peak_clean_train,
        exceeded_noise_ceiling: peak_clean_train > ceiling + 0.02,
        test_acc_declined: final_test < peak_test - decline_threshold,
    }
}
