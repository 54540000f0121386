//! Synthetic classification datasets and the label-noise models used by the
//! experiments: uniform label noise at a given rate, fully random labels, and
//! two-class imbalance.
//!
//! All generators are pure functions of their inputs and a seed. Noise
//! injection replaces labels with draws that are uniform over *all* classes,
//! so fully random labels on `c` classes leave about `1/c` of them correct,
//! and uniform noise at rate `r` leaves `1 - r * (c - 1) / c` correct in
//! expectation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
// Redundant whenever std is in the crate graph (tests), required for the
// plain no_std build.
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::{seeded_stream, stream};

/// Which side of the train/test split a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
}

/// A labelled dataset. `clean_labels` keeps the pre-noise labels around so
/// that accuracy can be measured against the ground truth after injection.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Mat,
    pub labels: Vec<usize>,
    pub clean_labels: Option<Vec<usize>>,
    pub class_count: usize,
    pub split_tag: SplitTag,
}

impl Dataset {
    pub fn new(
        features: Mat,
        labels: Vec<usize>,
        clean_labels: Option<Vec<usize>>,
        class_count: usize,
        split_tag: SplitTag,
    ) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::InvalidArgument(String::from(
                "dataset must have at least one example and one feature",
            )));
        }
        if labels.len() != features.rows() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} labels", features.rows()),
                got: format!("{}", labels.len()),
            });
        }
        if let Some(clean) = &clean_labels {
            if clean.len() != labels.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} clean labels", labels.len()),
                    got: format!("{}", clean.len()),
                });
            }
            if clean.iter().any(|&l| l >= class_count) {
                return Err(Error::InvalidArgument(String::from(
                    "clean label out of range",
                )));
            }
        }
        if labels.iter().any(|&l| l >= class_count) {
            return Err(Error::InvalidArgument(String::from("label out of range")));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite(String::from("dataset features")));
        }
        Ok(Dataset {
            features,
            labels,
            clean_labels,
            class_count,
            split_tag,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// The labels accuracy should be judged against when ground truth is
    /// requested: `clean_labels` when present, `labels` otherwise.
    pub fn ground_truth(&self) -> &[usize] {
        self.clean_labels.as_deref().unwrap_or(&self.labels)
    }
}

/// Label-noise model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Each example is independently selected with probability `rate`;
    /// selected labels are replaced by a uniform draw over all classes.
    Uniform,
    /// Every label is replaced by a uniform draw over all classes.
    RandomAll,
    /// Labels are left untouched.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) || !self.rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise rate {} outside [0, 1]",
                self.rate
            )));
        }
        Ok(())
    }
}

/// Draws an isotropic Gaussian mixture: class `k` is centered on a seeded
/// random mean of norm `separation` with standard deviation `spread`.
///
/// The class means depend only on `seed`, while the samples also depend on
/// `split`, so calling this twice with the same seed and different split tags
/// yields two independent draws from the same mixture.
pub fn make_gaussian_mixture(
    class_count: usize,
    dim: usize,
    per_class_counts: &[usize],
    separation: f64,
    spread: f64,
    seed: u64,
    split: SplitTag,
) -> Result<Dataset> {
    if class_count < 2 {
        return Err(Error::InvalidArgument(format!(
            "class_count {class_count} must be at least 2"
        )));
    }
    if per_class_counts.len() != class_count {
        return Err(Error::ShapeMismatch {
            expected: format!("{class_count} per-class counts"),
            got: format!("{}", per_class_counts.len()),
        });
    }
    if per_class_counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InvalidArgument(String::from(
            "at least two classes need a positive count",
        )));
    }
    if !(separation > 0.0) || !(spread > 0.0) {
        return Err(Error::InvalidArgument(String::from(
            "separation and spread must be positive",
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument(String::from("dim must be positive")));
    }

    let unit_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut means_rng = seeded_stream(seed, stream::MIXTURE_MEANS);
    let mut means = Vec::with_capacity(class_count);
    for _ in 0..class_count {
        let mut mean: Vec<f64> = (0..dim)
            .map(|_| unit_normal.sample(&mut means_rng))
            .collect();
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut mean {
            *v *= separation / norm;
        }
        means.push(mean);
    }

    let sample_tag = match split {
        SplitTag::Train => stream::MIXTURE_TRAIN,
        SplitTag::Test => stream::MIXTURE_TEST,
    };
    let mut sample_rng = seeded_stream(seed, sample_tag);

    let n: usize = per_class_counts.iter().sum();
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (k, &count) in per_class_counts.iter().enumerate() {
        for _ in 0..count {
            for &m in &means[k] {
                features.push(m + spread * unit_normal.sample(&mut sample_rng));
            }
            labels.push(k);
        }
    }

    let clean = labels.clone();
    Dataset::new(
        Mat::from_vec(n, dim, features),
        labels,
        Some(clean),
        class_count,
        split,
    )
}

/// Replaces labels according to `spec`; features are untouched and the
/// pre-noise labels are preserved as `clean_labels`.
pub fn inject_noise(ds: &Dataset, spec: &NoiseSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seeded_stream(spec.seed, stream::NOISE);
    let mut labels = ds.labels.clone();
    match spec.kind {
        NoiseKind::None => {}
        NoiseKind::RandomAll => {
            for l in &mut labels {
                *l = rng.random_range(0..ds.class_count);
            }
        }
        NoiseKind::Uniform => {
            for l in &mut labels {
                if rng.random::<f64>() < spec.rate {
                    *l = rng.random_range(0..ds.class_count);
                }
            }
        }
    }
    Ok(Dataset {
        features: ds.features.clone(),
        labels,
        clean_labels: Some(ds.labels.clone()),
        class_count: ds.class_count,
        split_tag: ds.split_tag,
    })
}

/// Restricts `ds` to two classes and subsamples the minority so that
/// `count(majority) / count(minority) == ratio` up to integer rounding.
/// The majority class keeps every available example and is remapped to
/// label 0; the minority is remapped to label 1.
pub fn make_imbalanced(
    ds: &Dataset,
    majority_class: usize,
    minority_class: usize,
    ratio: f64,
    seed: u64,
) -> Result<Dataset> {
    if majority_class == minority_class
        || majority_class >= ds.class_count
        || minority_class >= ds.class_count
    {
        return Err(Error::InvalidArgument(String::from(
            "majority and minority must be distinct in-range classes",
        )));
    }
    if !(ratio >= 1.0) || !ratio.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "imbalance ratio {ratio} must be >= 1"
        )));
    }

    let majority_idx: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.labels[i] == majority_class)
        .collect();
    let mut minority_idx: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.labels[i] == minority_class)
        .collect();
    if majority_idx.is_empty() || minority_idx.is_empty() {
        return Err(Error::InvalidArgument(String::from(
            "both classes must be present",
        )));
    }

    let keep_minority = ((majority_idx.len() as f64) / ratio).floor() as usize;
    if keep_minority == 0 {
        return Err(Error::InvalidArgument(format!(
            "ratio {ratio} leaves no minority examples ({} available in majority)",
            majority_idx.len()
        )));
    }
    let keep_minority = keep_minority.min(minority_idx.len());

    let mut rng = seeded_stream(seed, stream::SUBSAMPLE);
    minority_idx.shuffle(&mut rng);
    minority_idx.truncate(keep_minority);
    minority_idx.sort_unstable();

    let dim = ds.dim();
    let n = majority_idx.len() + minority_idx.len();
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let mut clean = ds.clean_labels.as_ref().map(|_| Vec::with_capacity(n));
    let remap = |class: usize| if class == majority_class { 0 } else { 1 };
    for &i in majority_idx.iter().chain(&minority_idx) {
        features.extend_from_slice(ds.features.row(i));
        labels.push(remap(ds.labels[i]));
        if let (Some(clean), Some(src)) = (clean.as_mut(), ds.clean_labels.as_ref()) {
            // Clean labels outside the kept pair would not survive the remap;
            // the generators only ever noise within the same class set, so map
            // anything that is not the majority class to the minority slot.
            clean.push(remap(src[i]));
        }
    }

    Dataset::new(
        Mat::from_vec(n, dim, features),
        labels,
        clean,
        2,
        ds.split_tag,
    )
}
