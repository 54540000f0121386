//! JSON experiment configuration.
//!
//! One file drives everything: which experiment to run, where the data comes
//! from (generator or files), the method list, and the training
//! hyperparameters. Every field has a default, and parse -> serialize ->
//! parse is the identity.

use std::path::{Path, PathBuf};

use conflab_core::{Method, NoiseKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    NoiseSweep,
    RandomLabels,
    Imbalance,
    VarianceLab,
    SingleRun,
}

impl ExperimentKind {
    pub fn dir_name(&self) -> &'static str {
        match self {
            ExperimentKind::NoiseSweep => "noise_sweep",
            ExperimentKind::RandomLabels => "random_labels",
            ExperimentKind::Imbalance => "imbalance",
            ExperimentKind::VarianceLab => "variance_lab",
            ExperimentKind::SingleRun => "single_run",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Ce,
    CeEarlyStop,
    Sat,
    Mixup,
    Sam,
}

impl MethodName {
    pub fn to_method(self) -> Method {
        match self {
            MethodName::Ce => Method::Ce,
            MethodName::CeEarlyStop => Method::CeEarlyStop,
            MethodName::Sat => Method::Sat,
            MethodName::Mixup => Method::Mixup,
            MethodName::Sam => Method::Sam,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Ce => "ce",
            MethodName::CeEarlyStop => "ce_early_stop",
            MethodName::Sat => "sat",
            MethodName::Mixup => "mixup",
            MethodName::Sam => "sam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_class_count")]
    pub class_count: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_per_class")]
    pub train_per_class: Vec<usize>,
    #[serde(default = "default_per_class")]
    pub test_per_class: Vec<usize>,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_class_count() -> usize {
    4
}
fn default_dim() -> usize {
    10
}
fn default_per_class() -> Vec<usize> {
    vec![500]
}
fn default_separation() -> f64 {
    3.0
}
fn default_spread() -> f64 {
    1.0
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl GeneratorConfig {
    /// Per-class counts may be given as a single element that applies to all
    /// classes.
    pub fn expanded_counts(&self, counts: &[usize]) -> Vec<usize> {
        if counts.len() == 1 {
            vec![counts[0]; self.class_count]
        } else {
            counts.to_vec()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvFilesConfig {
    pub train: PathBuf,
    pub test: PathBuf,
    pub class_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxFilesConfig {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindName {
    Uniform,
    RandomAll,
    None,
}

impl NoiseKindName {
    pub fn to_kind(self) -> NoiseKind {
        match self {
            NoiseKindName::Uniform => NoiseKind::Uniform,
            NoiseKindName::RandomAll => NoiseKind::RandomAll,
            NoiseKindName::None => NoiseKind::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKindName,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<CsvFilesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idx: Option<IdxFilesConfig>,
    /// Applied to the training split only; experiment presets may override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    #[serde(default = "d_total_epochs")]
    pub total_epochs: usize,
    #[serde(default = "d_start_epoch")]
    pub start_epoch: usize,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    #[serde(default = "d_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "d_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_method")]
    pub method: MethodName,
    #[serde(default = "d_mix_alpha")]
    pub mix_alpha: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stop_epoch: Option<usize>,
    #[serde(default = "d_hidden_sizes")]
    pub hidden_sizes: Vec<usize>,
    #[serde(default)]
    pub sgd_momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

fn d_total_epochs() -> usize {
    150
}
fn d_start_epoch() -> usize {
    60
}
fn d_momentum() -> f64 {
    0.9
}
fn d_learning_rate() -> f64 {
    0.1
}
fn d_batch_size() -> usize {
    64
}
fn d_method() -> MethodName {
    MethodName::Sat
}
fn d_mix_alpha() -> f64 {
    1.0
}
fn d_gamma() -> f64 {
    0.1
}
fn d_hidden_sizes() -> Vec<usize> {
    vec![64, 64]
}

impl Default for TrainSettings {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl TrainSettings {
    /// Lowers to the core config. The start epoch is clamped to
    /// `total_epochs` so short runs under the default start epoch of 60 mean
    /// "never correct" instead of failing validation.
    pub fn to_core(&self, method: Method, seed: u64) -> TrainConfig {
        TrainConfig {
            total_epochs: self.total_epochs,
            start_epoch: self.start_epoch.min(self.total_epochs),
            momentum: self.momentum,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed,
            method,
            mix_alpha: self.mix_alpha,
            gamma: self.gamma,
            early_stop_epoch: self.early_stop_epoch,
            hidden_sizes: self.hidden_sizes.clone(),
            sgd_momentum: self.sgd_momentum,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceLabConfig {
    #[serde(default = "d_in_dist_probs")]
    pub in_dist_probs: Vec<f64>,
    #[serde(default = "d_loss_variance")]
    pub loss_variance: f64,
    #[serde(default)]
    pub in_dist_loss_mean: f64,
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default = "d_random_candidates")]
    pub random_candidates: usize,
}

fn d_in_dist_probs() -> Vec<f64> {
    vec![0.9, 0.9, 0.3, 0.3]
}
fn d_loss_variance() -> f64 {
    1.0
}
fn d_trials() -> usize {
    100_000
}
fn d_random_candidates() -> usize {
    20
}

impl Default for VarianceLabConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default = "d_methods")]
    pub methods: Vec<MethodName>,
    #[serde(default = "d_noise_rates")]
    pub noise_rates: Vec<f64>,
    #[serde(default = "d_imbalance_ratios")]
    pub imbalance_ratios: Vec<f64>,
    #[serde(default = "d_replications")]
    pub replications: usize,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default = "d_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_lab: Option<VarianceLabConfig>,
}

fn d_methods() -> Vec<MethodName> {
    vec![MethodName::Ce, MethodName::Sat, MethodName::Sam]
}
fn d_noise_rates() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8]
}
fn d_imbalance_ratios() -> Vec<f64> {
    vec![9.0, 24.0, 99.0]
}
fn d_replications() -> usize {
    3
}
fn d_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.to_string()))?;
        Ok(config)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Field-by-field validation; all problems are reported together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let sources = [
            self.data.generator.is_some(),
            self.data.csv.is_some(),
            self.data.idx.is_some(),
        ];
        let source_count = sources.iter().filter(|&&s| s).count();
        let needs_data = !matches!(self.experiment, ExperimentKind::VarianceLab);
        if needs_data && source_count == 0 {
            problems.push("data: one of generator/csv/idx is required".to_string());
        }
        if source_count > 1 {
            problems.push("data: generator, csv, and idx are mutually exclusive".to_string());
        }
        if let Some(generator) = &self.data.generator {
            if generator.class_count < 2 {
                problems.push(format!(
                    "data.generator.class_count: {} is below 2",
                    generator.class_count
                ));
            }
            for (name, counts) in [
                ("train_per_class", &generator.train_per_class),
                ("test_per_class", &generator.test_per_class),
            ] {
                if counts.len() != 1 && counts.len() != generator.class_count {
                    problems.push(format!(
                        "data.generator.{name}: {} entries for {} classes",
                        counts.len(),
                        generator.class_count
                    ));
                }
            }
            if !(generator.separation > 0.0) {
                problems.push("data.generator.separation: must be positive".to_string());
            }
            if !(generator.spread > 0.0) {
                problems.push("data.generator.spread: must be positive".to_string());
            }
        }
        if let Some(noise) = &self.data.noise {
            if !(0.0..=1.0).contains(&noise.rate) {
                problems.push(format!("data.noise.rate: {} outside [0, 1]", noise.rate));
            }
        }
        if self.methods.is_empty()
            && matches!(
                self.experiment,
                ExperimentKind::NoiseSweep
                    | ExperimentKind::RandomLabels
                    | ExperimentKind::Imbalance
            )
        {
            problems.push("methods: at least one method is required".to_string());
        }
        if matches!(self.experiment, ExperimentKind::NoiseSweep) && self.noise_rates.is_empty() {
            problems.push("noise_rates: at least one rate is required".to_string());
        }
        for rate in &self.noise_rates {
            if !(0.0..=1.0).contains(rate) {
                problems.push(format!("noise_rates: {rate} outside [0, 1]"));
            }
        }
        if matches!(self.experiment, ExperimentKind::Imbalance) && self.imbalance_ratios.is_empty()
        {
            problems.push("imbalance_ratios: at least one ratio is required".to_string());
        }
        for ratio in &self.imbalance_ratios {
            if !(*ratio >= 1.0) {
                problems.push(format!("imbalance_ratios: {ratio} is below 1"));
            }
        }
        if self.replications == 0 {
            problems.push("replications: must be at least 1".to_string());
        }
        // Surface core hyperparameter problems with a field prefix.
        let probe = self
            .train
            .to_core(self.train.method.to_method(), self.train.seed);
        if let Err(e) = probe.validate() {
            problems.push(format!("train: {e}"));
        }
        if let Some(v) = &self.variance_lab {
            if v.in_dist_probs.is_empty()
                || v.in_dist_probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0))
            {
                problems.push("variance_lab.in_dist_probs: entries must lie in (0, 1]".to_string());
            }
            if !(v.loss_variance > 0.0) {
                problems.push("variance_lab.loss_variance: must be positive".to_string());
            }
            if v.trials < 10_000 {
                problems.push(format!(
                    "variance_lab.trials: {} is below the 10^4 minimum",
                    v.trials
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_round_trips() {
        let text = r#"{"experiment": "noise_sweep", "data": {"generator": {}}}"#;
        let parsed: ExperimentConfig = serde_json::from_str(text).unwrap();
        let serialized = serde_json::to_string(&parsed).unwrap();
        let reparsed: ExperimentConfig = serde_json::from_str(&serialized).unwrap();
        assert_eq!(parsed, reparsed);
        assert!(parsed.validate().is_ok());
        assert_eq!(parsed.noise_rates, vec![0.2, 0.4, 0.6, 0.8]);
        assert_eq!(parsed.replications, 3);
    }

    #[test]
    fn validation_names_every_bad_field() {
        let text = r#"{
            "experiment": "noise_sweep",
            "data": {"generator": {"class_count": 1, "separation": -2.0}},
            "noise_rates": [1.5],
            "replications": 0,
            "train": {"gamma": 0.7}
        }"#;
        let parsed: ExperimentConfig = serde_json::from_str(text).unwrap();
        let err = parsed.validate().unwrap_err().to_string();
        for needle in [
            "class_count",
            "separation",
            "noise_rates",
            "replications",
            "train",
        ] {
            assert!(err.contains(needle), "missing {needle} in:\n{err}");
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"experiment": "single_run", "data": {"generator": {}}, "bogus": 1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
    }

    #[test]
    fn method_names_match_the_cli_vocabulary() {
        for (name, text) in [
            (MethodName::Ce, "\"ce\""),
            (MethodName::CeEarlyStop, "\"ce_early_stop\""),
            (MethodName::Sat, "\"sat\""),
            (MethodName::Mixup, "\"mixup\""),
            (MethodName::Sam, "\"sam\""),
        ] {
            let parsed: MethodName = serde_json::from_str(text).unwrap();
            assert_eq!(parsed, name);
            assert_eq!(serde_json::to_string(&name).unwrap(), text);
        }
    }
}
