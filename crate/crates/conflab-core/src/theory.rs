//! Numerical laboratory for variance-optimal loss reweighting.
//!
//! Training points are modelled as in-distribution with probability `p_i` and
//! noise otherwise, with the out-of-distribution loss mean normalized to 0.
//! For weights `q` the loss estimator is
//!
//! ```text
//! sum_i q_i * loss_i / sum_i p_i * q_i
//! ```
//!
//! Its variance in closed form is `v * ||q||^2 / (sum_i p_i q_i)^2` when every
//! per-point loss has variance `v`, which is minimized over fixed `||q||` by
//! `q_i` proportional to `p_i`. [`variance_sweep`] checks the closed form
//! against simulation, and [`label_update_probability`] evaluates the
//! Beta-tail mass that drives the mixup label-correction gate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
// Redundant whenever std is in the crate graph (tests), required for the
// plain no_std build.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{seeded_stream, stream};
use crate::special::reg_inc_beta;

/// One reweighting scenario: in-distribution probabilities, a common
/// per-point loss variance, and the in-distribution loss mean. The
/// out-of-distribution loss mean is fixed at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingScenario {
    pub in_dist_probs: Vec<f64>,
    pub loss_variance: f64,
    pub in_dist_loss_mean: f64,
}

impl WeightingScenario {
    pub fn validate(&self) -> Result<()> {
        if self.in_dist_probs.is_empty() {
            return Err(Error::InvalidArgument(String::from(
                "scenario needs at least one point",
            )));
        }
        if self.in_dist_probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidArgument(String::from(
                "in-distribution probabilities must lie in (0, 1]",
            )));
        }
        if !(self.loss_variance > 0.0) || !self.in_dist_loss_mean.is_finite() {
            return Err(Error::InvalidArgument(String::from(
                "loss variance must be positive and the mean finite",
            )));
        }
        Ok(())
    }
}

fn check_lengths(q: &[f64], p: &[f64]) -> Result<()> {
    if q.len() != p.len() || q.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} weights", p.len()),
            got: format!("{}", q.len()),
        });
    }
    if q.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(String::from(
            "weights must be positive and finite",
        )));
    }
    Ok(())
}

/// The weighted loss estimator `sum(q_i * loss_i) / sum(p_i * q_i)`.
pub fn mc_estimate(losses: &[f64], q: &[f64], p: &[f64]) -> Result<f64> {
    check_lengths(q, p)?;
    if losses.len() != q.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} losses", q.len()),
            got: format!("{}", losses.len()),
        });
    }
    let denom: f64 = p.iter().zip(q).map(|(&pi, &qi)| pi * qi).sum();
    if denom <= 0.0 {
        return Err(Error::InvalidArgument(String::from(
            "sum of p_i * q_i must be positive",
        )));
    }
    let numer: f64 = losses.iter().zip(q).map(|(&li, &qi)| li * qi).sum();
    Ok(numer / denom)
}

/// Closed-form estimator variance `v * ||q||^2 / (sum_i p_i q_i)^2`.
pub fn closed_form_variance(q: &[f64], p: &[f64], v: f64) -> Result<f64> {
    check_lengths(q, p)?;
    if !(v > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "loss variance {v} must be positive"
        )));
    }
    let denom: f64 = p.iter().zip(q).map(|(&pi, &qi)| pi * qi).sum();
    if denom <= 0.0 {
        return Err(Error::InvalidArgument(String::from(
            "sum of p_i * q_i must be positive",
        )));
    }
    let q_norm_sq: f64 = q.iter().map(|&qi| qi * qi).sum();
    Ok(v * q_norm_sq / (denom * denom))
}

/// The variance-minimizing weights: `p` normalized to unit L2 norm.
pub fn optimal_weights(p: &[f64]) -> Vec<f64> {
    assert!(!p.is_empty(), "optimal_weights needs at least one point");
    let norm = p.iter().map(|&v| v * v).sum::<f64>().sqrt();
    p.iter().map(|&v| v / norm).collect()
}

/// One candidate's row in a [`variance_sweep`] result.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub q: Vec<f64>,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub closed_form_variance: f64,
}

/// Simulates the estimator for every candidate weighting and reports the
/// sample variance next to the closed form.
///
/// Per trial, point `i` is in-distribution with probability `p_i` and its
/// loss is drawn `Normal(in_dist_loss_mean, sqrt(v))`, otherwise
/// `Normal(0, sqrt(v))`. All candidates are evaluated on the same draws.
pub fn variance_sweep(
    scenario: &WeightingScenario,
    candidate_qs: &[Vec<f64>],
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    scenario.validate()?;
    if trials < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "variance_sweep needs at least 10^4 trials, got {trials}"
        )));
    }
    for q in candidate_qs {
        check_lengths(q, &scenario.in_dist_probs)?;
    }

    let p = &scenario.in_dist_probs;
    let n = p.len();
    let sd = scenario.loss_variance.sqrt();
    let noise = Normal::new(0.0, sd).expect("finite scale");
    let mut rng = seeded_stream(seed, stream::SIMULATION);

    // Welford accumulators per candidate.
    let mut means = alloc::vec![0.0; candidate_qs.len()];
    let mut m2s = alloc::vec![0.0; candidate_qs.len()];
    let mut losses = alloc::vec![0.0; n];

    for t in 0..trials {
        for (i, loss) in losses.iter_mut().enumerate() {
            let in_dist = rng.random::<f64>() < p[i];
            let mean = if in_dist {
                scenario.in_dist_loss_mean
            } else {
                0.0
            };
            *loss = mean + noise.sample(&mut rng);
        }
        for (c, q) in candidate_qs.iter().enumerate() {
            let est = mc_estimate(&losses, q, p)?;
            let delta = est - means[c];
            means[c] += delta / (t + 1) as f64;
            m2s[c] += delta * (est - means[c]);
        }
    }

    Ok(candidate_qs
        .iter()
        .enumerate()
        .map(|(c, q)| SweepRow {
            q: q.clone(),
            empirical_mean: means[c],
            empirical_variance: m2s[c] / (trials - 1) as f64,
            closed_form_variance: closed_form_variance(q, p, scenario.loss_variance)
                .expect("validated above"),
        })
        .collect())
}

/// Probability that a `Beta(mix_alpha, mix_alpha)` draw lands outside
/// `[gamma, 1 - gamma]`, i.e. the chance a mixed example fires the
/// label-correction gate for either parent.
///
/// Evaluates `1 - [I_{1-gamma}(a, a) - I_gamma(a, a)]`, which by symmetry
/// equals `2 * I_gamma(a, a)`.
pub fn label_update_probability(mix_alpha: f64, gamma: f64) -> Result<f64> {
    if !(mix_alpha > 0.0) || !mix_alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "mix_alpha {mix_alpha} must be positive"
        )));
    }
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "gamma {gamma} must lie in (0, 0.5]"
        )));
    }
    let lower = reg_inc_beta(mix_alpha, mix_alpha, gamma)?;
    let upper = reg_inc_beta(mix_alpha, mix_alpha, 1.0 - gamma)?;
    Ok(1.0 - (upper - lower))
}
