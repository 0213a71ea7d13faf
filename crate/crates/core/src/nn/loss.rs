use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::NnError;

pub const PROB_EPS: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalConfig {
    pub alpha: f64,
    pub gamma: f64,
}

impl FocalConfig {
    /// Plain cross-entropy.
    pub const CROSS_ENTROPY: FocalConfig = FocalConfig {
        alpha: 1.0,
        gamma: 0.0,
    };

    pub fn validate(&self) -> Result<(), NnError> {
        if !(0.0..=1.0).contains(&self.alpha) || !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(NnError::InvalidConfig(format!(
                "focal parameters out of range: alpha={} gamma={}",
                self.alpha, self.gamma
            )));
        }
        Ok(())
    }
}

/// Per-class weighting applied during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ClassWeighting {
    /// The same `alpha` for every class.
    Uniform { alpha: f64 },
    /// `alpha` on vulnerable classes, `1 - alpha` on the benign class.
    Balanced { alpha: f64 },
}

impl ClassWeighting {
    /// Weight for class `y`, where class 0 is benign.
    pub fn alpha_for(&self, y: usize) -> f64 {
        match *self {
            ClassWeighting::Uniform { alpha } => alpha,
            ClassWeighting::Balanced { alpha } => {
                if y == 0 {
                    1.0 - alpha
                } else {
                    alpha
                }
            }
        }
    }

    /// Weight for every CWE class. Balanced weighting applies to the
    /// detection head only; the CWE head then uses 1.
    pub fn cwe_alpha(&self) -> f64 {
        match *self {
            ClassWeighting::Uniform { alpha } => alpha,
            ClassWeighting::Balanced { .. } => 1.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            ClassWeighting::Uniform { alpha } | ClassWeighting::Balanced { alpha } => alpha,
        }
    }
}

fn check_simplex(p: &Array1<f64>, y: usize) -> Result<(), NnError> {
    if y >= p.len() {
        return Err(NnError::ShapeMismatch(format!(
            "class {y} outside a {}-class distribution",
            p.len()
        )));
    }
    let s = p.sum();
    if !s.is_finite() || (s - 1.0).abs() > SIMPLEX_TOL || p.iter().any(|&v| v < 0.0) {
        return Err(NnError::InvalidDistribution(format!(
            "probabilities sum to {s}"
        )));
    }
    Ok(())
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `-alpha * (1 - p_t)^gamma * ln p_t` with `p_t` clamped to `[eps, 1 - eps]`.
pub fn focal_loss(p: &Array1<f64>, y: usize, cfg: &FocalConfig) -> Result<f64, NnError> {
    check_simplex(p, y)?;
    let pt = clamp_p(p[y]);
    Ok(-cfg.alpha * (1.0 - pt).powf(cfg.gamma) * pt.ln())
}

/// d(loss)/d(p_t), zero where the clamp is active.
fn focal_dp(p_raw: f64, alpha: f64, gamma: f64) -> f64 {
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p_raw) {
        return 0.0;
    }
    let q = 1.0 - p_raw;
    let modulating = if gamma == 0.0 { 0.0 } else { gamma * q.powf(gamma - 1.0) * p_raw.ln() };
    alpha * (modulating - q.powf(gamma) / p_raw)
}

/// Loss and its gradient with respect to the logits that produced `p`.
pub fn focal_loss_and_logit_grad(
    p: &Array1<f64>,
    y: usize,
    alpha: f64,
    gamma: f64,
) -> Result<(f64, Array1<f64>), NnError> {
    let loss = focal_loss(p, y, &FocalConfig { alpha, gamma })?;
    let scale = focal_dp(p[y], alpha, gamma) * p[y];
    let mut grad = p.mapv(|pj| -scale * pj);
    grad[y] += scale;
    Ok((loss, grad))
}

/// Loss components over a set of samples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub detection: f64,
    pub description: f64,
    pub regularizer: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.detection + self.description + self.regularizer
    }
}

/// One sample's predicted distributions and labels.
#[derive(Debug, Clone)]
pub struct ScoredSample {
    pub det_probs: Array1<f64>,
    pub cwe_probs: Array1<f64>,
    pub target: usize,
    pub cwe: usize,
}

/// Summed focal losses on both heads plus `lambda/2 * sum ||W||^2`.
pub fn total_loss(
    batch: &[ScoredSample],
    params: &ModelParams,
    weighting: &ClassWeighting,
    gamma: f64,
    lambda: f64,
) -> Result<LossParts, NnError> {
    let mut parts = LossParts::default();
    for s in batch {
        let det = FocalConfig {
            alpha: weighting.alpha_for(s.target),
            gamma,
        };
        let cwe = FocalConfig {
            alpha: weighting.cwe_alpha(),
            gamma,
        };
        parts.detection += focal_loss(&s.det_probs, s.target, &det)?;
        parts.description += focal_loss(&s.cwe_probs, s.cwe, &cwe)?;
    }
    parts.regularizer = 0.5 * lambda * params.squared_weight_norm();
    Ok(parts)
}
