use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backward::{add_l2_gradient, ensure_finite, sample_gradient};
use super::layers::{forward, GraphInput, Readout};
use super::loss::ClassWeighting;
use super::metrics::{Metrics, MulticlassMetrics};
use super::optim::Adam;
use super::params::ModelParams;
use super::NnError;

/// A graph with its detection target (0/1) and CWE class index.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub id: String,
    pub input: GraphInput,
    pub target: usize,
    pub cwe: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 coefficient.
    pub lambda: f64,
    pub seed: u64,
    pub gamma: f64,
    /// `None` picks the benign share of the training split.
    pub alpha: Option<f64>,
    /// Weight vulnerable classes by `alpha` and benign by `1 - alpha`.
    pub balanced: bool,
    pub readout: Readout,
    /// Sum per-sample gradients in sample order rather than in rayon's
    /// reduction tree.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-4,
            epochs: 100,
            batch_size: 32,
            lambda: 1e-4,
            seed: 0,
            gamma: 2.0,
            alpha: None,
            balanced: true,
            readout: Readout::Mean,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |what: &str| Err(NnError::InvalidConfig(format!("invalid training setting: {what}")));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma");
        }
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return bad("alpha must lie in [0, 1]");
            }
        }
        Ok(())
    }

    /// Class weighting for a training split.
    pub fn weighting(&self, train: &[PreparedSample]) -> ClassWeighting {
        let alpha = self.alpha.unwrap_or_else(|| inverse_ratio_alpha(train));
        if self.balanced || self.alpha.is_none() {
            ClassWeighting::Balanced { alpha }
        } else {
            ClassWeighting::Uniform { alpha }
        }
    }
}

/// `n_neg / (n_pos + n_neg)`, or 0.5 for an empty split.
pub fn inverse_ratio_alpha(samples: &[PreparedSample]) -> f64 {
    if samples.is_empty() {
        return 0.5;
    }
    let neg = samples.iter().filter(|s| s.target == 0).count();
    neg as f64 / samples.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Detection loss summed over the epoch's samples.
    pub detection: f64,
    /// CWE loss summed over the epoch's samples.
    pub description: f64,
    /// `lambda/2 * sum ||W||^2` at the end of the epoch.
    pub regularizer: f64,
    pub val: Option<Metrics>,
}

pub const LOG_HEADER: &str = "epoch\tl1\tl2\treg\tval_acc\tval_prec\tval_rec\tval_f1";

pub fn log_line(e: &EpochLog) -> String {
    let mut s = format!(
        "{}\t{:.4}\t{:.4}\t{:.4}",
        e.epoch, e.detection, e.description, e.regularizer
    );
    match &e.val {
        Some(m) => {
            let _ = write!(
                s,
                "\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                m.accuracy, m.precision, m.recall, m.f1
            );
        }
        None => s.push_str("\t-\t-\t-\t-"),
    }
    s
}

pub fn log_tsv(log: &[EpochLog]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for e in log {
        s.push_str(&log_line(e));
        s.push('\n');
    }
    s
}

/// Detection and CWE predictions for every sample, in order.
pub fn predict_labels(
    params: &ModelParams,
    samples: &[PreparedSample],
    readout: Readout,
) -> Result<Vec<(usize, usize)>, NnError> {
    samples
        .par_iter()
        .map(|s| {
            let out = forward(&s.input, params, readout)?;
            let det = out.det_probs();
            let cwe = out.cwe_probs();
            Ok((usize::from(det[1] > det[0]), argmax(cwe.as_slice().unwrap_or(&[]))))
        })
        .collect()
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Metrics over a split. `cwe_labels` adds the multiclass report.
pub fn evaluate(
    params: &ModelParams,
    samples: &[PreparedSample],
    readout: Readout,
    cwe_labels: Option<&[String]>,
) -> Result<Metrics, NnError> {
    if samples.is_empty() {
        return Err(NnError::ShapeMismatch("cannot evaluate an empty split".into()));
    }
    let preds = predict_labels(params, samples, readout)?;
    let det_pred: Vec<usize> = preds.iter().map(|p| p.0).collect();
    let det_true: Vec<usize> = samples.iter().map(|s| s.target).collect();
    let mut m = Metrics::binary(&det_pred, &det_true);
    if let Some(labels) = cwe_labels {
        let cwe_pred: Vec<usize> = preds.iter().map(|p| p.1).collect();
        let cwe_true: Vec<usize> = samples.iter().map(|s| s.cwe).collect();
        m.cwe = Some(MulticlassMetrics::new(labels, &cwe_pred, &cwe_true));
    }
    Ok(m)
}

struct BatchResult {
    detection: f64,
    description: f64,
    grad: ModelParams,
}

fn batch_gradient(
    params: &ModelParams,
    batch: &[&PreparedSample],
    cfg: &TrainConfig,
    weighting: &ClassWeighting,
) -> Result<BatchResult, NnError> {
    let per_sample = |s: &&PreparedSample| {
        sample_gradient(&s.input, s.target, s.cwe, params, cfg.readout, weighting, cfg.gamma)
    };
    let merge = |mut a: BatchResult, (l1, l2, g): (f64, f64, ModelParams)| {
        a.detection += l1;
        a.description += l2;
        a.grad.add_scaled(1.0, &g);
        a
    };
    let empty = || BatchResult {
        detection: 0.0,
        description: 0.0,
        grad: params.zeros_like(),
    };
    if cfg.deterministic {
        let parts: Vec<_> = batch.par_iter().map(per_sample).collect::<Result<_, _>>()?;
        Ok(parts.into_iter().fold(empty(), merge))
    } else {
        batch
            .par_iter()
            .map(per_sample)
            .try_fold(empty, |acc, r| r.map(|x| merge(acc, x)))
            .try_reduce(empty, |mut a, b| {
                a.detection += b.detection;
                a.description += b.description;
                a.grad.add_scaled(1.0, &b.grad);
                Ok(a)
            })
    }
}

/// Mini-batch Adam on the summed multitask loss. Each batch applies the L2
/// gradient once. `on_epoch` sees every log entry as it is produced.
pub fn train(
    mut params: ModelParams,
    train_set: &[PreparedSample],
    val_set: &[PreparedSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(ModelParams, Vec<EpochLog>), NnError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(NnError::ShapeMismatch("training split is empty".into()));
    }
    let weighting = cfg.weighting(train_set);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&params, cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut l1, mut l2) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&PreparedSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let mut r = batch_gradient(&params, &batch, cfg, &weighting)?;
            add_l2_gradient(&mut r.grad, &params, cfg.lambda);
            ensure_finite(&r.grad)?;
            adam.step(&mut params, &r.grad)?;
            l1 += r.detection;
            l2 += r.description;
        }
        let val = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(&params, val_set, cfg.readout, None)?)
        };
        let entry = EpochLog {
            epoch,
            detection: l1,
            description: l2,
            regularizer: 0.5 * cfg.lambda * params.squared_weight_norm(),
            val,
        };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok((params, log))
}
