//! Residual two-layer GCN with a detection head and a CWE head, trained on
//! summed focal losses with Adam.

mod backward;
pub mod checkpoint;
mod layers;
mod loss;
mod metrics;
mod model;
mod optim;
mod params;
mod train;


use thiserror::Error;

pub use backward::{add_l2_gradient, ensure_finite, sample_gradient};
pub use layers::{forward, gcn_layer, relu, softmax, ForwardCache, ForwardOutput, GraphInput, NodeFeatures, Readout};
pub use loss::{
    focal_loss, focal_loss_and_logit_grad, total_loss, ClassWeighting, FocalConfig, LossParts,
    ScoredSample, PROB_EPS,
};
pub use metrics::{BinaryCounts, Metrics, MulticlassMetrics};
pub use model::{cwe_label_set, EdgeCitation, Model, ModelHeader, Prediction, BENIGN_LABEL};
pub use optim::{Adam, ADAM_EPS, BETA1, BETA2};
pub use params::{ModelDims, ModelParams, DEFAULT_CLASSES, DEFAULT_HIDDEN, TENSOR_NAMES};
pub use train::{
    argmax, evaluate, inverse_ratio_alpha, log_line, log_tsv, predict_labels, train, EpochLog,
    PreparedSample, TrainConfig, LOG_HEADER,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid setting: {0}")]
    InvalidConfig(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("non-finite gradient in tensor `{0}`")]
    NonFiniteGradient(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
