use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::svg::NormalizedAdjacency;

use super::params::ModelParams;
use super::NnError;

/// How node states are pooled into one graph vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    #[default]
    Mean,
    /// State of the `<s>` node (row 0).
    Start,
}

impl Readout {
    pub fn name(self) -> &'static str {
        match self {
            Readout::Mean => "mean",
            Readout::Start => "start",
        }
    }
}

impl std::str::FromStr for Readout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Readout::Mean),
            "start" => Ok(Readout::Start),
            other => Err(format!("unknown readout `{other}` (expected mean or start)")),
        }
    }
}

/// Node features: either precomputed rows or indices into the trainable
/// embedding table.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeFeatures {
    Dense(Array2<f64>),
    Indices(Vec<usize>),
}

/// One graph ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub adjacency: NormalizedAdjacency,
    pub features: NodeFeatures,
}

impl GraphInput {
    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    /// Relabel node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> GraphInput {
        let features = match &self.features {
            NodeFeatures::Dense(x) => {
                let mut out = Array2::zeros(x.dim());
                for (i, &p) in perm.iter().enumerate() {
                    out.row_mut(p).assign(&x.row(i));
                }
                NodeFeatures::Dense(out)
            }
            NodeFeatures::Indices(idx) => {
                let mut out = vec![0; idx.len()];
                for (i, &p) in perm.iter().enumerate() {
                    out[p] = idx[i];
                }
                NodeFeatures::Indices(out)
            }
        };
        GraphInput {
            adjacency: self.adjacency.permuted(perm),
            features,
        }
    }
}

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Numerically stable softmax.
pub fn softmax(z: &Array1<f64>) -> Array1<f64> {
    let m = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = z.mapv(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

/// `ReLU(A*·H·W)`, plus `H` when `residual` is set.
pub fn gcn_layer(
    h: &ArrayView2<f64>,
    a: &NormalizedAdjacency,
    w: &Array2<f64>,
    residual: bool,
) -> Result<Array2<f64>, NnError> {
    if a.n() != h.nrows() {
        return Err(NnError::ShapeMismatch(format!(
            "adjacency is {0}x{0} but H has {1} rows",
            a.n(),
            h.nrows()
        )));
    }
    if w.nrows() != h.ncols() || (residual && w.ncols() != h.ncols()) {
        return Err(NnError::ShapeMismatch(format!(
            "W is {}x{} but H has {} columns",
            w.nrows(),
            w.ncols(),
            h.ncols()
        )));
    }
    let out = relu(&a.matmul(h).dot(w));
    Ok(if residual { out + h } else { out })
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub x: Array2<f64>,
    pub z0: Array2<f64>,
    pub h0: Array2<f64>,
    pub p1: Array2<f64>,
    pub z1: Array2<f64>,
    pub h1: Array2<f64>,
    pub p2: Array2<f64>,
    pub z2: Array2<f64>,
    pub h2: Array2<f64>,
    pub g: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub det_logits: Array1<f64>,
    pub cwe_logits: Array1<f64>,
    pub cache: ForwardCache,
}

impl ForwardOutput {
    pub fn det_probs(&self) -> Array1<f64> {
        softmax(&self.det_logits)
    }

    pub fn cwe_probs(&self) -> Array1<f64> {
        softmax(&self.cwe_logits)
    }

    pub fn node_states(&self) -> &Array2<f64> {
        &self.cache.h2
    }
}

fn gather_features(input: &GraphInput, params: &ModelParams) -> Result<Array2<f64>, NnError> {
    let d = params.w_in.nrows();
    let x = match &input.features {
        NodeFeatures::Dense(x) => x.clone(),
        NodeFeatures::Indices(idx) => {
            let table = params.embedding.as_ref().ok_or_else(|| {
                NnError::ShapeMismatch("index features need an embedding table".into())
            })?;
            if let Some(&bad) = idx.iter().find(|&&i| i >= table.nrows()) {
                return Err(NnError::ShapeMismatch(format!(
                    "token index {bad} outside embedding table of {} rows",
                    table.nrows()
                )));
            }
            table.select(Axis(0), idx)
        }
    };
    if x.nrows() != input.n() {
        return Err(NnError::ShapeMismatch(format!(
            "{} feature rows for {} graph nodes",
            x.nrows(),
            input.n()
        )));
    }
    if x.ncols() != d {
        return Err(NnError::ShapeMismatch(format!(
            "feature width {} does not match model input width {d}",
            x.ncols()
        )));
    }
    Ok(x)
}

pub fn forward(
    input: &GraphInput,
    params: &ModelParams,
    readout: Readout,
) -> Result<ForwardOutput, NnError> {
    params.check_shapes()?;
    let n = input.n();
    if n == 0 {
        return Err(NnError::ShapeMismatch("graph has no nodes".into()));
    }
    let a = &input.adjacency;
    let x = gather_features(input, params)?;

    let z0 = x.dot(&params.w_in) + &params.b_in;
    let h0 = relu(&z0);
    let p1 = a.matmul(&h0.view());
    let z1 = p1.dot(&params.w1);
    let h1 = &h0 + &relu(&z1);
    let p2 = a.matmul(&h1.view());
    let z2 = p2.dot(&params.w2);
    let h2 = &h1 + &relu(&z2);

    let g = match readout {
        Readout::Mean => h2.sum_axis(Axis(0)) / n as f64,
        Readout::Start => h2.row(0).to_owned(),
    };
    let g2 = g.view().insert_axis(Axis(0));
    let det_logits = (g2.dot(&params.w_det) + &params.b_det).row(0).to_owned();
    let cwe_logits = (g2.dot(&params.w_cwe) + &params.b_cwe).row(0).to_owned();

    Ok(ForwardOutput {
        det_logits,
        cwe_logits,
        cache: ForwardCache {
            x,
            z0,
            h0,
            p1,
            z1,
            h1,
            p2,
            z2,
            h2,
            g,
        },
    })
}
