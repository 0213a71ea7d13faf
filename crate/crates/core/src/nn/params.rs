use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

pub const DEFAULT_HIDDEN: usize = 128;
pub const DEFAULT_CLASSES: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Node feature width.
    pub input: usize,
    pub hidden: usize,
    /// CWE head width; class 0 is "benign".
    pub classes: usize,
}

/// Trainable tensors. Biases are `1 × k` rows. The same struct doubles as a
/// gradient or optimizer-moment container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w_in: Array2<f64>,
    pub b_in: Array2<f64>,
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub w_det: Array2<f64>,
    pub b_det: Array2<f64>,
    pub w_cwe: Array2<f64>,
    pub b_cwe: Array2<f64>,
    /// Lookup-table embedding rows, when that provider is in use.
    pub embedding: Option<Array2<f64>>,
}

/// Names of the tensors in storage order.
pub const TENSOR_NAMES: [&str; 9] = [
    "w_in",
    "b_in",
    "w1",
    "w2",
    "w_det",
    "b_det",
    "w_cwe",
    "b_cwe",
    "embedding",
];

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let ModelDims {
            input: d,
            hidden: h,
            classes: c,
        } = dims;
        ModelParams {
            w_in: Array2::zeros((d, h)),
            b_in: Array2::zeros((1, h)),
            w1: Array2::zeros((h, h)),
            w2: Array2::zeros((h, h)),
            w_det: Array2::zeros((h, 2)),
            b_det: Array2::zeros((1, 2)),
            w_cwe: Array2::zeros((h, c)),
            b_cwe: Array2::zeros((1, c)),
            embedding: None,
        }
    }

    /// Glorot-uniform weights from `seed`, zero biases.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(dims);
        for w in [&mut p.w_in, &mut p.w1, &mut p.w2, &mut p.w_det, &mut p.w_cwe] {
            let (fan_in, fan_out) = w.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.mapv_inplace(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit);
        }
        p
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input: self.w_in.nrows(),
            hidden: self.w_in.ncols(),
            classes: self.w_cwe.ncols(),
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Array2<f64>)> {
        let mut v = vec![
            ("w_in", &self.w_in),
            ("b_in", &self.b_in),
            ("w1", &self.w1),
            ("w2", &self.w2),
            ("w_det", &self.w_det),
            ("b_det", &self.b_det),
            ("w_cwe", &self.w_cwe),
            ("b_cwe", &self.b_cwe),
        ];
        if let Some(e) = &self.embedding {
            v.push(("embedding", e));
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Array2<f64>)> {
        let mut v = vec![
            ("w_in", &mut self.w_in),
            ("b_in", &mut self.b_in),
            ("w1", &mut self.w1),
            ("w2", &mut self.w2),
            ("w_det", &mut self.w_det),
            ("b_det", &mut self.b_det),
            ("w_cwe", &mut self.w_cwe),
            ("b_cwe", &mut self.b_cwe),
        ];
        if let Some(e) = &mut self.embedding {
            v.push(("embedding", e));
        }
        v
    }

    /// Weight matrices covered by the L2 penalty (biases and the embedding
    /// table excluded).
    pub fn weights(&self) -> [&Array2<f64>; 5] {
        [&self.w_in, &self.w1, &self.w2, &self.w_det, &self.w_cwe]
    }

    pub fn squared_weight_norm(&self) -> f64 {
        self.weights().iter().map(|w| w.iter().map(|x| x * x).sum::<f64>()).sum()
    }

    /// Zero tensors with this model's shapes.
    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(self.dims());
        z.embedding = self.embedding.as_ref().map(|e| Array2::zeros(e.dim()));
        z
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, scale: f64, other: &ModelParams) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.scaled_add(scale, src);
        }
    }

    /// First non-finite tensor, if any.
    pub fn non_finite(&self) -> Option<&'static str> {
        self.tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|v| !v.is_finite()))
            .map(|(name, _)| name)
    }

    pub fn check_shapes(&self) -> Result<(), NnError> {
        let ModelDims {
            input: d,
            hidden: h,
            classes: c,
        } = self.dims();
        let expect = [
            ("b_in", (1, h)),
            ("w1", (h, h)),
            ("w2", (h, h)),
            ("w_det", (h, 2)),
            ("b_det", (1, 2)),
            ("w_cwe", (h, c)),
            ("b_cwe", (1, c)),
        ];
        for (name, t) in self.tensors() {
            if let Some((_, shape)) = expect.iter().find(|(n, _)| *n == name) {
                if t.dim() != *shape {
                    return Err(NnError::ShapeMismatch(format!(
                        "{name} is {:?}, expected {:?}",
                        t.dim(),
                        shape
                    )));
                }
            }
        }
        if let Some(e) = &self.embedding {
            if e.ncols() != d {
                return Err(NnError::ShapeMismatch(format!(
                    "embedding width {} does not match input width {d}",
                    e.ncols()
                )));
            }
        }
        Ok(())
    }
}
