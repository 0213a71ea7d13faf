use ndarray::{Array1, Array2, Axis};

use super::layers::{forward, GraphInput, NodeFeatures, Readout};
use super::loss::{focal_loss_and_logit_grad, ClassWeighting};
use super::params::ModelParams;
use super::NnError;

fn relu_mask(z: &Array2<f64>, upstream: &Array2<f64>) -> Array2<f64> {
    let mut out = upstream.clone();
    out.zip_mut_with(z, |g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    a.view().insert_axis(Axis(1)).dot(&b.view().insert_axis(Axis(0)))
}

/// Data loss of one sample and its gradient with respect to every tensor.
/// The regularizer is not included.
pub fn sample_gradient(
    input: &GraphInput,
    target: usize,
    cwe: usize,
    params: &ModelParams,
    readout: Readout,
    weighting: &ClassWeighting,
    gamma: f64,
) -> Result<(f64, f64, ModelParams), NnError> {
    let out = forward(input, params, readout)?;
    let c = &out.cache;
    let n = input.n();

    let (l1, d_det) =
        focal_loss_and_logit_grad(&out.det_probs(), target, weighting.alpha_for(target), gamma)?;
    let (l2, d_cwe) =
        focal_loss_and_logit_grad(&out.cwe_probs(), cwe, weighting.cwe_alpha(), gamma)?;

    let mut grad = params.zeros_like();
    grad.w_det = outer(&c.g, &d_det);
    grad.b_det = d_det.clone().insert_axis(Axis(0));
    grad.w_cwe = outer(&c.g, &d_cwe);
    grad.b_cwe = d_cwe.clone().insert_axis(Axis(0));

    let dg = params.w_det.dot(&d_det) + params.w_cwe.dot(&d_cwe);
    let mut dh2 = Array2::zeros(c.h2.dim());
    match readout {
        Readout::Mean => {
            let row = &dg / n as f64;
            for mut r in dh2.rows_mut() {
                r.assign(&row);
            }
        }
        Readout::Start => dh2.row_mut(0).assign(&dg),
    }

    let a = &input.adjacency;
    let dz2 = relu_mask(&c.z2, &dh2);
    grad.w2 = c.p2.t().dot(&dz2);
    let dh1 = &dh2 + &a.matmul(&dz2.dot(&params.w2.t()).view());

    let dz1 = relu_mask(&c.z1, &dh1);
    grad.w1 = c.p1.t().dot(&dz1);
    let dh0 = &dh1 + &a.matmul(&dz1.dot(&params.w1.t()).view());

    let dz0 = relu_mask(&c.z0, &dh0);
    grad.w_in = c.x.t().dot(&dz0);
    grad.b_in = dz0.sum_axis(Axis(0)).insert_axis(Axis(0));

    if let (NodeFeatures::Indices(idx), Some(table_grad)) = (&input.features, grad.embedding.as_mut()) {
        let dx = dz0.dot(&params.w_in.t());
        for (row, &i) in idx.iter().enumerate() {
            let mut dst = table_grad.row_mut(i);
            dst += &dx.row(row);
        }
    }
    Ok((l1, l2, grad))
}

/// Adds `lambda * W` to the weight gradients.
pub fn add_l2_gradient(grad: &mut ModelParams, params: &ModelParams, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    grad.w_in.scaled_add(lambda, &params.w_in);
    grad.w1.scaled_add(lambda, &params.w1);
    grad.w2.scaled_add(lambda, &params.w2);
    grad.w_det.scaled_add(lambda, &params.w_det);
    grad.w_cwe.scaled_add(lambda, &params.w_cwe);
}

pub fn ensure_finite(grad: &ModelParams) -> Result<(), NnError> {
    match grad.non_finite() {
        Some(name) => Err(NnError::NonFiniteGradient(name.to_string())),
        None => Ok(()),
    }
}
