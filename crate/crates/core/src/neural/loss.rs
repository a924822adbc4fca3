//! Training losses and the reparameterization trick.
//!
//! Conventions:
//! - `loss_bce` is the positive mean binary cross-entropy (so every loss
//!   here is minimized),
//! - the tandem composite sums absolute field error over the response
//!   vector and adds `alpha` times the standard KL divergence to N(0, I):
//!   `KL = -1/2 sum_j (1 + log sigma_j^2 - mu_j^2 - sigma_j^2)`,
//! - batched inputs are averaged over the batch dimension.

use rand_chacha::rand_core::RngCore;

use super::dense::as_batch;
use super::rng::fill_standard_normal;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Predictions are clamped into this range before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy over all elements; targets must be exactly 0 or 1.
/// Returns (loss, d loss / d predicted).
pub fn loss_bce(predicted: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if predicted.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "bce: predicted {:?} vs target {:?}",
            predicted.shape(),
            target.shape()
        )));
    }
    if let Some(t) = target.data().iter().find(|&&t| t != 0.0 && t != 1.0) {
        return Err(Error::Domain(format!("bce target {t} outside {{0,1}}")));
    }
    let n = predicted.len() as f64;
    let mut grad = Tensor::zeros(predicted.shape());
    let mut loss = 0.0;
    for (i, (&p, &t)) in predicted.data().iter().zip(target.data()).enumerate() {
        let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        grad.data_mut()[i] = (p - t) / (p * (1.0 - p)) / n;
    }
    Ok((loss / n, grad))
}

/// Mean squared error plus L2 penalty `lambda * sum w^2` over the given
/// weight tensors. Returns (loss, d/d predicted, d/d each weight tensor).
pub fn loss_mse_l2(
    predicted: &Tensor,
    target: &Tensor,
    weights: &[&Tensor],
    lambda: f64,
) -> Result<(f64, Tensor, Vec<Tensor>)> {
    if predicted.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "mse: predicted {:?} vs target {:?}",
            predicted.shape(),
            target.shape()
        )));
    }
    if lambda < 0.0 {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = predicted.len() as f64;
    let mut grad = Tensor::zeros(predicted.shape());
    let mut loss = 0.0;
    for (i, (&p, &t)) in predicted.data().iter().zip(target.data()).enumerate() {
        let d = p - t;
        loss += d * d;
        grad.data_mut()[i] = 2.0 * d / n;
    }
    loss /= n;
    let mut wgrads = Vec::with_capacity(weights.len());
    for w in weights {
        loss += lambda * w.data().iter().map(|v| v * v).sum::<f64>();
        wgrads.push(w.map(|v| 2.0 * lambda * v));
    }
    Ok((loss, grad, wgrads))
}

/// KL divergence of N(mu, diag sigma^2) from N(0, I), summed over the latent
/// dimension, for each batch row.
pub fn kl_standard_normal(mu: &Tensor, sigma: &Tensor) -> Result<Vec<f64>> {
    if mu.shape() != sigma.shape() {
        return Err(Error::Shape("kl: mu and sigma shapes differ".into()));
    }
    if let Some(s) = sigma.data().iter().find(|&&s| s <= 0.0) {
        return Err(Error::Domain(format!("kl: sigma must be > 0, got {s}")));
    }
    let (batch, j) = as_batch(mu)?;
    let mut out = vec![0.0; batch];
    for b in 0..batch {
        let mut acc = 0.0;
        for i in 0..j {
            let m = mu.data()[b * j + i];
            let s = sigma.data()[b * j + i];
            acc += 1.0 + (s * s).ln() - m * m - s * s;
        }
        out[b] = -0.5 * acc;
    }
    Ok(out)
}

/// Gradients returned by [`loss_inn`].
pub struct InnLossGrads {
    pub d_pred: Tensor,
    pub d_mu: Tensor,
    pub d_sigma: Tensor,
}

/// Tandem composite: batch mean of `sum_m |y_m - yhat_m| + alpha * KL`.
pub fn loss_inn(
    pred_fields: &Tensor,
    true_fields: &Tensor,
    mu: &Tensor,
    sigma: &Tensor,
    alpha: f64,
) -> Result<(f64, InnLossGrads)> {
    if pred_fields.shape() != true_fields.shape() {
        return Err(Error::Shape(format!(
            "inn loss: predicted {:?} vs true {:?}",
            pred_fields.shape(),
            true_fields.shape()
        )));
    }
    let (batch, m) = as_batch(pred_fields)?;
    let (lbatch, _) = as_batch(mu)?;
    if lbatch != batch {
        return Err(Error::Shape(format!(
            "inn loss: field batch {batch} vs latent batch {lbatch}"
        )));
    }
    let kl = kl_standard_normal(mu, sigma)?;
    let bf = batch as f64;
    let mut loss = 0.0;
    let mut d_pred = Tensor::zeros(pred_fields.shape());
    for b in 0..batch {
        for i in 0..m {
            let idx = b * m + i;
            let d = pred_fields.data()[idx] - true_fields.data()[idx];
            loss += d.abs();
            d_pred.data_mut()[idx] = d.signum() / bf;
        }
        loss += alpha * kl[b];
    }
    loss /= bf;
    let d_mu = mu.map(|v| alpha * v / bf);
    let d_sigma = sigma.map(|s| alpha * (s - 1.0 / s) / bf);
    Ok((
        loss,
        InnLossGrads {
            d_pred,
            d_mu,
            d_sigma,
        },
    ))
}

/// `z = mu + sigma .* u` with `u` standard normal from the caller's stream.
pub fn reparameterize(mu: &Tensor, sigma: &Tensor, rng: &mut impl RngCore) -> Result<Tensor> {
    if mu.shape() != sigma.shape() {
        return Err(Error::Shape("reparameterize: mu and sigma shapes differ".into()));
    }
    let mut u = vec![0.0; mu.len()];
    fill_standard_normal(rng, &mut u);
    let mut z = mu.clone();
    for ((zv, sv), uv) in z.data_mut().iter_mut().zip(sigma.data()).zip(&u) {
        *zv += sv * uv;
    }
    Ok(z)
}
