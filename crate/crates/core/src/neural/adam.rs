//! Adam optimizer with bias correction, one state per parameter tensor.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Tensor,
    v: Tensor,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(shape: &[usize], lr: f64) -> Self {
        AdamState {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update in place.
    pub fn step(&mut self, params: &mut Tensor, grads: &Tensor) -> Result<()> {
        if params.shape() != self.m.shape() || grads.shape() != self.m.shape() {
            return Err(Error::Shape(format!(
                "adam: params {:?}, grads {:?}, state {:?}",
                params.shape(),
                grads.shape(),
                self.m.shape()
            )));
        }
        if grads.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Optimizer(format!(
                "non-finite gradient at step {}",
                self.step + 1
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let md = self.m.data_mut();
        let vd = self.v.data_mut();
        let pd = params.data_mut();
        let gd = grads.data();
        for i in 0..pd.len() {
            let g = gd[i];
            md[i] = b1 * md[i] + (1.0 - b1) * g;
            vd[i] = b2 * vd[i] + (1.0 - b2) * g * g;
            let mhat = md[i] / bc1;
            let vhat = vd[i] / bc2;
            pd[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
        Ok(())
    }
}
