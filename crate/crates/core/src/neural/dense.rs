//! Fully connected layer with exact analytic gradients.

use rand_chacha::rand_core::RngCore;

use super::linalg::{matmul_nn, matmul_nt, matmul_tn};
use super::rng::uniform_symmetric;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Weights `[out, in]` (row per output unit) and bias `[out]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Tensor::zeros(&[output, input]),
            b: Tensor::zeros(&[output]),
        }
    }

    /// Scaled-uniform fan-in init (He-style bound for ReLU stacks).
    pub fn init(input: usize, output: usize, rng: &mut impl RngCore) -> Self {
        let bound = (6.0 / input as f64).sqrt();
        let mut w = Tensor::zeros(&[output, input]);
        for v in w.data_mut() {
            *v = uniform_symmetric(rng, bound);
        }
        Dense {
            w,
            b: Tensor::zeros(&[output]),
        }
    }

    pub fn input_width(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn output_width(&self) -> usize {
        self.w.shape()[0]
    }

    /// `y = x W^T + b` for a batch `x: [batch, in]`.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let (batch, width) = as_batch(x)?;
        if width != self.input_width() {
            return Err(Error::Shape(format!(
                "dense: input width {width} does not match weight columns {}",
                self.input_width()
            )));
        }
        x.check_finite("dense input")?;
        let out = self.output_width();
        let mut y = Tensor::zeros(&[batch, out]);
        matmul_nt(x.data(), self.w.data(), y.data_mut(), batch, width, out);
        for row in 0..batch {
            let yr = &mut y.data_mut()[row * out..(row + 1) * out];
            for (v, b) in yr.iter_mut().zip(self.b.data()) {
                *v += b;
            }
        }
        Ok(y)
    }

    /// Given the layer input and the upstream gradient dL/dy, return
    /// (dL/dx, parameter gradients). All gradients are exact.
    pub fn backprop(&self, x: &Tensor, upstream: &Tensor) -> Result<(Tensor, DenseGrads)> {
        let (batch, width) = as_batch(x)?;
        let (gbatch, gwidth) = as_batch(upstream)?;
        let out = self.output_width();
        if width != self.input_width() || gbatch != batch || gwidth != out {
            return Err(Error::Shape(format!(
                "dense backprop: x {:?}, upstream {:?}, weights {:?}",
                x.shape(),
                upstream.shape(),
                self.w.shape()
            )));
        }
        // dX[batch, in] = dY[batch, out] * W[out, in]
        let mut dx = Tensor::zeros(&[batch, width]);
        matmul_nn(upstream.data(), self.w.data(), dx.data_mut(), batch, out, width);
        // dW[out, in] = dY^T[out, batch] * X[batch, in]
        let mut dw = Tensor::zeros(&[out, width]);
        matmul_tn(upstream.data(), x.data(), dw.data_mut(), batch, out, width, false);
        let mut db = Tensor::zeros(&[out]);
        for row in 0..batch {
            let ur = &upstream.data()[row * out..(row + 1) * out];
            for (d, u) in db.data_mut().iter_mut().zip(ur) {
                *d += u;
            }
        }
        Ok((dx, DenseGrads { w: dw, b: db }))
    }
}

/// Interpret a tensor as `[batch, width]`; a bare vector is one row.
pub fn as_batch(t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [w] => Ok((1, *w)),
        [b, w] => Ok((*b, *w)),
        other => Err(Error::Shape(format!("expected 1-D or 2-D tensor, got {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut layer = Dense::zeros(3, 3);
        for i in 0..3 {
            layer.w.data_mut()[i * 3 + i] = 1.0;
        }
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 0.5, 3.0, 4.0, -1.0]).unwrap();
        let y = layer.apply(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = Dense::init(4, 2, &mut rng);
        let x = Tensor::from_vec(&[3, 4], (0..12).map(|i| i as f64).collect()).unwrap();
        let up = Tensor::zeros(&[3, 2]);
        let (dx, grads) = layer.backprop(&x, &up).unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
        assert!(grads.w.data().iter().all(|&v| v == 0.0));
        assert!(grads.b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let layer = Dense::zeros(4, 2);
        let x = Tensor::zeros(&[3, 5]);
        assert!(layer.apply(&x).is_err());
    }
}
