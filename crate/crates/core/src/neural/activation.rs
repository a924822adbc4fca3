//! Elementwise activations with exact backward rules.

use super::tensor::Tensor;
use crate::error::Result;

pub fn relu_apply(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Gradient uses the layer input; d relu/dx = 1 for x > 0 else 0.
pub fn relu_backprop(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    debug_assert_eq!(x.shape(), upstream.shape());
    let mut g = upstream.clone();
    for (gv, xv) in g.data_mut().iter_mut().zip(x.data()) {
        if *xv <= 0.0 {
            *gv = 0.0;
        }
    }
    Ok(g)
}

pub fn sigmoid_apply(x: &Tensor) -> Tensor {
    x.map(sigmoid)
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Gradient in terms of the cached output `y = sigmoid(x)`: `y (1 - y)`.
pub fn sigmoid_backprop(output: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    debug_assert_eq!(output.shape(), upstream.shape());
    let mut g = upstream.clone();
    for (gv, yv) in g.data_mut().iter_mut().zip(output.data()) {
        *gv *= yv * (1.0 - yv);
    }
    Ok(g)
}
