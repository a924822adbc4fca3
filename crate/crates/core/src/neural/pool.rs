//! 2x2 max pooling with stride 2.

use super::conv::dims4;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Halve both spatial dimensions; requires even height and width.
pub fn maxpool_apply(x: &Tensor) -> Result<Tensor> {
    let [batch, c, h, w] = dims4(x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!(
            "maxpool: spatial dims must be even, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut y = Tensor::zeros(&[batch, c, oh, ow]);
    let yd = y.data_mut();
    let xd = x.data();
    for bc in 0..batch * c {
        let src = &xd[bc * h * w..(bc + 1) * h * w];
        let dst = &mut yd[bc * oh * ow..(bc + 1) * oh * ow];
        for r in 0..oh {
            for cc in 0..ow {
                let base = 2 * r * w + 2 * cc;
                let mut best = src[base];
                for &off in &[1, w, w + 1] {
                    if src[base + off] > best {
                        best = src[base + off];
                    }
                }
                dst[r * ow + cc] = best;
            }
        }
    }
    Ok(y)
}

/// Route the upstream gradient to the argmax of each window; ties break to
/// the first index in scan order (top-left, top-right, bottom-left,
/// bottom-right).
pub fn maxpool_backprop(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    let [batch, c, h, w] = dims4(x)?;
    let [ub, uc, uh, uw] = dims4(upstream)?;
    if ub != batch || uc != c || uh != h / 2 || uw != w / 2 {
        return Err(Error::Shape(format!(
            "maxpool backprop: upstream {:?} does not match input {:?}",
            upstream.shape(),
            x.shape()
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut dx = Tensor::zeros(&[batch, c, h, w]);
    let dd = dx.data_mut();
    let xd = x.data();
    let ud = upstream.data();
    for bc in 0..batch * c {
        let src = &xd[bc * h * w..(bc + 1) * h * w];
        let grad = &ud[bc * oh * ow..(bc + 1) * oh * ow];
        let out = &mut dd[bc * h * w..(bc + 1) * h * w];
        for r in 0..oh {
            for cc in 0..ow {
                let base = 2 * r * w + 2 * cc;
                let mut best_off = 0;
                let mut best = src[base];
                for &off in &[1, w, w + 1] {
                    if src[base + off] > best {
                        best = src[base + off];
                        best_off = off;
                    }
                }
                out[base + best_off] += grad[r * ow + cc];
            }
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_stays_constant() {
        let x = Tensor::from_vec(&[1, 1, 4, 4], vec![3.5; 16]).unwrap();
        let y = maxpool_apply(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn three_pools_take_64_to_8() {
        let mut t = Tensor::zeros(&[1, 1, 64, 64]);
        for _ in 0..3 {
            t = maxpool_apply(&t).unwrap();
        }
        assert_eq!(t.shape(), &[1, 1, 8, 8]);
    }

    #[test]
    fn odd_dims_rejected() {
        let x = Tensor::zeros(&[1, 1, 5, 4]);
        assert!(matches!(maxpool_apply(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn ties_route_to_first_index() {
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let up = Tensor::from_vec(&[1, 1, 1, 1], vec![2.0]).unwrap();
        let dx = maxpool_backprop(&x, &up).unwrap();
        assert_eq!(dx.data(), &[2.0, 0.0, 0.0, 0.0]);
    }
}
