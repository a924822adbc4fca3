//! 3x3 convolution (stride 1, zero padding 1) via im2col + GEMM.
//!
//! Spatial dimensions are preserved; downsampling happens only in the
//! pooling layers. Tensors are `[batch, channels, height, width]`.

use rand_chacha::rand_core::RngCore;

use super::linalg::{matmul_nn, matmul_nt, matmul_tn};
use super::rng::uniform_symmetric;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;
const PAD: i64 = 1;

/// Kernel `[out_c, in_c, 3, 3]`, bias `[out_c]`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub kernel: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct Conv2dGrads {
    pub kernel: Tensor,
    pub bias: Tensor,
}

/// Cached column matrix from the forward pass, reused by `backprop`.
pub struct ConvCache {
    cols: Tensor, // [batch*h*w, in_c*9]
    batch: usize,
    h: usize,
    w: usize,
}

impl Conv2d {
    pub fn zeros(in_c: usize, out_c: usize) -> Self {
        Conv2d {
            kernel: Tensor::zeros(&[out_c, in_c, KERNEL, KERNEL]),
            bias: Tensor::zeros(&[out_c]),
        }
    }

    pub fn init(in_c: usize, out_c: usize, rng: &mut impl RngCore) -> Self {
        let fan_in = (in_c * KERNEL * KERNEL) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let mut kernel = Tensor::zeros(&[out_c, in_c, KERNEL, KERNEL]);
        for v in kernel.data_mut() {
            *v = uniform_symmetric(rng, bound);
        }
        Conv2d {
            kernel,
            bias: Tensor::zeros(&[out_c]),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn apply(&self, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        let [batch, c, h, w] = dims4(x)?;
        if c != self.in_channels() {
            return Err(Error::Shape(format!(
                "conv: input has {c} channels, kernel expects {}",
                self.in_channels()
            )));
        }
        x.check_finite("conv input")?;
        let cols = im2col(x, batch, c, h, w);
        let out_c = self.out_channels();
        let rows = batch * h * w;
        let k = c * KERNEL * KERNEL;
        let mut y = Tensor::zeros(&[rows, out_c]);
        matmul_nt(cols.data(), self.kernel.data(), y.data_mut(), rows, k, out_c);
        // [rows, out_c] -> [batch, out_c, h, w] with bias.
        let mut out = Tensor::zeros(&[batch, out_c, h, w]);
        let od = out.data_mut();
        for b in 0..batch {
            for oc in 0..out_c {
                let bias = self.bias.data()[oc];
                for p in 0..h * w {
                    od[((b * out_c) + oc) * h * w + p] = y.data()[(b * h * w + p) * out_c + oc] + bias;
                }
            }
        }
        Ok((
            out,
            ConvCache {
                cols,
                batch,
                h,
                w,
            },
        ))
    }

    pub fn backprop(&self, cache: &ConvCache, upstream: &Tensor) -> Result<(Tensor, Conv2dGrads)> {
        let [batch, out_c, h, w] = dims4(upstream)?;
        if batch != cache.batch || h != cache.h || w != cache.w || out_c != self.out_channels() {
            return Err(Error::Shape(format!(
                "conv backprop: upstream {:?} does not match cached forward ({}, {}, {}, {})",
                upstream.shape(),
                cache.batch,
                self.out_channels(),
                cache.h,
                cache.w
            )));
        }
        let in_c = self.in_channels();
        let rows = batch * h * w;
        let k = in_c * KERNEL * KERNEL;
        // Rearrange upstream to [rows, out_c].
        let mut up_rows = Tensor::zeros(&[rows, out_c]);
        {
            let ur = up_rows.data_mut();
            for b in 0..batch {
                for oc in 0..out_c {
                    for p in 0..h * w {
                        ur[(b * h * w + p) * out_c + oc] = upstream.data()[((b * out_c) + oc) * h * w + p];
                    }
                }
            }
        }
        // dK[out_c, k] = up_rows^T [out_c, rows] * cols [rows, k]
        let mut dk = Tensor::zeros(&[out_c, in_c, KERNEL, KERNEL]);
        matmul_tn(up_rows.data(), cache.cols.data(), dk.data_mut(), rows, out_c, k, false);
        let mut db = Tensor::zeros(&[out_c]);
        for r in 0..rows {
            for oc in 0..out_c {
                db.data_mut()[oc] += up_rows.data()[r * out_c + oc];
            }
        }
        // d_cols[rows, k] = up_rows [rows, out_c] * kernel [out_c, k]
        let mut dcols = Tensor::zeros(&[rows, k]);
        matmul_nn(up_rows.data(), self.kernel.data(), dcols.data_mut(), rows, out_c, k);
        let dx = col2im(&dcols, batch, in_c, h, w);
        Ok((dx, Conv2dGrads { kernel: dk, bias: db }))
    }
}

pub fn dims4(t: &Tensor) -> Result<[usize; 4]> {
    match t.shape() {
        [a, b, c, d] => Ok([*a, *b, *c, *d]),
        other => Err(Error::Shape(format!("expected 4-D tensor, got {other:?}"))),
    }
}

fn im2col(x: &Tensor, batch: usize, c: usize, h: usize, w: usize) -> Tensor {
    let k = c * KERNEL * KERNEL;
    let mut cols = Tensor::zeros(&[batch * h * w, k]);
    let cd = cols.data_mut();
    let xd = x.data();
    for b in 0..batch {
        for ch in 0..c {
            let base = ((b * c) + ch) * h * w;
            for kr in 0..KERNEL {
                for kc in 0..KERNEL {
                    let col_idx = (ch * KERNEL + kr) * KERNEL + kc;
                    for row in 0..h {
                        let sr = row as i64 + kr as i64 - PAD;
                        if sr < 0 || sr >= h as i64 {
                            continue;
                        }
                        for col in 0..w {
                            let sc = col as i64 + kc as i64 - PAD;
                            if sc < 0 || sc >= w as i64 {
                                continue;
                            }
                            let dst = (b * h * w + row * w + col) * k + col_idx;
                            cd[dst] = xd[base + sr as usize * w + sc as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(dcols: &Tensor, batch: usize, c: usize, h: usize, w: usize) -> Tensor {
    let k = c * KERNEL * KERNEL;
    let mut dx = Tensor::zeros(&[batch, c, h, w]);
    let xd = dx.data_mut();
    let cd = dcols.data();
    for b in 0..batch {
        for ch in 0..c {
            let base = ((b * c) + ch) * h * w;
            for kr in 0..KERNEL {
                for kc in 0..KERNEL {
                    let col_idx = (ch * KERNEL + kr) * KERNEL + kc;
                    for row in 0..h {
                        let sr = row as i64 + kr as i64 - PAD;
                        if sr < 0 || sr >= h as i64 {
                            continue;
                        }
                        for col in 0..w {
                            let sc = col as i64 + kc as i64 - PAD;
                            if sc < 0 || sc >= w as i64 {
                                continue;
                            }
                            xd[base + sr as usize * w + sc as usize] +=
                                cd[(b * h * w + row * w + col) * k + col_idx];
                        }
                    }
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_delta_kernel_is_identity() {
        let mut conv = Conv2d::zeros(1, 1);
        conv.kernel.data_mut()[1 * KERNEL + 1] = 1.0; // center tap
        let x = Tensor::from_vec(&[1, 1, 4, 4], (0..16).map(|i| i as f64).collect()).unwrap();
        let (y, _) = conv.apply(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn zero_input_broadcasts_bias() {
        let mut conv = Conv2d::zeros(2, 3);
        conv.bias.data_mut().copy_from_slice(&[0.5, -1.0, 2.0]);
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        let (y, _) = conv.apply(&x).unwrap();
        for oc in 0..3 {
            for p in 0..16 {
                assert_eq!(y.data()[oc * 16 + p], conv.bias.data()[oc]);
            }
        }
    }

    #[test]
    fn spatial_dims_preserved() {
        let conv = Conv2d::zeros(1, 4);
        let x = Tensor::zeros(&[2, 1, 6, 6]);
        let (y, _) = conv.apply(&x).unwrap();
        assert_eq!(y.shape(), &[2, 4, 6, 6]);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let conv = Conv2d::zeros(3, 4);
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        assert!(conv.apply(&x).is_err());
    }
}
