//! Evaluation metrics: windowed SSIM and the coefficient of determination.

use super::tensor::Tensor;
use crate::error::{Error, Result};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 1.0;

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for r in 0..SSIM_WINDOW {
        for q in 0..SSIM_WINDOW {
            let d2 = (r as f64 - c).powi(2) + (q as f64 - c).powi(2);
            let v = (-d2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[r * SSIM_WINDOW + q] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean local SSIM between two images in [0,1], 11x11 Gaussian window
/// (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1. Windows are evaluated at
/// every position where they fit entirely inside the image.
pub fn metric_ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    let (h, w) = match (a.shape(), b.shape()) {
        ([h1, w1], [h2, w2]) if h1 == h2 && w1 == w2 => (*h1, *w1),
        _ => {
            return Err(Error::Shape(format!(
                "ssim: shapes {:?} vs {:?}",
                a.shape(),
                b.shape()
            )))
        }
    };
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "ssim: image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let win = gaussian_window();
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let (ad, bd) = (a.data(), b.data());
    let mut acc = 0.0;
    let mut count = 0usize;
    for top in 0..=(h - SSIM_WINDOW) {
        for left in 0..=(w - SSIM_WINDOW) {
            let (mut mx, mut my) = (0.0, 0.0);
            let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
            for r in 0..SSIM_WINDOW {
                let row = (top + r) * w + left;
                for q in 0..SSIM_WINDOW {
                    let g = win[r * SSIM_WINDOW + q];
                    let x = ad[row + q];
                    let y = bd[row + q];
                    mx += g * x;
                    my += g * y;
                    sxx += g * x * x;
                    syy += g * y * y;
                    sxy += g * x * y;
                }
            }
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cov = sxy - mx * my;
            let ssim = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            acc += ssim;
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

/// Coefficient of determination `1 - SS_res / SS_tot` (two-pass).
pub fn metric_r2(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "r2: {} predictions vs {} truths",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.len() < 2 {
        return Err(Error::Metric("r2 needs at least 2 samples".into()));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Metric("r2 undefined for constant truth".into()));
    }
    let ss_res: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> Tensor {
        let mut data = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                data.push(f(r, c));
            }
        }
        Tensor::from_vec(&[h, w], data).unwrap()
    }

    #[test]
    fn ssim_self_is_one() {
        let img = image(16, 16, |r, c| ((r * 7 + c * 3) % 5) as f64 / 4.0);
        let s = metric_ssim(&img, &img).unwrap();
        assert!((s - 1.0).abs() < 1e-12, "ssim {s}");
    }

    #[test]
    fn ssim_zero_vs_one_hits_constant_floor() {
        let zero = image(16, 16, |_, _| 0.0);
        let one = image(16, 16, |_, _| 1.0);
        let s = metric_ssim(&zero, &one).unwrap();
        // Closed form with constant patches: C1 / (1 + C1).
        let c1 = 0.01f64.powi(2);
        let expect = c1 / (1.0 + c1);
        assert!((s - expect).abs() < 1e-12, "ssim {s} vs {expect}");
        assert!(s < 0.01);
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = image(20, 20, |r, c| ((r as f64 * 0.3).sin() * (c as f64 * 0.2).cos()).abs());
        let b = image(20, 20, |r, c| if (r + c) % 3 == 0 { 1.0 } else { 0.0 });
        let s1 = metric_ssim(&a, &b).unwrap();
        let s2 = metric_ssim(&b, &a).unwrap();
        assert!((s1 - s2).abs() < 1e-14);
        assert!((-1.0..=1.0).contains(&s1));
    }

    #[test]
    fn ssim_rejects_small_or_mismatched() {
        let small = image(8, 8, |_, _| 0.5);
        assert!(metric_ssim(&small, &small).is_err());
        let a = image(16, 16, |_, _| 0.5);
        let b = image(16, 12, |_, _| 0.5);
        assert!(metric_ssim(&a, &b).is_err());
    }

    #[test]
    fn r2_two_pass_agrees_with_one_pass_accumulation() {
        // Independent single-pass route: R^2 from running sums.
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for i in 0..500 {
            let t = (i as f64 * 0.37).sin() * 3.0 + 0.1 * i as f64;
            truth.push(t);
            pred.push(t + ((i * 37) % 11) as f64 * 0.05 - 0.25);
        }
        let (mut s_t, mut s_tt, mut s_res, n) = (0.0, 0.0, 0.0, truth.len() as f64);
        for (p, t) in pred.iter().zip(&truth) {
            s_t += t;
            s_tt += t * t;
            s_res += (p - t) * (p - t);
        }
        let ss_tot = s_tt - s_t * s_t / n;
        let one_pass = 1.0 - s_res / ss_tot;
        let two_pass = metric_r2(&pred, &truth).unwrap();
        assert!((one_pass - two_pass).abs() <= 1e-8, "{one_pass} vs {two_pass}");
    }

    #[test]
    fn r2_basics() {
        let truth = [1.0, 2.0, 3.0, 4.0];
        assert!((metric_r2(&truth, &truth).unwrap() - 1.0).abs() < 1e-15);
        let mean_pred = [2.5; 4];
        assert!(metric_r2(&mean_pred, &truth).unwrap().abs() < 1e-15);
        assert!(matches!(
            metric_r2(&[1.0, 2.0], &[3.0, 3.0]),
            Err(Error::Metric(_))
        ));
    }
}
