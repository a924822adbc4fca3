//! Shared central-finite-difference machinery: every layer and loss
//! checked against an independent numeric-differentiation oracle. Used by
//! both the `gradients` test target and the acceptance suite.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emtomo::fnn::{FieldStats, FnnConfig, FnnModel};
use emtomo::inn::{InnConfig, InnModel};
use emtomo::neural::loss::InnLossGrads;
use emtomo::neural::{
    loss_bce, loss_inn, loss_mse_l2, maxpool_apply, maxpool_backprop, relu_apply, relu_backprop,
    sigmoid_apply, sigmoid_backprop, Activation, Conv2d, Dense, Mlp, Tensor,
};

/// Number of randomized cases per layer/loss.
pub const CASES: usize = 100;

/// One gradient-check outcome: worst relative error vs its gate.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: &'static str,
    pub worst: f64,
    pub threshold: f64,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.worst <= self.threshold
    }
}


fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * (hi - lo)
}

fn fill(rng: &mut impl RngCore, t: &mut Tensor, lo: f64, hi: f64) {
    for v in t.data_mut() {
        *v = uniform(rng, lo, hi);
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs()) + 1e-8)
}

/// Central difference of a scalar function with respect to one slot of a
/// parameter vector accessed through `get`/`set`.
fn central_diff(mut eval: impl FnMut(f64) -> f64, theta: f64) -> f64 {
    let h = 1e-5 * theta.abs().max(1.0);
    (eval(theta + h) - eval(theta - h)) / (2.0 * h)
}

/// Scalar objective: fixed random projection of a tensor.
fn project(t: &Tensor, weights: &[f64]) -> f64 {
    t.data().iter().zip(weights).map(|(a, b)| a * b).sum()
}

pub fn check_dense() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case as u64);
        let (input, output, batch) = (
            2 + (rng.next_u64() % 5) as usize,
            1 + (rng.next_u64() % 4) as usize,
            1 + (rng.next_u64() % 3) as usize,
        );
        let mut layer = Dense::zeros(input, output);
        fill(&mut rng, &mut layer.w, -1.0, 1.0);
        fill(&mut rng, &mut layer.b, -0.5, 0.5);
        let mut x = Tensor::zeros(&[batch, input]);
        fill(&mut rng, &mut x, -2.0, 2.0);
        let proj: Vec<f64> = (0..batch * output).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let upstream = Tensor::from_vec(&[batch, output], proj.clone()).unwrap();
        let (dx, grads) = layer.backprop(&x, &upstream).unwrap();

        // Weight gradients.
        for i in 0..layer.w.len() {
            let fd = central_diff(
                |v| {
                    let mut l = layer.clone();
                    l.w.data_mut()[i] = v;
                    project(&l.apply(&x).unwrap(), &proj)
                },
                layer.w.data()[i],
            );
            worst = worst.max(rel(grads.w.data()[i], fd));
        }
        // Bias gradients.
        for i in 0..layer.b.len() {
            let fd = central_diff(
                |v| {
                    let mut l = layer.clone();
                    l.b.data_mut()[i] = v;
                    project(&l.apply(&x).unwrap(), &proj)
                },
                layer.b.data()[i],
            );
            worst = worst.max(rel(grads.b.data()[i], fd));
        }
        // Input gradients.
        for i in 0..x.len() {
            let fd = central_diff(
                |v| {
                    let mut xx = x.clone();
                    xx.data_mut()[i] = v;
                    project(&layer.apply(&xx).unwrap(), &proj)
                },
                x.data()[i],
            );
            worst = worst.max(rel(dx.data()[i], fd));
        }
    }
    Outcome { name: "dense layer", worst, threshold: 1e-4 }
}

pub fn check_conv() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + case as u64);
        // Random 6x6x2 -> 3 as named in the module contract.
        let (in_c, out_c, h, w) = (2, 3, 6, 6);
        let mut conv = Conv2d::zeros(in_c, out_c);
        fill(&mut rng, &mut conv.kernel, -0.7, 0.7);
        fill(&mut rng, &mut conv.bias, -0.3, 0.3);
        let mut x = Tensor::zeros(&[1, in_c, h, w]);
        fill(&mut rng, &mut x, -1.5, 1.5);
        let proj: Vec<f64> = (0..out_c * h * w).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let upstream = Tensor::from_vec(&[1, out_c, h, w], proj.clone()).unwrap();
        let (_, cache) = conv.apply(&x).unwrap();
        let (dx, grads) = conv.backprop(&cache, &upstream).unwrap();

        let eval_kernel = |conv: &Conv2d, i: usize, v: f64, x: &Tensor| {
            let mut c = conv.clone();
            c.kernel.data_mut()[i] = v;
            project(&c.apply(x).unwrap().0, &proj)
        };
        for i in 0..conv.kernel.len() {
            let fd = central_diff(|v| eval_kernel(&conv, i, v, &x), conv.kernel.data()[i]);
            worst = worst.max(rel(grads.kernel.data()[i], fd));
        }
        for i in 0..conv.bias.len() {
            let fd = central_diff(
                |v| {
                    let mut c = conv.clone();
                    c.bias.data_mut()[i] = v;
                    project(&c.apply(&x).unwrap().0, &proj)
                },
                conv.bias.data()[i],
            );
            worst = worst.max(rel(grads.bias.data()[i], fd));
        }
        // Input gradients on a subset (full sweep is 72 evals x 100 cases).
        for i in (0..x.len()).step_by(7) {
            let fd = central_diff(
                |v| {
                    let mut xx = x.clone();
                    xx.data_mut()[i] = v;
                    project(&conv.apply(&xx).unwrap().0, &proj)
                },
                x.data()[i],
            );
            worst = worst.max(rel(dx.data()[i], fd));
        }
    }
    Outcome { name: "conv 3x3 layer", worst, threshold: 1e-4 }
}

pub fn check_maxpool() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + case as u64);
        let mut x = Tensor::zeros(&[1, 2, 4, 4]);
        fill(&mut rng, &mut x, -2.0, 2.0);
        let proj: Vec<f64> = (0..2 * 2 * 2).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let upstream = Tensor::from_vec(&[1, 2, 2, 2], proj.clone()).unwrap();
        let dx = maxpool_backprop(&x, &upstream).unwrap();
        // Finite differences are only meaningful away from argmax ties:
        // flag every window whose top two values are closer than the FD
        // step can resolve and skip its positions.
        let mut near_tie = vec![false; x.len()];
        for c in 0..2usize {
            for r in 0..2usize {
                for cc in 0..2usize {
                    let base = c * 16 + 2 * r * 4 + 2 * cc;
                    let mut vals = [
                        x.data()[base],
                        x.data()[base + 1],
                        x.data()[base + 4],
                        x.data()[base + 5],
                    ];
                    vals.sort_by(|a, b| b.total_cmp(a));
                    if vals[0] - vals[1] < 1e-3 {
                        for off in [0, 1, 4, 5] {
                            near_tie[base + off] = true;
                        }
                    }
                }
            }
        }
        for i in 0..x.len() {
            if near_tie[i] {
                continue;
            }
            let fd = central_diff(
                |v| {
                    let mut xx = x.clone();
                    xx.data_mut()[i] = v;
                    project(&maxpool_apply(&xx).unwrap(), &proj)
                },
                x.data()[i],
            );
            worst = worst.max(rel(dx.data()[i], fd));
        }
    }
    Outcome { name: "maxpool 2x2", worst, threshold: 1e-6 }
}

pub fn check_activations() -> Vec<Outcome> {
    let mut worst_relu: f64 = 0.0;
    let mut worst_sig: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + case as u64);
        let n = 16;
        let mut x = Tensor::zeros(&[n]);
        // Keep |x| > 1e-3 so the relu kink is never straddled.
        for v in x.data_mut() {
            let mag = uniform(&mut rng, 1e-2, 2.0);
            *v = if rng.next_u64() % 2 == 0 { mag } else { -mag };
        }
        let proj: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let upstream = Tensor::from_vec(&[n], proj.clone()).unwrap();

        let d_relu = relu_backprop(&x, &upstream).unwrap();
        let sig_out = sigmoid_apply(&x);
        let d_sig = sigmoid_backprop(&sig_out, &upstream).unwrap();
        for i in 0..n {
            let fd_r = central_diff(
                |v| {
                    let mut xx = x.clone();
                    xx.data_mut()[i] = v;
                    project(&relu_apply(&xx), &proj)
                },
                x.data()[i],
            );
            worst_relu = worst_relu.max(rel(d_relu.data()[i], fd_r));
            let fd_s = central_diff(
                |v| {
                    let mut xx = x.clone();
                    xx.data_mut()[i] = v;
                    project(&sigmoid_apply(&xx), &proj)
                },
                x.data()[i],
            );
            worst_sig = worst_sig.max(rel(d_sig.data()[i], fd_s));
        }
    }
    vec![
        Outcome { name: "relu", worst: worst_relu, threshold: 1e-6 },
        Outcome { name: "sigmoid", worst: worst_sig, threshold: 1e-6 },
    ]
}

pub fn check_losses() -> Vec<Outcome> {
    let mut worst_bce: f64 = 0.0;
    let mut worst_mse: f64 = 0.0;
    let mut worst_inn: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + case as u64);
        let n = 12;
        // BCE: predictions well inside the clamp.
        let mut pred = Tensor::zeros(&[n]);
        fill(&mut rng, &mut pred, 0.02, 0.98);
        let target = Tensor::from_vec(
            &[n],
            (0..n).map(|_| (rng.next_u64() % 2) as f64).collect(),
        )
        .unwrap();
        let (_, grad) = loss_bce(&pred, &target).unwrap();
        for i in 0..n {
            let fd = central_diff(
                |v| {
                    let mut p = pred.clone();
                    p.data_mut()[i] = v;
                    loss_bce(&p, &target).unwrap().0
                },
                pred.data()[i],
            );
            worst_bce = worst_bce.max(rel(grad.data()[i], fd));
        }

        // MSE + L2 on predictions and on the penalized weights.
        let mut y = Tensor::zeros(&[n]);
        fill(&mut rng, &mut y, -2.0, 2.0);
        let mut w = Tensor::zeros(&[3, 3]);
        fill(&mut rng, &mut w, -1.0, 1.0);
        let lambda = 3e-3;
        let (_, d_pred, d_w) = loss_mse_l2(&pred, &y, &[&w], lambda).unwrap();
        for i in 0..n {
            let fd = central_diff(
                |v| {
                    let mut p = pred.clone();
                    p.data_mut()[i] = v;
                    loss_mse_l2(&p, &y, &[&w], lambda).unwrap().0
                },
                pred.data()[i],
            );
            worst_mse = worst_mse.max(rel(d_pred.data()[i], fd));
        }
        for i in 0..w.len() {
            let fd = central_diff(
                |v| {
                    let mut ww = w.clone();
                    ww.data_mut()[i] = v;
                    loss_mse_l2(&pred, &y, &[&ww], lambda).unwrap().0
                },
                w.data()[i],
            );
            worst_mse = worst_mse.max(rel(d_w[0].data()[i], fd));
        }

        // Tandem composite: d_pred, d_mu, d_sigma.
        let m = 10;
        let j = 4;
        let mut pf = Tensor::zeros(&[1, m]);
        let mut tf = Tensor::zeros(&[1, m]);
        fill(&mut rng, &mut pf, -1.0, 1.0);
        fill(&mut rng, &mut tf, -1.0, 1.0);
        let mut mu = Tensor::zeros(&[1, j]);
        let mut sigma = Tensor::zeros(&[1, j]);
        fill(&mut rng, &mut mu, -1.5, 1.5);
        fill(&mut rng, &mut sigma, 0.3, 2.5);
        let alpha = 0.05;
        let (_, grads): (f64, InnLossGrads) = loss_inn(&pf, &tf, &mu, &sigma, alpha).unwrap();
        for i in 0..m {
            let fd = central_diff(
                |v| {
                    let mut p = pf.clone();
                    p.data_mut()[i] = v;
                    loss_inn(&p, &tf, &mu, &sigma, alpha).unwrap().0
                },
                pf.data()[i],
            );
            worst_inn = worst_inn.max(rel(grads.d_pred.data()[i], fd));
        }
        for i in 0..j {
            let fd_mu = central_diff(
                |v| {
                    let mut muv = mu.clone();
                    muv.data_mut()[i] = v;
                    loss_inn(&pf, &tf, &muv, &sigma, alpha).unwrap().0
                },
                mu.data()[i],
            );
            worst_inn = worst_inn.max(rel(grads.d_mu.data()[i], fd_mu));
            let fd_s = central_diff(
                |v| {
                    let mut sv = sigma.clone();
                    sv.data_mut()[i] = v;
                    loss_inn(&pf, &tf, &mu, &sv, alpha).unwrap().0
                },
                sigma.data()[i],
            );
            worst_inn = worst_inn.max(rel(grads.d_sigma.data()[i], fd_s));
        }
        let _ = case;
    }
    vec![
        Outcome { name: "bce loss", worst: worst_bce, threshold: 1e-5 },
        Outcome { name: "mse+l2 loss", worst: worst_mse, threshold: 1e-4 },
        Outcome { name: "tandem composite loss", worst: worst_inn, threshold: 1e-4 },
    ]
}

pub fn check_stacked_shapes() {
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + case as u64);
        let widths = [
            3 + (rng.next_u64() % 4) as usize,
            2 + (rng.next_u64() % 5) as usize,
            1 + (rng.next_u64() % 4) as usize,
        ];
        let mlp = Mlp::init(&widths, Activation::Relu, Activation::Sigmoid, &mut rng);
        let batch = 1 + (rng.next_u64() % 4) as usize;
        let mut x = Tensor::zeros(&[batch, widths[0]]);
        fill(&mut rng, &mut x, -1.0, 1.0);
        let cache = mlp.forward(&x).unwrap();
        assert_eq!(cache.output().shape(), &[batch, widths[2]]);
        let upstream = Tensor::zeros(&[batch, widths[2]]);
        let (dx, grads) = mlp.backward(&cache, &upstream).unwrap();
        assert_eq!(dx.shape(), x.shape());
        for (g, l) in grads.iter().zip(&mlp.layers) {
            assert_eq!(g.w.shape(), l.w.shape());
            assert_eq!(g.b.shape(), l.b.shape());
        }
    }
}

/// End-to-end composite gradient through the frozen generator and surrogate
/// into sampled dense-block weights, with frozen reparameterization noise.
pub fn check_inn_end_to_end() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let fnn_cfg = FnnConfig {
        grid_n: 8,
        field_len: 6,
        channels: vec![2, 3, 4, 5, 6],
        dense_hidden: vec![10],
        lr: 1e-3,
        batch: 2,
        lambda_l2: 0.0,
        patience: 2,
        max_epochs: 2,
        threads: 1,
    };
    let fnn = FnnModel::init(
        fnn_cfg,
        FieldStats {
            mean: vec![0.0; 6],
            std: vec![1.0; 6],
        },
        &mut rng,
    )
    .unwrap();
    let generator = Mlp::init(&[4, 12, 64], Activation::Relu, Activation::Sigmoid, &mut rng);
    let config = InnConfig {
        field_len: 6,
        latent: 4,
        hidden: vec![10, 8],
        lr: 1e-3,
        batch: 2,
        alpha: 0.05,
        patience: 2,
        max_epochs: 2,
        threshold_for_reports: 0.5,
    };
    let model = InnModel::new(config.clone(), generator, 0, fnn, 0, &mut rng).unwrap();

    let mut x = Tensor::zeros(&[2, 6]);
    fill(&mut rng, &mut x, -1.0, 1.0);
    let mut u = Tensor::zeros(&[2, 4]);
    fill(&mut rng, &mut u, -1.0, 1.0); // frozen noise

    // Composite loss as a pure function of the model parameters.
    let eval = |m: &InnModel| -> f64 {
        let out = m.forward_with_noise(&x, &u).unwrap();
        loss_inn(&out.predicted_fields, &x, &out.mu, &out.sigma, config.alpha)
            .unwrap()
            .0
    };

    // Analytic gradients, replicating the training backward chain.
    let body_cache = model.body.forward(&x).unwrap();
    let mu = model.head_mu.apply(body_cache.output()).unwrap();
    let logvar = model.head_logvar.apply(body_cache.output()).unwrap();
    let sigma = logvar.map(|v| (0.5 * v).exp());
    let mut z = mu.clone();
    for ((zv, sv), uv) in z.data_mut().iter_mut().zip(sigma.data()).zip(u.data()) {
        *zv += sv * uv;
    }
    let gen_cache = model.generator.forward(&z).unwrap();
    let image = gen_cache.output();
    let image_batch = image.clone().reshape(&[2, 1, 8, 8]).unwrap();
    let (pred, conv_cache, dense_cache) = model.fnn.forward(&image_batch).unwrap();
    let (_, grads) = loss_inn(&pred, &x, &mu, &sigma, config.alpha).unwrap();
    let (d_flat, _) = model.fnn.dense.backward(&dense_cache, &grads.d_pred).unwrap();
    let d_conv_out = d_flat.reshape(conv_cache.output.shape()).unwrap();
    let (d_image_batch, _) = model.fnn.conv.backward(&conv_cache, &d_conv_out).unwrap();
    let d_image = d_image_batch.reshape(image.shape()).unwrap();
    let (d_z, _) = model.generator.backward(&gen_cache, &d_image).unwrap();
    let mut d_mu = d_z.clone();
    d_mu.add_in_place(&grads.d_mu).unwrap();
    let mut d_sigma = grads.d_sigma.clone();
    for (ds, (dz, uv)) in d_sigma
        .data_mut()
        .iter_mut()
        .zip(d_z.data().iter().zip(u.data()))
    {
        *ds += dz * uv;
    }
    let mut d_logvar = d_sigma;
    for (dl, sv) in d_logvar.data_mut().iter_mut().zip(sigma.data()) {
        *dl *= 0.5 * sv;
    }
    let (d_body_mu, mu_grads) = model.head_mu.backprop(body_cache.output(), &d_mu).unwrap();
    let (d_body_lv, lv_grads) = model
        .head_logvar
        .backprop(body_cache.output(), &d_logvar)
        .unwrap();
    let mut d_body = d_body_mu;
    d_body.add_in_place(&d_body_lv).unwrap();
    let (_, body_grads) = model.body.backward(&body_cache, &d_body).unwrap();

    // Sample parameters across the dense block and compare with FD.
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for layer_idx in 0..model.body.layers.len() {
        for i in (0..model.body.layers[layer_idx].w.len()).step_by(7) {
            let theta = model.body.layers[layer_idx].w.data()[i];
            let fd = central_diff(
                |v| {
                    let mut m = model.clone();
                    m.body.layers[layer_idx].w.data_mut()[i] = v;
                    eval(&m)
                },
                theta,
            );
            worst = worst.max(rel(body_grads[layer_idx].w.data()[i], fd));
            checked += 1;
        }
    }
    for i in (0..model.head_mu.w.len()).step_by(5) {
        let fd = central_diff(
            |v| {
                let mut m = model.clone();
                m.head_mu.w.data_mut()[i] = v;
                eval(&m)
            },
            model.head_mu.w.data()[i],
        );
        worst = worst.max(rel(mu_grads.w.data()[i], fd));
        checked += 1;
    }
    for i in (0..model.head_logvar.w.len()).step_by(5) {
        let fd = central_diff(
            |v| {
                let mut m = model.clone();
                m.head_logvar.w.data_mut()[i] = v;
                eval(&m)
            },
            model.head_logvar.w.data()[i],
        );
        worst = worst.max(rel(lv_grads.w.data()[i], fd));
        checked += 1;
    }
    assert!(checked > 30, "sampled only {checked} parameters");
    Outcome { name: "inn end-to-end composite", worst, threshold: 1e-3 }
}
