//! Adversarial autoencoder: a dense encoder with Gaussian
//! (mean, log-variance) heads, a sigmoid generator, and a discriminator that
//! pushes the encoded latent distribution toward the standard normal prior.
//!
//! Per batch, training alternates two updates:
//! 1. discriminator step, minimizing `-log D(z_prior) - log(1 - D(z_hat))`
//!    — only discriminator parameters move;
//! 2. autoencoder step, minimizing `-log D(z_hat) + BCE(reconstruction, x)`
//!    — only encoder and generator parameters move (the discriminator acts
//!    as a frozen critic).

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::neural::bundle::ModelBundle;
use crate::neural::dense::{Dense, DenseGrads};
use crate::neural::loss::{loss_bce, reparameterize, BCE_CLAMP};
use crate::neural::mlp::{add_grads, Activation, Mlp, MlpOptimizer};
use crate::neural::rng::{fill_standard_normal, shuffle};
use crate::neural::tensor::stack_rows as stack;
use crate::neural::tensor::Tensor;
use crate::neural::AdamState;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AaeConfig {
    /// Flattened image width (grid_n^2).
    pub input: usize,
    /// Latent width shared by encoder heads, generator and discriminator.
    pub latent: usize,
    pub enc_hidden: Vec<usize>,
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Save a checkpoint bundle every this many epochs (0 = final only).
    pub checkpoint_every: usize,
}

impl AaeConfig {
    /// Paper-scale architecture for a given image width.
    pub fn paper(input: usize) -> Self {
        AaeConfig {
            input,
            latent: 100,
            enc_hidden: vec![512, 512],
            gen_hidden: vec![512, 512],
            disc_hidden: vec![512, 256],
            lr: 2e-4,
            batch: 100,
            epochs: 30_000,
            checkpoint_every: 0,
        }
    }

    /// Desk-scale run: same widths, 500 epochs.
    pub fn desk(input: usize) -> Self {
        AaeConfig {
            epochs: 500,
            ..Self::paper(input)
        }
    }
}

#[derive(Debug, Clone)]
pub struct AaeModel {
    pub encoder_body: Mlp,
    pub head_mu: Dense,
    pub head_logvar: Dense,
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub config: AaeConfig,
}

/// One forward pass over a batch.
pub struct AaeForward {
    pub mu: Tensor,
    pub sigma: Tensor,
    pub z_hat: Tensor,
    pub reconstruction: Tensor,
    pub disc_latent: Tensor,
    pub disc_prior: Tensor,
}

#[derive(Debug, Clone, Serialize)]
pub struct AaeEpoch {
    pub epoch: usize,
    pub gen_loss: f64,
    pub disc_loss: f64,
    pub recon_bce: f64,
}

/// Initial bias of log-variance heads: start near-deterministic
/// (sigma ~= 0.05). The adversarial term shapes only the aggregate latent
/// distribution and inflates per-sample sigma readily (the inflation force
/// scales with sigma itself), which buries the reconstruction signal in
/// latent noise at small epoch budgets; the mean head can match the prior
/// on its own.
pub const LOGVAR_BIAS_INIT: f64 = -6.0;

impl AaeModel {
    pub fn init(config: AaeConfig, rng: &mut impl RngCore) -> Self {
        let mut enc_widths = vec![config.input];
        enc_widths.extend(&config.enc_hidden);
        let enc_out = *enc_widths.last().unwrap();
        let mut gen_widths = vec![config.latent];
        gen_widths.extend(&config.gen_hidden);
        gen_widths.push(config.input);
        let mut disc_widths = vec![config.latent];
        disc_widths.extend(&config.disc_hidden);
        disc_widths.push(1);
        let mut head_logvar = Dense::init(enc_out, config.latent, rng);
        head_logvar.w.data_mut().fill(0.0);
        head_logvar.b.data_mut().fill(LOGVAR_BIAS_INIT);
        AaeModel {
            encoder_body: Mlp::init(&enc_widths, Activation::Relu, Activation::Relu, rng),
            head_mu: Dense::init(enc_out, config.latent, rng),
            head_logvar,
            generator: Mlp::init(&gen_widths, Activation::Relu, Activation::Sigmoid, rng),
            discriminator: Mlp::init(&disc_widths, Activation::Relu, Activation::Sigmoid, rng),
            config,
        }
    }

    /// Encoder: images `[B, input]` -> (mu, log-variance) `[B, latent]`.
    pub fn encode(&self, images: &Tensor) -> Result<(Tensor, Tensor)> {
        let cache = self.encoder_body.forward(images)?;
        let mu = self.head_mu.apply(cache.output())?;
        let logvar = self.head_logvar.apply(cache.output())?;
        Ok((mu, logvar))
    }

    /// Generator output for one latent vector (deterministic).
    pub fn generate(&self, z: &Tensor) -> Result<Tensor> {
        let expect = self.config.latent;
        let width = *z.shape().last().unwrap();
        if width != expect {
            return Err(Error::Shape(format!(
                "generator expects latent width {expect}, got {width}"
            )));
        }
        Ok(self.generator.forward(z)?.output().clone())
    }

    /// Full forward pass; draws the prior sample and the reparameterization
    /// noise from `rng`.
    pub fn forward(&self, images: &Tensor, rng: &mut impl RngCore) -> Result<AaeForward> {
        check_binary(images)?;
        let (mu, logvar) = self.encode(images)?;
        let sigma = logvar.map(|v| (0.5 * v).exp());
        let z_hat = reparameterize(&mu, &sigma, rng)?;
        let mut prior = Tensor::zeros(mu.shape());
        fill_standard_normal(rng, prior.data_mut());
        let reconstruction = self.generate(&z_hat)?;
        let disc_latent = self.discriminator.forward(&z_hat)?.output().clone();
        let disc_prior = self.discriminator.forward(&prior)?.output().clone();
        Ok(AaeForward {
            mu,
            sigma,
            z_hat,
            reconstruction,
            disc_latent,
            disc_prior,
        })
    }

    /// Parameter checksum over every weight, canonical order.
    pub fn checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        self.encoder_body.digest(&mut h);
        self.head_mu.w.byte_digest(&mut h);
        self.head_mu.b.byte_digest(&mut h);
        self.head_logvar.w.byte_digest(&mut h);
        self.head_logvar.b.byte_digest(&mut h);
        self.generator.digest(&mut h);
        self.discriminator.digest(&mut h);
        h.finalize()
    }

    pub fn to_bundle(&self) -> Result<ModelBundle> {
        let descriptor = json!({
            "architecture": &self.config,
        });
        let mut b = ModelBundle::new("aae", descriptor);
        push_mlp(&mut b, "encoder", &self.encoder_body);
        b.push("head_mu.w", self.head_mu.w.clone());
        b.push("head_mu.b", self.head_mu.b.clone());
        b.push("head_logvar.w", self.head_logvar.w.clone());
        b.push("head_logvar.b", self.head_logvar.b.clone());
        push_mlp(&mut b, "generator", &self.generator);
        push_mlp(&mut b, "discriminator", &self.discriminator);
        Ok(b)
    }

    pub fn from_bundle(bundle: &ModelBundle) -> Result<Self> {
        if bundle.kind != "aae" {
            return Err(Error::Format(format!(
                "expected an aae bundle, got '{}'",
                bundle.kind
            )));
        }
        let config: AaeConfig = serde_json::from_value(bundle.descriptor["architecture"].clone())
            .map_err(|e| Error::Format(format!("aae descriptor: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = AaeModel::init(config, &mut rng);
        load_mlp(bundle, "encoder", &mut model.encoder_body)?;
        model.head_mu.w = bundle.get("head_mu.w")?.clone();
        model.head_mu.b = bundle.get("head_mu.b")?.clone();
        model.head_logvar.w = bundle.get("head_logvar.w")?.clone();
        model.head_logvar.b = bundle.get("head_logvar.b")?.clone();
        load_mlp(bundle, "generator", &mut model.generator)?;
        load_mlp(bundle, "discriminator", &mut model.discriminator)?;
        Ok(model)
    }
}

pub(crate) fn push_mlp(bundle: &mut ModelBundle, prefix: &str, mlp: &Mlp) {
    for (i, layer) in mlp.layers.iter().enumerate() {
        bundle.push(&format!("{prefix}.{i}.w"), layer.w.clone());
        bundle.push(&format!("{prefix}.{i}.b"), layer.b.clone());
    }
}

pub(crate) fn load_mlp(bundle: &ModelBundle, prefix: &str, mlp: &mut Mlp) -> Result<()> {
    for (i, layer) in mlp.layers.iter_mut().enumerate() {
        let w = bundle.get(&format!("{prefix}.{i}.w"))?;
        let b = bundle.get(&format!("{prefix}.{i}.b"))?;
        if w.shape() != layer.w.shape() || b.shape() != layer.b.shape() {
            return Err(Error::Format(format!(
                "bundle tensor {prefix}.{i} has shape {:?}/{:?}, expected {:?}/{:?}",
                w.shape(),
                b.shape(),
                layer.w.shape(),
                layer.b.shape()
            )));
        }
        layer.w = w.clone();
        layer.b = b.clone();
    }
    Ok(())
}

fn check_binary(images: &Tensor) -> Result<()> {
    if let Some(v) = images.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Domain(format!("aae input pixel {v} outside {{0,1}}")));
    }
    Ok(())
}

/// `-log D` style losses need the critic output clamped away from 0/1.
fn clamp_prob(p: f64) -> f64 {
    p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
}

struct HeadOptimizer {
    w: AdamState,
    b: AdamState,
}

impl HeadOptimizer {
    fn new(d: &Dense, lr: f64) -> Self {
        HeadOptimizer {
            w: AdamState::new(d.w.shape(), lr),
            b: AdamState::new(d.b.shape(), lr),
        }
    }

    fn step(&mut self, d: &mut Dense, g: &DenseGrads) -> Result<()> {
        self.w.step(&mut d.w, &g.w)?;
        self.b.step(&mut d.b, &g.b)
    }
}

/// Rescale the mean head so encoded latents start at the prior's scale
/// (unit variance, zero mean per component, measured over up to 1000
/// training images). Without this the discriminator separates the compact
/// initial latent cloud from the prior by norm alone and its gradients
/// drown the reconstruction signal for hundreds of epochs.
fn calibrate_mu_head(model: &mut AaeModel, images: &[Tensor]) -> Result<()> {
    let latent = model.config.latent;
    let sample: Vec<usize> = (0..images.len().min(1000)).collect();
    let x = stack(images, &sample)?;
    let (mu, _) = model.encode(&x)?;
    let n = sample.len() as f64;
    for j in 0..latent {
        let mut mean = 0.0;
        let mut sq = 0.0;
        for row in 0..sample.len() {
            let v = mu.data()[row * latent + j];
            mean += v;
            sq += v * v;
        }
        mean /= n;
        let std = (sq / n - mean * mean).sqrt().max(1e-6);
        let width = model.head_mu.input_width();
        for w in &mut model.head_mu.w.data_mut()[j * width..(j + 1) * width] {
            *w /= std;
        }
        model.head_mu.b.data_mut()[j] = (model.head_mu.b.data()[j] - mean) / std;
    }
    Ok(())
}

/// Train on binary images `[N, input]`; `checkpoint`, when given, is called
/// every `checkpoint_every` epochs with the live model.
pub fn train_aae(
    images: &[Tensor],
    config: &AaeConfig,
    seed: u64,
    mut checkpoint: Option<&mut dyn FnMut(usize, &AaeModel) -> Result<()>>,
) -> Result<(AaeModel, Vec<AaeEpoch>)> {
    if images.is_empty() {
        return Err(Error::Config("aae training set is empty".into()));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = AaeModel::init(config.clone(), &mut init_rng);
    calibrate_mu_head(&mut model, images)?;
    let mut train_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut enc_opt = MlpOptimizer::new(&model.encoder_body, config.lr);
    let mut mu_opt = HeadOptimizer::new(&model.head_mu, config.lr);
    let mut lv_opt = HeadOptimizer::new(&model.head_logvar, config.lr);
    let mut gen_opt = MlpOptimizer::new(&model.generator, config.lr);
    let mut disc_opt = MlpOptimizer::new(&model.discriminator, config.lr);

    let n = images.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        shuffle(&mut order, &mut train_rng);
        let (mut gen_acc, mut disc_acc, mut bce_acc, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(config.batch) {
            let x = stack(images, chunk)?;
            let (d_loss, g_loss, bce) = train_step(
                &mut model,
                &x,
                &mut train_rng,
                &mut enc_opt,
                &mut mu_opt,
                &mut lv_opt,
                &mut gen_opt,
                &mut disc_opt,
            )
            .map_err(|e| annotate(e, epoch, batches))?;
            disc_acc += d_loss;
            gen_acc += g_loss;
            bce_acc += bce;
            batches += 1;
        }
        let record = AaeEpoch {
            epoch,
            gen_loss: gen_acc / batches as f64,
            disc_loss: disc_acc / batches as f64,
            recon_bce: bce_acc / batches as f64,
        };
        if !record.gen_loss.is_finite() || !record.disc_loss.is_finite() {
            return Err(Error::Optimizer(format!(
                "non-finite epoch-{epoch} losses (gen {}, disc {})",
                record.gen_loss, record.disc_loss
            )));
        }
        history.push(record);
        if let Some(cb) = checkpoint.as_mut() {
            if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
                cb(epoch, &model)?;
            }
        }
    }
    Ok((model, history))
}

fn annotate(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::Optimizer(msg) => Error::Optimizer(format!("epoch {epoch}, batch {batch}: {msg}")),
        other => other,
    }
}

/// One discriminator + one autoencoder update. Returns
/// (disc loss, autoencoder composite loss, reconstruction BCE).
#[allow(clippy::too_many_arguments)]
fn train_step(
    model: &mut AaeModel,
    x: &Tensor,
    rng: &mut impl RngCore,
    enc_opt: &mut MlpOptimizer,
    mu_opt: &mut HeadOptimizer,
    lv_opt: &mut HeadOptimizer,
    gen_opt: &mut MlpOptimizer,
    disc_opt: &mut MlpOptimizer,
) -> Result<(f64, f64, f64)> {
    let batch = x.shape()[0] as f64;

    // --- Discriminator step (encoder frozen, no gradient into it). ---
    let enc_cache = model.encoder_body.forward(x)?;
    let mu = model.head_mu.apply(enc_cache.output())?;
    let logvar = model.head_logvar.apply(enc_cache.output())?;
    let sigma = logvar.map(|v| (0.5 * v).exp());
    let z_hat = reparameterize(&mu, &sigma, rng)?;
    let mut prior = Tensor::zeros(mu.shape());
    fill_standard_normal(rng, prior.data_mut());

    let prior_cache = model.discriminator.forward(&prior)?;
    let latent_cache = model.discriminator.forward(&z_hat)?;
    let d_prior = prior_cache.output();
    let d_latent = latent_cache.output();
    let mut disc_loss = 0.0;
    let mut grad_prior = Tensor::zeros(d_prior.shape());
    let mut grad_latent = Tensor::zeros(d_latent.shape());
    for i in 0..d_prior.len() {
        let p = clamp_prob(d_prior.data()[i]);
        let q = clamp_prob(d_latent.data()[i]);
        disc_loss += -p.ln() - (1.0 - q).ln();
        grad_prior.data_mut()[i] = -1.0 / p / batch;
        grad_latent.data_mut()[i] = 1.0 / (1.0 - q) / batch;
    }
    disc_loss /= batch;
    let (_, gp) = model.discriminator.backward(&prior_cache, &grad_prior)?;
    let (_, gl) = model.discriminator.backward(&latent_cache, &grad_latent)?;
    let mut disc_grads = gp;
    add_grads(&mut disc_grads, &gl)?;
    disc_opt.step(&mut model.discriminator, &disc_grads)?;

    // --- Autoencoder step (discriminator frozen: its gradients are
    //     computed to reach z_hat but never applied). ---
    let enc_cache = model.encoder_body.forward(x)?;
    let mu = model.head_mu.apply(enc_cache.output())?;
    let logvar = model.head_logvar.apply(enc_cache.output())?;
    let sigma = logvar.map(|v| (0.5 * v).exp());
    // Keep the noise explicitly; the backward pass needs it.
    let mut u = Tensor::zeros(mu.shape());
    fill_standard_normal(rng, u.data_mut());
    let mut z_hat = mu.clone();
    for ((z, s), n) in z_hat.data_mut().iter_mut().zip(sigma.data()).zip(u.data()) {
        *z += s * n;
    }

    let gen_cache = model.generator.forward(&z_hat)?;
    let recon = gen_cache.output();
    let (bce, d_recon) = loss_bce(recon, x)?;

    let disc_cache = model.discriminator.forward(&z_hat)?;
    let d_out = disc_cache.output();
    let mut adv_loss = 0.0;
    let mut d_adv = Tensor::zeros(d_out.shape());
    for i in 0..d_out.len() {
        let p = clamp_prob(d_out.data()[i]);
        adv_loss += -p.ln();
        d_adv.data_mut()[i] = -1.0 / p / batch;
    }
    adv_loss /= batch;
    let gen_total = adv_loss + bce;

    let (dz_from_gen, gen_grads) = model.generator.backward(&gen_cache, &d_recon)?;
    let (dz_from_disc, _discarded) = model.discriminator.backward(&disc_cache, &d_adv)?;
    let mut d_z = dz_from_gen;
    d_z.add_in_place(&dz_from_disc)?;

    // Reparameterization: z = mu + sigma .* u with sigma = exp(logvar/2).
    let d_mu = d_z.clone();
    let mut d_logvar = d_z.clone();
    for ((g, s), n) in d_logvar.data_mut().iter_mut().zip(sigma.data()).zip(u.data()) {
        *g *= 0.5 * s * n;
    }
    let (d_body_mu, mu_grads) = model.head_mu.backprop(enc_cache.output(), &d_mu)?;
    let (d_body_lv, lv_grads) = model.head_logvar.backprop(enc_cache.output(), &d_logvar)?;
    let mut d_body = d_body_mu;
    d_body.add_in_place(&d_body_lv)?;
    let (_, enc_grads) = model.encoder_body.backward(&enc_cache, &d_body)?;

    gen_opt.step(&mut model.generator, &gen_grads)?;
    enc_opt.step(&mut model.encoder_body, &enc_grads)?;
    mu_opt.step(&mut model.head_mu, &mu_grads)?;
    lv_opt.step(&mut model.head_logvar, &lv_grads)?;

    Ok((disc_loss, gen_total, bce))
}
