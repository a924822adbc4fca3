//! Tandem inverse network: a trainable dense block maps (standardized)
//! field amplitudes to a Gaussian latent, the frozen generator turns the
//! latent into an image, and the frozen forward surrogate closes the loop so
//! the training loss compares reproduced fields against the input fields —
//! the guard against non-unique inversions.
//!
//! Only the dense block's parameters ever move; gradients flow *through* the
//! generator and surrogate but are discarded there. Both frozen modules are
//! referenced by their checkpoint checksums and re-verified after training.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fnn::FnnModel;
use crate::forward::FieldVector;
use crate::neural::bundle::ModelBundle;
use crate::neural::dense::Dense;
use crate::neural::loss::loss_inn;
use crate::neural::mlp::{Activation, Mlp, MlpOptimizer};
use crate::neural::rng::fill_standard_normal;
use crate::neural::tensor::Tensor;
use crate::neural::AdamState;
use crate::scene::ContrastImage;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InnConfig {
    pub field_len: usize,
    pub latent: usize,
    /// Hidden widths of the dense block (between input and the two heads).
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch: usize,
    /// Weight of the KL term in the composite loss.
    pub alpha: f64,
    pub patience: usize,
    pub max_epochs: usize,
    /// Threshold generator probabilities only when exporting images.
    pub threshold_for_reports: f64,
}

impl InnConfig {
    pub fn paper() -> Self {
        InnConfig {
            field_len: 512,
            latent: 100,
            hidden: vec![800, 800, 500, 500, 400],
            lr: 2e-4,
            batch: 100,
            alpha: 1e-2,
            patience: 5,
            max_epochs: 500,
            threshold_for_reports: 0.5,
        }
    }

    pub fn desk() -> Self {
        InnConfig {
            field_len: 256,
            hidden: vec![400, 400, 250, 250, 200],
            max_epochs: 100,
            ..Self::paper()
        }
    }
}

#[derive(Clone)]
pub struct InnModel {
    pub body: Mlp,
    pub head_mu: Dense,
    pub head_logvar: Dense,
    pub generator: Mlp,
    pub fnn: FnnModel,
    pub config: InnConfig,
    /// Checkpoint identities of the frozen modules (bundle byte CRCs).
    pub generator_checksum: u32,
    pub fnn_checksum: u32,
}

/// Output of one forward chain over a batch.
pub struct InnForward {
    pub mu: Tensor,
    pub sigma: Tensor,
    pub z: Tensor,
    /// Soft generator output in (0,1), `[batch, grid^2]`.
    pub image: Tensor,
    /// Standardized fields the surrogate predicts for the generated image.
    pub predicted_fields: Tensor,
}

#[derive(Debug, Clone, Serialize)]
pub struct InnEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
}

/// The `invert` result: soft probabilities, a thresholded mask, and the
/// surrogate's field prediction for the reconstruction (physical units) so
/// callers can check field consistency.
pub struct Inversion {
    pub soft_image: Vec<f64>,
    pub image: ContrastImage,
    pub predicted_fields: FieldVector,
    /// L1 distance between input and reproduced fields, standardized space.
    pub field_l1_standardized: f64,
}

impl InnModel {
    /// Wire the dense block to frozen modules, validating compatibility.
    pub fn new(
        config: InnConfig,
        generator: Mlp,
        generator_checksum: u32,
        fnn: FnnModel,
        fnn_checksum: u32,
        rng: &mut impl RngCore,
    ) -> Result<Self> {
        if generator.widths()[0] != config.latent {
            return Err(Error::Integration(format!(
                "generator expects latent {}, inn produces {}",
                generator.widths()[0],
                config.latent
            )));
        }
        let gen_out = *generator.widths().last().unwrap();
        let fnn_in = fnn.config.grid_n * fnn.config.grid_n;
        if gen_out != fnn_in {
            return Err(Error::Integration(format!(
                "generator yields {gen_out}-pixel images, surrogate expects {fnn_in}"
            )));
        }
        if fnn.config.field_len != config.field_len {
            return Err(Error::Integration(format!(
                "surrogate predicts {} fields, inn consumes {}",
                fnn.config.field_len, config.field_len
            )));
        }
        let mut widths = vec![config.field_len];
        widths.extend(&config.hidden);
        let body_out = *widths.last().unwrap();
        let mut head_logvar = Dense::init(body_out, config.latent, rng);
        head_logvar.w.data_mut().fill(0.0);
        head_logvar
            .b
            .data_mut()
            .fill(crate::aae::LOGVAR_BIAS_INIT);
        Ok(InnModel {
            body: Mlp::init(&widths, Activation::Relu, Activation::Relu, rng),
            head_mu: Dense::init(body_out, config.latent, rng),
            head_logvar,
            generator,
            fnn,
            config,
            generator_checksum,
            fnn_checksum,
        })
    }

    /// Checksum of the trainable dense block only.
    pub fn dense_checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        self.body.digest(&mut h);
        self.head_mu.w.byte_digest(&mut h);
        self.head_mu.b.byte_digest(&mut h);
        self.head_logvar.w.byte_digest(&mut h);
        self.head_logvar.b.byte_digest(&mut h);
        h.finalize()
    }

    /// Checksum over the in-memory frozen parameters.
    pub fn frozen_checksum(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        self.generator.digest(&mut h);
        for c in &self.fnn.conv.convs {
            c.kernel.byte_digest(&mut h);
            c.bias.byte_digest(&mut h);
        }
        self.fnn.dense.digest(&mut h);
        h.finalize()
    }

    /// Forward chain on standardized fields `[batch, field_len]`; the
    /// reparameterization noise comes from `rng` (inference uses `z = mu`
    /// via [`InnModel::invert`] instead).
    pub fn forward(&self, fields_std: &Tensor, rng: &mut impl RngCore) -> Result<InnForward> {
        let mut u = Tensor::zeros(&[fields_std.shape()[0], self.config.latent]);
        fill_standard_normal(rng, u.data_mut());
        self.forward_with_noise(fields_std, &u)
    }

    /// Deterministic-noise variant (training and gradient checks).
    pub fn forward_with_noise(&self, fields_std: &Tensor, u: &Tensor) -> Result<InnForward> {
        let body_cache = self.body.forward(fields_std)?;
        let mu = self.head_mu.apply(body_cache.output())?;
        let logvar = self.head_logvar.apply(body_cache.output())?;
        let sigma = logvar.map(|v| (0.5 * v).exp());
        let mut z = mu.clone();
        for ((zv, sv), uv) in z.data_mut().iter_mut().zip(sigma.data()).zip(u.data()) {
            *zv += sv * uv;
        }
        let image = self.generator.forward(&z)?.output().clone();
        let batch = fields_std.shape()[0];
        let g = self.fnn.config.grid_n;
        let image_batch = image.clone().reshape(&[batch, 1, g, g])?;
        let predicted_fields = self.fnn.predict_standardized_batch(&image_batch)?;
        Ok(InnForward {
            mu,
            sigma,
            z,
            image,
            predicted_fields,
        })
    }

    /// Reconstruct a scatterer from measured amplitudes (physical units).
    /// Inference is deterministic: `z = mu`.
    pub fn invert(&self, fields: &FieldVector) -> Result<Inversion> {
        let std = self.fnn.stats.standardize(&fields.0)?;
        let x = Tensor::from_vec(&[1, self.config.field_len], std)?;
        let body_cache = self.body.forward(&x)?;
        let mu = self.head_mu.apply(body_cache.output())?;
        let image = self.generator.forward(&mu)?.output().clone();
        let g = self.fnn.config.grid_n;
        let image_batch = image.clone().reshape(&[1, 1, g, g])?;
        let pred_std = self.fnn.predict_standardized_batch(&image_batch)?;
        let l1: f64 = pred_std
            .data()
            .iter()
            .zip(x.data())
            .map(|(a, b)| (a - b).abs())
            .sum();
        let mask: Vec<u8> = image
            .data()
            .iter()
            .map(|&p| (p >= self.config.threshold_for_reports) as u8)
            .collect();
        Ok(Inversion {
            soft_image: image.data().to_vec(),
            image: ContrastImage {
                mask,
                grid_n: g,
                tau: 1.0,
            },
            predicted_fields: FieldVector(self.fnn.stats.destandardize(pred_std.data())?),
            field_l1_standardized: l1,
        })
    }

    pub fn to_bundle(&self) -> Result<ModelBundle> {
        let descriptor = json!({
            "architecture": &self.config,
            "generator_checksum": self.generator_checksum,
            "fnn_checksum": self.fnn_checksum,
        });
        let mut b = ModelBundle::new("inn", descriptor);
        crate::aae::push_mlp(&mut b, "body", &self.body);
        b.push("head_mu.w", self.head_mu.w.clone());
        b.push("head_mu.b", self.head_mu.b.clone());
        b.push("head_logvar.w", self.head_logvar.w.clone());
        b.push("head_logvar.b", self.head_logvar.b.clone());
        Ok(b)
    }

    /// Rebuild from an INN bundle plus the two frozen modules it references;
    /// the stored checkpoint identities must match.
    pub fn from_bundle(
        bundle: &ModelBundle,
        generator: Mlp,
        generator_checksum: u32,
        fnn: FnnModel,
        fnn_checksum: u32,
    ) -> Result<Self> {
        if bundle.kind != "inn" {
            return Err(Error::Format(format!(
                "expected an inn bundle, got '{}'",
                bundle.kind
            )));
        }
        let config: InnConfig = serde_json::from_value(bundle.descriptor["architecture"].clone())
            .map_err(|e| Error::Format(format!("inn descriptor: {e}")))?;
        let want_gen = bundle.descriptor["generator_checksum"].as_u64().unwrap_or(0) as u32;
        let want_fnn = bundle.descriptor["fnn_checksum"].as_u64().unwrap_or(0) as u32;
        if want_gen != generator_checksum {
            return Err(Error::Integration(format!(
                "inn was trained against generator checkpoint {want_gen:#010x}, given {generator_checksum:#010x}"
            )));
        }
        if want_fnn != fnn_checksum {
            return Err(Error::Integration(format!(
                "inn was trained against surrogate checkpoint {want_fnn:#010x}, given {fnn_checksum:#010x}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = InnModel::new(config, generator, generator_checksum, fnn, fnn_checksum, &mut rng)?;
        crate::aae::load_mlp(bundle, "body", &mut model.body)?;
        model.head_mu.w = bundle.get("head_mu.w")?.clone();
        model.head_mu.b = bundle.get("head_mu.b")?.clone();
        model.head_logvar.w = bundle.get("head_logvar.w")?.clone();
        model.head_logvar.b = bundle.get("head_logvar.b")?.clone();
        Ok(model)
    }
}

struct DenseBlockOptimizer {
    body: MlpOptimizer,
    mu_w: AdamState,
    mu_b: AdamState,
    lv_w: AdamState,
    lv_b: AdamState,
}

/// Train the dense block; `fields` are physical amplitudes, standardized
/// internally with the frozen surrogate's statistics. Early stopping watches
/// the test composite loss.
pub fn train_inn(
    train_fields: &[Vec<f64>],
    test_fields: &[Vec<f64>],
    mut model: InnModel,
    seed: u64,
) -> Result<(InnModel, Vec<InnEpoch>)> {
    if train_fields.is_empty() || test_fields.is_empty() {
        return Err(Error::Config("inn needs non-empty train and test sets".into()));
    }
    let config = model.config.clone();
    let frozen_before = model.frozen_checksum();
    let train_std: Vec<Tensor> = train_fields
        .iter()
        .map(|f| Ok(Tensor::from_vec(&[config.field_len], model.fnn.stats.standardize(f)?)?))
        .collect::<Result<_>>()?;
    let test_std: Vec<Tensor> = test_fields
        .iter()
        .map(|f| Ok(Tensor::from_vec(&[config.field_len], model.fnn.stats.standardize(f)?)?))
        .collect::<Result<_>>()?;

    let mut train_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x8f0c_91a3_55d1_e249);
    let mut opt = DenseBlockOptimizer {
        body: MlpOptimizer::new(&model.body, config.lr),
        mu_w: AdamState::new(model.head_mu.w.shape(), config.lr),
        mu_b: AdamState::new(model.head_mu.b.shape(), config.lr),
        lv_w: AdamState::new(model.head_logvar.w.shape(), config.lr),
        lv_b: AdamState::new(model.head_logvar.b.shape(), config.lr),
    };

    let mut order: Vec<usize> = (0..train_std.len()).collect();
    let mut history: Vec<InnEpoch> = Vec::new();
    let mut best: Option<(f64, Mlp, Dense, Dense)> = None;
    let mut stale = 0usize;
    for epoch in 1..=config.max_epochs {
        crate::neural::rng::shuffle(&mut order, &mut train_rng);
        let mut train_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch) {
            let x = crate::neural::tensor::stack_rows(&train_std, chunk)?;
            let loss = train_step(&mut model, &x, &mut train_rng, &mut opt)?;
            if !loss.is_finite() {
                return Err(Error::Optimizer(format!(
                    "non-finite inn loss at epoch {epoch}"
                )));
            }
            train_loss += loss;
            batches += 1;
        }
        // Test loss with z = mu (the deterministic inference path).
        let test_loss = evaluate_composite(&model, &test_std)?;
        history.push(InnEpoch {
            epoch,
            train_loss: train_loss / batches as f64,
            test_loss,
        });
        let improved = best.as_ref().map_or(true, |(b, _, _, _)| test_loss < *b);
        if improved {
            best = Some((
                test_loss,
                model.body.clone(),
                model.head_mu.clone(),
                model.head_logvar.clone(),
            ));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    if let Some((_, body, mu, lv)) = best {
        model.body = body;
        model.head_mu = mu;
        model.head_logvar = lv;
    }
    if model.frozen_checksum() != frozen_before {
        return Err(Error::Integration(
            "frozen generator/surrogate parameters changed during inn training".into(),
        ));
    }
    Ok((model, history))
}

fn train_step(
    model: &mut InnModel,
    x: &Tensor,
    rng: &mut impl RngCore,
    opt: &mut DenseBlockOptimizer,
) -> Result<f64> {
    let batch = x.shape()[0];
    let config = model.config.clone();
    // Forward with explicit noise (needed for the backward pass).
    let body_cache = model.body.forward(x)?;
    let mu = model.head_mu.apply(body_cache.output())?;
    let logvar = model.head_logvar.apply(body_cache.output())?;
    let sigma = logvar.map(|v| (0.5 * v).exp());
    let mut u = Tensor::zeros(mu.shape());
    fill_standard_normal(rng, u.data_mut());
    let mut z = mu.clone();
    for ((zv, sv), uv) in z.data_mut().iter_mut().zip(sigma.data()).zip(u.data()) {
        *zv += sv * uv;
    }
    let gen_cache = model.generator.forward(&z)?;
    let image = gen_cache.output();
    let g = model.fnn.config.grid_n;
    let image_batch = image.clone().reshape(&[batch, 1, g, g])?;
    let (pred, conv_cache, dense_cache) = model.fnn.forward(&image_batch)?;

    let (loss, grads) = loss_inn(&pred, x, &mu, &sigma, config.alpha)?;

    // Chain back through the frozen surrogate ...
    let (d_flat, _fnn_dense_grads) = model.fnn.dense.backward(&dense_cache, &grads.d_pred)?;
    let d_conv_out = d_flat.reshape(conv_cache.output.shape())?;
    let (d_image_batch, _fnn_conv_grads) = model.fnn.conv.backward(&conv_cache, &d_conv_out)?;
    let d_image = d_image_batch.reshape(image.shape())?;
    // ... and the frozen generator ...
    let (d_z, _gen_grads) = model.generator.backward(&gen_cache, &d_image)?;
    // ... into the reparameterization and the dense block.
    let mut d_mu = d_z.clone();
    d_mu.add_in_place(&grads.d_mu)?;
    let mut d_sigma_total = grads.d_sigma.clone();
    for (ds, (dz, uv)) in d_sigma_total
        .data_mut()
        .iter_mut()
        .zip(d_z.data().iter().zip(u.data()))
    {
        *ds += dz * uv;
    }
    // logvar head: sigma = exp(logvar / 2) => d logvar = d sigma * sigma / 2.
    let mut d_logvar = d_sigma_total;
    for (dl, sv) in d_logvar.data_mut().iter_mut().zip(sigma.data()) {
        *dl *= 0.5 * sv;
    }
    let (d_body_mu, mu_grads) = model.head_mu.backprop(body_cache.output(), &d_mu)?;
    let (d_body_lv, lv_grads) = model.head_logvar.backprop(body_cache.output(), &d_logvar)?;
    let mut d_body = d_body_mu;
    d_body.add_in_place(&d_body_lv)?;
    let (_, body_grads) = model.body.backward(&body_cache, &d_body)?;

    opt.body.step(&mut model.body, &body_grads)?;
    opt.mu_w.step(&mut model.head_mu.w, &mu_grads.w)?;
    opt.mu_b.step(&mut model.head_mu.b, &mu_grads.b)?;
    opt.lv_w.step(&mut model.head_logvar.w, &lv_grads.w)?;
    opt.lv_b.step(&mut model.head_logvar.b, &lv_grads.b)?;
    Ok(loss)
}

/// Composite loss over a set, evaluated at `z = mu` (sigma still enters the
/// KL term).
fn evaluate_composite(model: &InnModel, fields_std: &[Tensor]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk_start in (0..fields_std.len()).step_by(model.config.batch) {
        let chunk: Vec<usize> =
            (chunk_start..(chunk_start + model.config.batch).min(fields_std.len())).collect();
        let x = crate::neural::tensor::stack_rows(fields_std, &chunk)?;
        let u = Tensor::zeros(&[chunk.len(), model.config.latent]);
        let out = model.forward_with_noise(&x, &u)?;
        let (loss, _) = loss_inn(&out.predicted_fields, &x, &out.mu, &out.sigma, model.config.alpha)?;
        total += loss * chunk.len() as f64;
        count += chunk.len();
    }
    Ok(total / count as f64)
}
