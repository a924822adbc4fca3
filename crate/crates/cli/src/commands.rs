//! Subcommand implementations.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};

use emtomo::aae::{train_aae, AaeModel};
use emtomo::config::{RunConfig, Scale};
use emtomo::dataset::{generate_dataset, Dataset};
use emtomo::fnn::{train_fnn, FnnModel};
use emtomo::forward::{validate, FieldVector, SolveMethod};
use emtomo::inn::{train_inn, InnModel};
use emtomo::neural::bundle::{file_checksum, ModelBundle};
use emtomo::neural::{loss_bce, metric_r2, metric_ssim, Tensor};
use emtomo::scene::ContrastImage;

use crate::report::{write_fields_csv, write_pgm, RunReport};
use crate::{Cli, Command};

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = RunConfig::preset(cli.scale.parse::<Scale>()?);
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        config = config.with_overrides(&text)?;
    }
    if let Some(seed) = cli.seed {
        config.dataset.seed = seed;
    }
    if let Some(solver) = &cli.solver {
        config.solver.method = match solver.as_str() {
            "dense" => SolveMethod::DenseDirect,
            "fft" => SolveMethod::IterativeFft,
            other => bail!(emtomo::Error::Config(format!(
                "unknown solver '{other}' (dense|fft)"
            ))),
        };
    }
    if let Some(tol) = cli.tol {
        config.solver.tolerance = tol;
    }
    config.fnn.threads = cli.train_workers.max(1);
    config.validate()?;
    if cli.dry_run {
        println!("{}", toml::to_string_pretty(&config)?);
        return Ok(());
    }
    let seed = config.dataset.seed;
    match &cli.command {
        Command::GenData { n, snr_db, dump_debug } => {
            cmd_gen_data(&cli, config, *n, *snr_db, *dump_debug)
        }
        Command::TrainAae {
            dataset,
            epochs,
            checkpoint_every,
        } => cmd_train_aae(&cli, config, dataset, *epochs, *checkpoint_every, seed),
        Command::TrainFnn { dataset, epochs } => cmd_train_fnn(&cli, config, dataset, *epochs, seed),
        Command::TrainInn {
            dataset,
            aae,
            fnn,
            epochs,
            alpha,
        } => cmd_train_inn(&cli, config, dataset, aae, fnn, *epochs, *alpha, seed),
        Command::Invert {
            model,
            aae,
            fnn,
            dataset,
            index,
            fields,
        } => cmd_invert(&cli, config, model, aae, fnn, dataset.as_deref(), index, fields.as_deref()),
        Command::ValidateSolver => cmd_validate(&cli, config, seed),
        Command::Report {
            dataset,
            split,
            aae,
            fnn,
            inn,
        } => cmd_report(&cli, config, dataset, split, aae.as_deref(), fnn.as_deref(), inn.as_deref()),
    }
}

fn cmd_gen_data(
    cli: &Cli,
    config: RunConfig,
    n: Option<usize>,
    snr_db: Option<f64>,
    dump_debug: bool,
) -> anyhow::Result<()> {
    let n = n.unwrap_or(config.dataset.n_samples);
    let snr = snr_db.or(config.dataset.snr_db);
    let dir = cli.out.join("dataset");
    let t0 = Instant::now();
    let manifest = generate_dataset(
        &dir,
        n,
        &config.scene,
        &config.shape,
        &config.solver,
        config.dataset.seed,
        snr,
        config.dataset.split,
        cli.workers,
    )?;
    if dump_debug {
        let ds = Dataset::open(&dir)?;
        let (img, _) = ds.get(0)?;
        let debug_dir = cli.out.join("debug");
        emtomo::forward::debug_dump::dump_simulation(&debug_dir, &img, &config.scene, &config.solver)?;
    }
    let mut report = RunReport::new("gen-data", config);
    report.metric("n_samples", n as f64);
    report.metric("field_len", manifest.field_len as f64);
    report.timing("generate", t0.elapsed().as_secs_f64());
    report.artifact(&dir.join("manifest.json"));
    for f in &manifest.files {
        report.artifact(&dir.join(&f.name));
    }
    report.finish(&cli.out)?;
    Ok(())
}

/// Dataset split -> flat image tensors (values in {0,1}) and field vectors.
fn load_split(
    ds: &Dataset,
    name: &str,
) -> anyhow::Result<(Vec<Tensor>, Vec<Vec<f64>>)> {
    let range = ds.manifest.split(name)?.clone();
    let mut images = Vec::with_capacity(range.len());
    let mut fields = Vec::with_capacity(range.len());
    for pair in ds.load_range(range.start, range.end)? {
        let (img, f) = pair;
        images.push(image_tensor(&img)?);
        fields.push(f.0);
    }
    Ok((images, fields))
}

fn image_tensor(img: &ContrastImage) -> anyhow::Result<Tensor> {
    Ok(Tensor::from_vec(
        &[img.grid_n * img.grid_n],
        img.mask.iter().map(|&p| p as f64).collect(),
    )?)
}

fn write_history_csv<T: serde::Serialize>(path: &Path, header: &str, rows: &[T]) -> anyhow::Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{header}")?;
    for row in rows {
        // Rows are flat structs of numbers; pull the values in field order.
        let value = serde_json::to_value(row)?;
        let obj = value.as_object().expect("history rows are structs");
        let line: Vec<String> = obj.values().map(|v| v.to_string()).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}

fn cmd_train_aae(
    cli: &Cli,
    mut config: RunConfig,
    dataset: &Path,
    epochs: Option<usize>,
    checkpoint_every: Option<usize>,
    seed: u64,
) -> anyhow::Result<()> {
    if let Some(e) = epochs {
        config.aae.epochs = e;
    }
    if let Some(k) = checkpoint_every {
        config.aae.checkpoint_every = k;
    }
    let ds = Dataset::open(dataset)?;
    check_scene(&config, &ds)?;
    let (images, _) = load_split(&ds, "train")?;
    std::fs::create_dir_all(&cli.out)?;
    let t0 = Instant::now();
    let out_dir = cli.out.clone();
    let mut save_checkpoint = |epoch: usize, model: &AaeModel| -> emtomo::Result<()> {
        model.to_bundle()?.save(&out_dir.join(format!("aae-epoch-{epoch}.emnb")))
    };
    let (model, history) = train_aae(&images, &config.aae, seed, Some(&mut save_checkpoint))?;
    let elapsed = t0.elapsed().as_secs_f64();
    let bundle_path = cli.out.join("aae.emnb");
    model.to_bundle()?.save(&bundle_path)?;
    let csv_path = cli.out.join("aae_history.csv");
    write_history_csv(&csv_path, "epoch,gen_loss,disc_loss,recon_bce", &history)?;
    let mut report = RunReport::new("train-aae", config);
    if let Some(last) = history.last() {
        report.metric("final_gen_loss", last.gen_loss);
        report.metric("final_disc_loss", last.disc_loss);
        report.metric("final_recon_bce", last.recon_bce);
    }
    report.metric("epochs", history.len() as f64);
    report.timing("train", elapsed);
    report.artifact(&bundle_path);
    report.artifact(&csv_path);
    report.finish(&cli.out)?;
    Ok(())
}

fn cmd_train_fnn(
    cli: &Cli,
    mut config: RunConfig,
    dataset: &Path,
    epochs: Option<usize>,
    seed: u64,
) -> anyhow::Result<()> {
    if let Some(e) = epochs {
        config.fnn.max_epochs = e;
    }
    let ds = Dataset::open(dataset)?;
    check_scene(&config, &ds)?;
    let (train_images, train_fields) = load_split(&ds, "train")?;
    let (test_images, test_fields) = load_split(&ds, "test")?;
    std::fs::create_dir_all(&cli.out)?;
    let t0 = Instant::now();
    let (model, history) = train_fnn(
        &train_images,
        &train_fields,
        &test_images,
        &test_fields,
        &config.fnn,
        seed,
    )?;
    let elapsed = t0.elapsed().as_secs_f64();
    let bundle_path = cli.out.join("fnn.emnb");
    model.to_bundle()?.save(&bundle_path)?;
    let csv_path = cli.out.join("fnn_history.csv");
    write_history_csv(&csv_path, "epoch,train_mse,test_mse,r2", &history)?;
    let mut report = RunReport::new("train-fnn", config);
    let best = history
        .iter()
        .map(|h| h.test_mse)
        .fold(f64::INFINITY, f64::min);
    report.metric("best_test_mse", best);
    if let Some(last) = history.last() {
        report.metric("final_test_mse", last.test_mse);
        report.metric("final_r2", last.r2);
    }
    report.metric("epochs", history.len() as f64);
    report.timing("train", elapsed);
    report.artifact(&bundle_path);
    report.artifact(&csv_path);
    report.finish(&cli.out)?;
    Ok(())
}

/// Load the frozen pair for INN wiring: generator from the AAE bundle, the
/// surrogate whole. Checkpoint identity = CRC32 of the bundle file bytes.
fn load_frozen(
    aae_path: &Path,
    fnn_path: &Path,
) -> anyhow::Result<(emtomo::neural::Mlp, u32, FnnModel, u32)> {
    let aae_bundle = ModelBundle::load(aae_path)?;
    let generator = AaeModel::from_bundle(&aae_bundle)?.generator;
    let gen_crc = file_checksum(aae_path)?;
    let fnn_bundle = ModelBundle::load(fnn_path)?;
    let fnn = FnnModel::from_bundle(&fnn_bundle)?;
    let fnn_crc = file_checksum(fnn_path)?;
    Ok((generator, gen_crc, fnn, fnn_crc))
}

#[allow(clippy::too_many_arguments)]
fn cmd_train_inn(
    cli: &Cli,
    mut config: RunConfig,
    dataset: &Path,
    aae_path: &Path,
    fnn_path: &Path,
    epochs: Option<usize>,
    alpha: Option<f64>,
    seed: u64,
) -> anyhow::Result<()> {
    if let Some(e) = epochs {
        config.inn.max_epochs = e;
    }
    if let Some(a) = alpha {
        config.inn.alpha = a;
    }
    let ds = Dataset::open(dataset)?;
    check_scene(&config, &ds)?;
    let (_, train_fields) = load_split(&ds, "train")?;
    let (_, test_fields) = load_split(&ds, "test")?;
    let (generator, gen_crc, fnn, fnn_crc) = load_frozen(aae_path, fnn_path)?;
    let frozen_files_before = (file_checksum(aae_path)?, file_checksum(fnn_path)?);
    let mut rng = emtomo::neural::rng::seeded(seed);
    let model = InnModel::new(config.inn.clone(), generator, gen_crc, fnn, fnn_crc, &mut rng)?;
    std::fs::create_dir_all(&cli.out)?;
    let t0 = Instant::now();
    let (model, history) = train_inn(&train_fields, &test_fields, model, seed)?;
    let elapsed = t0.elapsed().as_secs_f64();
    // Freeze contract also holds on disk.
    let frozen_files_after = (file_checksum(aae_path)?, file_checksum(fnn_path)?);
    if frozen_files_before != frozen_files_after {
        bail!(emtomo::Error::Integration(
            "frozen checkpoint files changed during training".into()
        ));
    }
    let bundle_path = cli.out.join("inn.emnb");
    model.to_bundle()?.save(&bundle_path)?;
    let csv_path = cli.out.join("inn_history.csv");
    write_history_csv(&csv_path, "epoch,train_loss,test_loss", &history)?;
    let mut report = RunReport::new("train-inn", config);
    let best = history
        .iter()
        .map(|h| h.test_loss)
        .fold(f64::INFINITY, f64::min);
    report.metric("best_test_loss", best);
    if let Some(last) = history.last() {
        report.metric("final_test_loss", last.test_loss);
    }
    report.metric("epochs", history.len() as f64);
    report.timing("train", elapsed);
    report.artifact(&bundle_path);
    report.artifact(&csv_path);
    report.finish(&cli.out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_invert(
    cli: &Cli,
    config: RunConfig,
    model_path: &Path,
    aae_path: &Path,
    fnn_path: &Path,
    dataset: Option<&Path>,
    indices: &[usize],
    fields_file: Option<&Path>,
) -> anyhow::Result<()> {
    let (generator, gen_crc, fnn, fnn_crc) = load_frozen(aae_path, fnn_path)?;
    let bundle = ModelBundle::load(model_path)?;
    let model = InnModel::from_bundle(&bundle, generator, gen_crc, fnn, fnn_crc)?;
    std::fs::create_dir_all(&cli.out)?;
    let mut report = RunReport::new("invert", config);
    let g = model.fnn.config.grid_n;
    let t0 = Instant::now();

    let mut cases: Vec<(String, FieldVector, Option<ContrastImage>)> = Vec::new();
    match (dataset, fields_file) {
        (Some(dir), None) => {
            if indices.is_empty() {
                bail!(emtomo::Error::Config("--dataset needs --index".into()));
            }
            let ds = Dataset::open(dir)?;
            for &k in indices {
                let (img, fields) = ds.get(k)?;
                cases.push((format!("{k}"), fields, Some(img)));
            }
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            let values: Vec<f64> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| {
                    l.parse::<f64>()
                        .map_err(|e| emtomo::Error::Format(format!("field value '{l}': {e}")))
                })
                .collect::<emtomo::Result<_>>()?;
            cases.push(("input".into(), FieldVector(values), None));
        }
        _ => bail!(emtomo::Error::Config(
            "invert needs exactly one of --dataset/--index or --fields".into()
        )),
    }

    let mut ssims = Vec::new();
    let mut bces = Vec::new();
    for (name, fields, truth) in &cases {
        let inversion = model.invert(fields)?;
        let mask_path = cli.out.join(format!("inversion-{name}.pgm"));
        let soft_path = cli.out.join(format!("inversion-{name}-soft.pgm"));
        let csv_path = cli.out.join(format!("inversion-{name}-fields.csv"));
        write_pgm(
            &mask_path,
            &inversion.image.mask.iter().map(|&p| p as f64).collect::<Vec<_>>(),
            g,
            g,
        )?;
        write_pgm(&soft_path, &inversion.soft_image, g, g)?;
        write_fields_csv(
            &csv_path,
            "index,input_amplitude,reproduced_amplitude",
            &fields.0,
            Some(&inversion.predicted_fields.0),
        )?;
        report.artifact(&mask_path);
        report.artifact(&soft_path);
        report.artifact(&csv_path);
        if let Some(truth) = truth {
            let (ssim, bce) = image_metrics(&inversion, truth)?;
            println!("sample {name}: SSI {ssim:.4}, BCE {bce:.4}, field-L1 {:.4}", inversion.field_l1_standardized);
            ssims.push(ssim);
            bces.push(bce);
        } else {
            println!(
                "{name}: reconstructed; field-L1 (standardized) {:.4}",
                inversion.field_l1_standardized
            );
        }
    }
    if !ssims.is_empty() {
        report.metric("mean_ssi", mean(&ssims));
        report.metric("mean_bce", mean(&bces));
    }
    report.timing("invert", t0.elapsed().as_secs_f64());
    report.finish(&cli.out)?;
    Ok(())
}

/// SSIM of the thresholded reconstruction and BCE of the soft one, both
/// against the ground-truth mask.
fn image_metrics(
    inversion: &emtomo::inn::Inversion,
    truth: &ContrastImage,
) -> anyhow::Result<(f64, f64)> {
    let g = truth.grid_n;
    let truth_t = Tensor::from_vec(&[g, g], truth.mask.iter().map(|&p| p as f64).collect())?;
    let mask_t = Tensor::from_vec(
        &[g, g],
        inversion.image.mask.iter().map(|&p| p as f64).collect(),
    )?;
    let soft_t = Tensor::from_vec(&[g * g], inversion.soft_image.clone())?;
    let truth_flat = Tensor::from_vec(&[g * g], truth.mask.iter().map(|&p| p as f64).collect())?;
    let ssim = metric_ssim(&mask_t, &truth_t)?;
    let (bce, _) = loss_bce(&soft_t, &truth_flat)?;
    Ok((ssim, bce))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn cmd_validate(cli: &Cli, config: RunConfig, seed: u64) -> anyhow::Result<()> {
    let t0 = Instant::now();
    let result = validate::run_all(seed)?;
    let mut report = RunReport::new("validate-solver", config);
    for check in &result.checks {
        println!(
            "{} {:<38} residual {:.3e} (threshold {:.1e})",
            if check.pass { "PASS" } else { "FAIL" },
            check.name,
            check.value,
            check.threshold
        );
        report.metric(&format!("residual[{}]", check.name), check.value);
    }
    report.timing("validate", t0.elapsed().as_secs_f64());
    report.finish(&cli.out)?;
    if !result.all_pass() {
        bail!(emtomo::Error::Oracle("solver validation failed".into()));
    }
    Ok(())
}

fn cmd_report(
    cli: &Cli,
    config: RunConfig,
    dataset: &Path,
    split: &str,
    aae: Option<&Path>,
    fnn: Option<&Path>,
    inn: Option<&Path>,
) -> anyhow::Result<()> {
    let ds = Dataset::open(dataset)?;
    let (images, fields) = load_split(&ds, split)?;
    let g = ds.manifest.scene.grid_n;
    let mut report = RunReport::new("report", config);
    report.metric("split_samples", images.len() as f64);
    let t0 = Instant::now();

    if let Some(path) = aae {
        let model = AaeModel::from_bundle(&ModelBundle::load(path)?)?;
        let mut ssims = Vec::new();
        let mut bces = Vec::new();
        for img in &images {
            let x = img.clone().reshape(&[1, model.config.input])?;
            let (mu, _) = model.encode(&x)?;
            let recon = model.generate(&mu)?;
            let soft = Tensor::from_vec(&[model.config.input], recon.data().to_vec())?;
            let (bce, _) = loss_bce(&soft, &img.clone().reshape(&[model.config.input])?)?;
            let mask: Vec<f64> = recon.data().iter().map(|&p| (p >= 0.5) as u8 as f64).collect();
            let ssim = metric_ssim(
                &Tensor::from_vec(&[g, g], mask)?,
                &img.clone().reshape(&[g, g])?,
            )?;
            ssims.push(ssim);
            bces.push(bce);
        }
        report.metric("aae_mean_ssi", mean(&ssims));
        report.metric("aae_mean_bce", mean(&bces));
    }

    if let Some(path) = fnn {
        let model = FnnModel::from_bundle(&ModelBundle::load(path)?)?;
        let mut pred_all = Vec::new();
        let mut truth_all = Vec::new();
        let mut se = 0.0;
        let mut count = 0.0;
        for (img, truth) in images.iter().zip(&fields) {
            let pred = model.predict(img)?;
            let pred_std = model.stats.standardize(&pred.0)?;
            let truth_std = model.stats.standardize(truth)?;
            for (p, t) in pred_std.iter().zip(&truth_std) {
                se += (p - t) * (p - t);
                count += 1.0;
            }
            pred_all.extend(pred.0);
            truth_all.extend_from_slice(truth);
        }
        report.metric("fnn_mse", se / count);
        report.metric("fnn_r2", metric_r2(&pred_all, &truth_all)?);
    }

    if let Some(path) = inn {
        let (Some(aae_path), Some(fnn_path)) = (aae, fnn) else {
            bail!(emtomo::Error::Config(
                "--inn needs --aae and --fnn for its frozen parts".into()
            ));
        };
        let (generator, gen_crc, fnn_model, fnn_crc) = load_frozen(aae_path, fnn_path)?;
        let model = InnModel::from_bundle(&ModelBundle::load(path)?, generator, gen_crc, fnn_model, fnn_crc)?;
        let mut ssims = Vec::new();
        let mut bces = Vec::new();
        let mut l1s = Vec::new();
        for (img, f) in images.iter().zip(&fields) {
            let inversion = model.invert(&FieldVector(f.clone()))?;
            let truth = ContrastImage {
                mask: img.data().iter().map(|&v| v as u8).collect(),
                grid_n: g,
                tau: ds.manifest.scene.tau(),
            };
            let (ssim, bce) = image_metrics(&inversion, &truth)?;
            ssims.push(ssim);
            bces.push(bce);
            l1s.push(inversion.field_l1_standardized);
        }
        report.metric("inn_mean_ssi", mean(&ssims));
        report.metric("inn_mean_bce", mean(&bces));
        report.metric("inn_mean_field_l1", mean(&l1s));
    }

    report.timing("report", t0.elapsed().as_secs_f64());
    report.finish(&cli.out)?;
    Ok(())
}

fn check_scene(config: &RunConfig, ds: &Dataset) -> anyhow::Result<()> {
    if ds.manifest.scene.grid_n != config.scene.grid_n
        || ds.manifest.field_len != config.scene.field_len()
    {
        bail!(emtomo::Error::Config(format!(
            "dataset was generated for grid {} / field length {}, run config expects {} / {}; \
             pass a matching --scale/--config",
            ds.manifest.scene.grid_n,
            ds.manifest.field_len,
            config.scene.grid_n,
            config.scene.field_len()
        )));
    }
    Ok(())
}
