use emtomo::aae::train_aae;
use emtomo::config::RunConfig;
use emtomo::dataset::{generate_dataset, Dataset, SplitScheme};
use emtomo::fnn::train_fnn;
use emtomo::inn::{train_inn, InnModel};
use emtomo::neural::Tensor;
use std::path::PathBuf;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let aae_epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let mut cfg = RunConfig::desk();
    let dir = PathBuf::from("target/tmp/acceptance-desk");
    let t0 = Instant::now();
    let reuse = Dataset::open(&dir)
        .map(|ds| ds.manifest.n_samples == cfg.dataset.n_samples && ds.manifest.seed == cfg.dataset.seed)
        .unwrap_or(false);
    if !reuse {
        let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        println!("generating 2400 samples with {workers} workers...");
        generate_dataset(&dir, 2400, &cfg.scene, &cfg.shape, &cfg.solver, cfg.dataset.seed, None, SplitScheme::Desk, workers).unwrap();
    }
    println!("dataset ready in {:.1}s (reused={reuse})", t0.elapsed().as_secs_f64());
    let ds = Dataset::open(&dir).unwrap();
    let train = ds.load_range(0, 2000).unwrap();
    let test = ds.load_range(2200, 2400).unwrap();
    let timg: Vec<Tensor> = train.iter().map(|(i, _)| Tensor::from_vec(&[1024], i.mask.iter().map(|&p| p as f64).collect()).unwrap()).collect();
    let tfld: Vec<Vec<f64>> = train.iter().map(|(_, f)| f.0.clone()).collect();
    let simg: Vec<Tensor> = test.iter().map(|(i, _)| Tensor::from_vec(&[1024], i.mask.iter().map(|&p| p as f64).collect()).unwrap()).collect();
    let sfld: Vec<Vec<f64>> = test.iter().map(|(_, f)| f.0.clone()).collect();

    cfg.aae.epochs = aae_epochs;
    let t1 = Instant::now();
    let (aae, hist) = train_aae(&timg, &cfg.aae, cfg.dataset.seed, None).unwrap();
    println!("AAE {} epochs in {:.0}s", aae_epochs, t1.elapsed().as_secs_f64());
    for h in hist.iter().step_by((aae_epochs / 12).max(1)) {
        println!("  epoch {:4}: gen {:.4} disc {:.4} bce {:.4}", h.epoch, h.gen_loss, h.disc_loss, h.recon_bce);
    }
    println!("  last: bce {:.4}", hist.last().unwrap().recon_bce);
    // quick SSIM on 100 train images
    let mut ssim_acc = 0.0;
    for (img, (mask, _)) in timg.iter().zip(&train).take(100) {
        let x = img.clone().reshape(&[1, 1024]).unwrap();
        let (mu, _) = aae.encode(&x).unwrap();
        let recon = aae.generate(&mu).unwrap();
        let th: Vec<f64> = recon.data().iter().map(|&p| (p >= 0.5) as u8 as f64).collect();
        let a = Tensor::from_vec(&[32, 32], th).unwrap();
        let b = Tensor::from_vec(&[32, 32], mask.mask.iter().map(|&p| p as f64).collect()).unwrap();
        ssim_acc += emtomo::neural::metric_ssim(&a, &b).unwrap();
    }
    println!("  mean train SSIM over 100 imgs: {:.3}", ssim_acc / 100.0);
    let mut sig_acc = 0.0;
    let mut mu_max: f64 = 0.0;
    for img in timg.iter().take(200) {
        let x = img.clone().reshape(&[1, 1024]).unwrap();
        let (mu, lv) = aae.encode(&x).unwrap();
        sig_acc += lv.data().iter().map(|v| (0.5 * v).exp()).sum::<f64>() / 100.0;
        mu_max = mu_max.max(mu.data().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    println!("  pooled sigma (200 imgs): {:.3}, max |mu| {:.2}", sig_acc / 200.0, mu_max);

    cfg.fnn.max_epochs = 15;
    let t2 = Instant::now();
    let (fnn, fh) = train_fnn(&timg, &tfld, &simg, &sfld, &cfg.fnn, cfg.dataset.seed).unwrap();
    println!("FNN {} epochs in {:.0}s", fh.len(), t2.elapsed().as_secs_f64());
    for h in &fh {
        println!("  epoch {:3}: train {:.4} test {:.4} r2 {:.3}", h.epoch, h.train_mse, h.test_mse, h.r2);
    }

    cfg.inn.max_epochs = 10;
    let gen = aae.generator.clone();
    let mut rng = emtomo::neural::rng::seeded(cfg.dataset.seed);
    let inn = InnModel::new(cfg.inn.clone(), gen, 0, fnn, 0, &mut rng).unwrap();
    let t3 = Instant::now();
    let (_, ih) = train_inn(&tfld, &sfld, inn, cfg.dataset.seed).unwrap();
    println!("INN {} epochs in {:.0}s", ih.len(), t3.elapsed().as_secs_f64());
    for h in &ih {
        println!("  epoch {:3}: train {:.3} test {:.3}", h.epoch, h.train_loss, h.test_loss);
    }
}
// probe prints sigma statistics too (see main above)
