use emtomo::aae::{train_aae, AaeConfig};
use emtomo::fnn::{train_fnn, FnnConfig};
use emtomo::neural::rng::seeded;
use emtomo::neural::Tensor;
use rand_chacha::rand_core::RngCore;
use std::time::Instant;

fn main() {
    let mut rng = seeded(1);
    // Fake desk-scale data: 2000 train images of 1024 px.
    let images: Vec<Tensor> = (0..2000)
        .map(|_| {
            Tensor::from_vec(
                &[1024],
                (0..1024).map(|_| (rng.next_u64() % 2) as f64).collect(),
            )
            .unwrap()
        })
        .collect();
    let mut cfg = AaeConfig::desk(1024);
    cfg.epochs = 5;
    let t0 = Instant::now();
    let _ = train_aae(&images, &cfg, 3, None).unwrap();
    let per_epoch = t0.elapsed().as_secs_f64() / 5.0;
    println!("AAE: {per_epoch:.2} s/epoch -> 500 epochs ~= {:.1} min", per_epoch * 500.0 / 60.0);

    // FNN desk: 2000 train, 200 test, 32x32.
    let fimages: Vec<Tensor> = (0..2200)
        .map(|_| {
            Tensor::from_vec(
                &[1024],
                (0..1024).map(|_| (rng.next_u64() % 3 == 0) as u64 as f64).collect(),
            )
            .unwrap()
        })
        .collect();
    let ffields: Vec<Vec<f64>> = (0..2200)
        .map(|_| (0..256).map(|_| (rng.next_u64() % 1000) as f64 / 500.0).collect())
        .collect();
    let mut fcfg = FnnConfig::desk();
    fcfg.max_epochs = 2;
    fcfg.patience = 5;
    let t1 = Instant::now();
    let _ = train_fnn(&fimages[..2000], &ffields[..2000], &fimages[2000..], &ffields[2000..], &fcfg, 3).unwrap();
    let per_epoch = t1.elapsed().as_secs_f64() / 2.0;
    println!("FNN: {per_epoch:.2} s/epoch -> 60 epochs ~= {:.1} min", per_epoch * 60.0 / 60.0);
}
