// Diagnostic: plain autoencoder (mu head only, no adversarial term) on the
// desk images, to locate the reconstruction bottleneck.
use emtomo::dataset::Dataset;
use emtomo::neural::mlp::{Activation, Mlp, MlpOptimizer};
use emtomo::neural::rng::seeded;
use emtomo::neural::{loss_bce, Tensor};
use std::path::PathBuf;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2e-4);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(120);
    let ds = Dataset::open(&PathBuf::from("target/tmp/acceptance-desk")).unwrap();
    let train = ds.load_range(0, 2000).unwrap();
    let imgs: Vec<Tensor> = train
        .iter()
        .map(|(i, _)| {
            Tensor::from_vec(&[1024], i.mask.iter().map(|&p| p as f64).collect()).unwrap()
        })
        .collect();
    let mut rng = seeded(7);
    let mut enc = Mlp::init(&[1024, 512, 512, 100], Activation::Relu, Activation::Linear, &mut rng);
    let mut gen = Mlp::init(&[100, 512, 512, 1024], Activation::Relu, Activation::Sigmoid, &mut rng);
    let mut eopt = MlpOptimizer::new(&enc, lr);
    let mut gopt = MlpOptimizer::new(&gen, lr);
    let mut order: Vec<usize> = (0..2000).collect();
    let mut trng = seeded(99);
    for epoch in 1..=epochs {
        emtomo::neural::rng::shuffle(&mut order, &mut trng);
        let mut acc = 0.0;
        let mut nb = 0;
        for chunk in order.chunks(100) {
            let x = emtomo::neural::tensor::stack_rows(&imgs, chunk).unwrap();
            let ec = enc.forward(&x).unwrap();
            let gc = gen.forward(ec.output()).unwrap();
            let (bce, d) = loss_bce(gc.output(), &x).unwrap();
            acc += bce;
            nb += 1;
            let (dz, ggr) = gen.backward(&gc, &d).unwrap();
            let (_, egr) = enc.backward(&ec, &dz).unwrap();
            gopt.step(&mut gen, &ggr).unwrap();
            eopt.step(&mut enc, &egr).unwrap();
        }
        if epoch % 10 == 0 || epoch <= 5 {
            println!("lr={lr} epoch {epoch}: bce {:.4}", acc / nb as f64);
        }
    }
}
