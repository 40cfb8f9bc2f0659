use vidres::autodiff::{Adam, AdamConfig};
use vidres::config::{ModelConfig, ModelKind};
use vidres::rjvae::Rjvae;
use vidres::rng::RandomSource;
use vidres::synth::{Dataset, VideoTensor};

fn recon_mse(model: &Rjvae<f32>, videos: &[&VideoTensor]) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for v in videos {
        let mu = model.infer_mu(v).unwrap();
        for t in 0..v.num_frames() {
            let d = model.infer_delta(mu.mean(), v.frame(t)).unwrap();
            let z: Vec<f64> = mu.mean().iter().zip(d.mean()).map(|(a, b)| a + b).collect();
            let xh = model.decode_frame(&z).unwrap();
            for (a, b) in v.frame(t).iter().zip(&xh) {
                total += ((a - b) as f64).powi(2);
                count += 1.0;
            }
        }
    }
    total / count
}

fn main() {
    let ds = Dataset::load(std::path::Path::new("/tmp/cal/ds16b")).unwrap();
    let mut cfg = ModelConfig::desk(ModelKind::Rjvae);
    cfg.frame_size = 16;
    cfg.seed = 33;
    let mut model: Rjvae<f32> = Rjvae::new(cfg.clone(), cfg.seed).unwrap();
    let mut adam = Adam::new(AdamConfig { lr: cfg.optimizer.lr, beta1: cfg.optimizer.beta1, beta2: cfg.optimizer.beta2, eps: 1e-8, weight_decay: 0.0 }, &model.params);
    // fixed batch of 4 videos
    let batch: Vec<&VideoTensor> = (0..4).map(|i| ds.entry(i)).collect();
    let mse0 = recon_mse(&model, &batch);
    println!("initial MSE: {mse0:.5}");
    let master = RandomSource::new(cfg.seed);
    let t0 = std::time::Instant::now();
    let mut first_elbo = 0.0;
    let mut last_elbo = 0.0;
    for step in 1..=500u64 {
        let mut rng = master.split((1 << 32) + step);
        let r = model.train_step(&batch, &mut adam, &mut rng).unwrap();
        if step == 1 { first_elbo = r.total; }
        last_elbo = r.total;
        if step % 125 == 0 {
            println!("step {step}: elbo {:.1} mse {:.5} ({:.2} s/step)", r.total, recon_mse(&model, &batch), t0.elapsed().as_secs_f32() / step as f32);
        }
    }
    let mse1 = recon_mse(&model, &batch);
    println!("final MSE: {mse1:.5} drop {:.1}% elbo {first_elbo:.1} -> {last_elbo:.1}", 100.0 * (1.0 - mse1 / mse0));
}
