//! Verify the analytic ELBO gradients of a double-precision model against
//! central finite differences on a handful of parameters from each group.
//!
//! ```text
//! cargo run --release --example elbo_gradient_check
//! ```

use vidres::config::{ModelConfig, ModelKind};
use vidres::math::{central_difference, relative_error};
use vidres::rjvae::{ElboNoise, Rjvae, PARAM_GROUPS};
use vidres::rng::RandomSource;
use vidres::synth::{VideoTensor, CHANNELS};

fn main() -> vidres::Result<()> {
    let mut cfg = ModelConfig::desk(ModelKind::Rjvae);
    cfg.d_z = 4;
    cfg.d_eps = 4;
    cfg.frame_size = 8;
    cfg.t_frames = 3;
    cfg.clip_len = 3;
    cfg.base_channels = 4;
    cfg.recurrent_hidden = 8;

    let model: Rjvae<f64> = Rjvae::new(cfg.clone(), 7)?;
    let mut rng = RandomSource::new(99);
    let n = cfg.t_frames * CHANNELS * cfg.frame_size * cfg.frame_size;
    let pixels: Vec<f32> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0) as f32).collect();
    let video = VideoTensor::new(pixels, cfg.t_frames, cfg.frame_size, cfg.frame_size, None)?;
    let noise = ElboNoise::draw(cfg.d_z, cfg.t_frames, &mut rng);

    let (report, grads) = model.elbo_loss_and_grads(&video, &noise)?;
    println!(
        "single-sample ELBO {:.4} = recon {:.4} - kl_delta {:.4} - kl_mu {:.4}",
        report.total, report.recon, report.kl_delta, report.kl_mu
    );

    let cell = std::cell::RefCell::new(model);
    for group in PARAM_GROUPS {
        let name = cell
            .borrow()
            .params
            .names_with_prefix(group)
            .next()
            .unwrap()
            .to_string();
        let idx = cell.borrow().params.index_of(&name).unwrap();
        let analytic = grads
            .get(&cell.borrow().params, &name)
            .map_or(0.0, |g| g[0]);
        let orig = cell.borrow().params.values(&name).unwrap()[0];
        let mut theta = vec![orig];
        let numeric = central_difference(&mut theta, 0, 1e-4, &mut |p| {
            let mut m = cell.borrow_mut();
            m.params.values_mut(idx)[0] = p[0];
            Ok(m.elbo_with_noise(&video, &noise)?.total)
        })?;
        cell.borrow_mut().params.values_mut(idx)[0] = orig;
        println!(
            "{name}[0]: analytic {analytic:+.6e} vs finite-difference {numeric:+.6e} \
             (rel err {:.2e})",
            relative_error(analytic, numeric, 1e-8)
        );
    }
    Ok(())
}
