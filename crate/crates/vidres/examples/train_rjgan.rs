//! Train the residual joint GAN on videos, then sample videos and the
//! summary frames G_I(mu) that its image path generates directly from the
//! fixed prior. Pass `chain` to train the z(t) = z(t-1) + delta(t) ablation
//! instead.
//!
//! ```text
//! cargo run --release --example train_rjgan [chain]
//! ```

use std::path::PathBuf;

use vidres::config::{ModelConfig, ModelKind};
use vidres::harness::commands::{cmd_sample, SampleOptions};
use vidres::harness::{train, TrainOptions};
use vidres::synth::{build_dataset, Dataset};

fn main() -> vidres::Result<()> {
    let chain = std::env::args().nth(1).as_deref() == Some("chain");
    let kind = if chain {
        ModelKind::RjganChain
    } else {
        ModelKind::Rjgan
    };
    let root = PathBuf::from(format!("target/demo_{}", kind.name().replace('-', "_")));
    let data = root.join("data");
    build_dataset(32, 8, 16, 4, &data)?;
    let dataset = Dataset::load(&data)?;

    let mut cfg = ModelConfig::desk(kind);
    cfg.frame_size = 16;
    cfg.iterations = 150;
    cfg.seed = 2;

    let mut opts = TrainOptions::new(cfg, root.join("run"));
    opts.ckpt_every = 150;
    let outcome = train(&dataset, &opts)?;

    let grid = root.join("samples.png");
    cmd_sample(&SampleOptions {
        checkpoint: outcome.run_dir,
        num: 8,
        seed: 9,
        summary_frames: true,
        out: grid.clone(),
    })?;
    println!("trained {} for 150 steps; grid at {}", kind.name(), grid.display());
    Ok(())
}
