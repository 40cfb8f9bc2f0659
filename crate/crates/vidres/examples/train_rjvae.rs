//! Train a small residual joint VAE and write a sample grid with summary
//! frames (the image decoded from mu alone) next to each generated video.
//!
//! ```text
//! cargo run --release --example train_rjvae
//! ```

use std::path::PathBuf;

use vidres::config::{ModelConfig, ModelKind};
use vidres::harness::commands::{cmd_sample, SampleOptions};
use vidres::harness::{train, TrainOptions};
use vidres::synth::{build_dataset, Dataset};

fn main() -> vidres::Result<()> {
    let root = PathBuf::from("target/demo_rjvae");
    let data = root.join("data");
    build_dataset(32, 8, 16, 3, &data)?;
    let dataset = Dataset::load(&data)?;

    let mut cfg = ModelConfig::desk(ModelKind::Rjvae);
    cfg.frame_size = 16;
    cfg.iterations = 200;
    cfg.seed = 1;

    let mut opts = TrainOptions::new(cfg, root.join("run"));
    opts.ckpt_every = 100;
    let outcome = train(&dataset, &opts)?;
    println!("final checkpoint: {}", outcome.final_checkpoint.display());

    let grid = root.join("samples.png");
    cmd_sample(&SampleOptions {
        checkpoint: outcome.run_dir.clone(),
        num: 8,
        seed: 5,
        summary_frames: true,
        out: grid.clone(),
    })?;
    println!("sample grid (summary frame + 8-frame strips): {}", grid.display());
    Ok(())
}
