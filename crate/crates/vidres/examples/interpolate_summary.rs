//! Interpolate between two summary vectors in image latent space and render
//! the corresponding videos: each output row is the summary frame for an
//! interpolated mu followed by the video generated from it under one shared
//! residual noise sequence.
//!
//! ```text
//! cargo run --release --example interpolate_summary
//! ```

use std::path::PathBuf;

use vidres::config::{ModelConfig, ModelKind};
use vidres::harness::commands::{cmd_interpolate, InterpolateOptions};
use vidres::harness::{train, TrainOptions};
use vidres::synth::{build_dataset, Dataset};

fn main() -> vidres::Result<()> {
    let root = PathBuf::from("target/demo_interpolate");
    let data = root.join("data");
    build_dataset(32, 8, 16, 6, &data)?;
    let dataset = Dataset::load(&data)?;

    let mut cfg = ModelConfig::desk(ModelKind::Rjgan);
    cfg.frame_size = 16;
    cfg.iterations = 150;
    cfg.seed = 4;
    let mut opts = TrainOptions::new(cfg, root.join("run"));
    opts.ckpt_every = 150;
    let outcome = train(&dataset, &opts)?;

    let grid = root.join("interpolation.png");
    cmd_interpolate(&InterpolateOptions {
        checkpoint: outcome.run_dir,
        seed_a: 1,
        seed_b: 2,
        steps: 8,
        out: grid.clone(),
    })?;
    println!("interpolation grid (8 rows x [summary | video frames]): {}", grid.display());
    Ok(())
}
