//! Image pre-training experiment at toy scale: disintegrate half the videos
//! into standalone images, pre-train G_I/D_I on them as an image GAN, then
//! train on videos and compare the Fréchet analog against a cold start at a
//! matched iteration count.
//!
//! ```text
//! cargo run --release --example pretrain_compare
//! ```

use std::path::PathBuf;

use vidres::harness::experiments::{run_experiment, ExperimentName, ExperimentOptions};
use vidres::synth::build_dataset;

fn main() -> vidres::Result<()> {
    let root = PathBuf::from("target/demo_pretrain");
    let data = root.join("data");
    build_dataset(32, 8, 16, 9, &data)?;

    let mut opts = ExperimentOptions::new(ExperimentName::PretrainCompare, data, root.join("exp"));
    // Toy budgets so the example finishes in a couple of minutes; the
    // acceptance suite runs the full 500/300 protocol.
    opts.seeds = vec![21];
    opts.video_iters = 60;
    opts.pretrain_iters = 120;
    opts.eval_num = 32;
    opts.probe_steps = 200;
    let report = run_experiment(&opts)?;
    println!(
        "cold FVD median {:.3} vs pretrained {:.3}",
        report.medians["cold_fvd"], report.medians["pretrained_fvd"]
    );
    Ok(())
}
