//! Compute the Inception Score and the Fréchet video distance analog for a
//! freshly trained model, using probe classifiers trained on the labeled
//! synthetic dataset.
//!
//! ```text
//! cargo run --release --example evaluate_metrics
//! ```

use std::path::PathBuf;

use vidres::config::{ModelConfig, ModelKind};
use vidres::harness::commands::{cmd_evaluate, EvaluateOptions, MetricKind};
use vidres::harness::{train, TrainOptions};
use vidres::synth::{build_dataset, Dataset};

fn main() -> vidres::Result<()> {
    let root = PathBuf::from("target/demo_evaluate");
    let data = root.join("data");
    build_dataset(32, 8, 16, 8, &data)?;
    let dataset = Dataset::load(&data)?;

    let mut cfg = ModelConfig::desk(ModelKind::Rjgan);
    cfg.frame_size = 16;
    cfg.iterations = 100;
    cfg.seed = 6;
    let mut opts = TrainOptions::new(cfg, root.join("run"));
    opts.ckpt_every = 100;
    let outcome = train(&dataset, &opts)?;

    // Inception Score of summary-frame samples (image path from the prior).
    let is_report = cmd_evaluate(&EvaluateOptions {
        checkpoint: outcome.run_dir.clone(),
        data: data.clone(),
        metric: MetricKind::InceptionScore,
        num: 0,
        batches: 4,
        batch_size: 32,
        probe: None,
        probe_steps: 200,
        seed: 1,
        out: root.join("is_report.json"),
    })?;
    println!(
        "inception score: {:.4} +/- {:.4} over {} images",
        is_report.value, is_report.std, is_report.num_samples
    );

    // Fréchet analog between real and generated video features.
    let fvd_report = cmd_evaluate(&EvaluateOptions {
        checkpoint: outcome.run_dir,
        data,
        metric: MetricKind::FvdAnalog,
        num: 64,
        batches: 0,
        batch_size: 0,
        probe: None,
        probe_steps: 200,
        seed: 1,
        out: root.join("fvd_report.json"),
    })?;
    println!(
        "fvd analog: {:.4} ({} videos per side, features from the {} layer)",
        fvd_report.value, fvd_report.num_samples, fvd_report.feature_layer
    );
    Ok(())
}
