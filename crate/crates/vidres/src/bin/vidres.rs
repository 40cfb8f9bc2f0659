//! Thin command-line front end over the `vidres` library.
//!
//! Exit codes: 0 success, 2 usage/config errors, 1 runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vidres::config::{ModelConfig, ModelKind};
use vidres::error::Error;
use vidres::harness::commands::{
    cmd_evaluate, cmd_interpolate, cmd_make_dataset, cmd_sample, cmd_train, EvaluateOptions,
    InterpolateOptions, MakeDatasetOptions, MetricKind, SampleOptions, TrainCliOptions,
};
use vidres::harness::experiments::{run_experiment, ExperimentName, ExperimentOptions};

#[derive(Parser)]
#[command(
    name = "vidres",
    about = "Residual-vector models for joint image and video generation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the procedural sprite video dataset to disk.
    MakeDataset(MakeDatasetArgs),
    /// Train a model, writing checkpoints and a per-step loss CSV.
    Train(TrainArgs),
    /// Sample videos from a checkpoint as a PNG grid of frame strips.
    Sample(SampleArgs),
    /// Interpolate between two summary vectors and render the grid.
    Interpolate(InterpolateArgs),
    /// Compute a metric (Inception Score or the Fréchet video analog).
    Evaluate(EvaluateArgs),
    /// Run a named multi-run comparison protocol.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct MakeDatasetArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    num_videos: usize,
    #[arg(long, default_value_t = 8)]
    frames: usize,
    /// Frame edge length in pixels (power of two, >= 8).
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace this fraction of the videos by their frames as standalone images.
    #[arg(long)]
    disintegrate: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Model kind: rjvae | rjgan | rjgan-chain | rmocogan | baseline-image.
    #[arg(long)]
    model: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Configuration preset: desk (default) or paper.
    #[arg(long, default_value = "desk")]
    preset: String,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    frame_size: Option<usize>,
    #[arg(long)]
    t_frames: Option<usize>,
    #[arg(long)]
    summary_term_period: Option<u64>,
    /// Count the duplicated real-image objective term only once.
    #[arg(long)]
    eq1_deduplicate: bool,
    #[arg(long, default_value_t = 100)]
    ckpt_every: u64,
    /// Checkpoint or run directory supplying pretrained G_I/D_I groups.
    #[arg(long)]
    pretrain_from: Option<PathBuf>,
    /// Image-GAN pre-training steps before video training (GAN models).
    #[arg(long, default_value_t = 0)]
    pretrain_steps: u64,
    /// Ignore standalone images even if the dataset has them.
    #[arg(long)]
    video_only: bool,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SampleArgs {
    /// Checkpoint directory or run directory (latest checkpoint is used).
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value_t = 16)]
    num: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prepend each strip with the summary frame G_I(mu).
    #[arg(long)]
    summary_frames: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InterpolateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Seed for the first summary-vector endpoint.
    #[arg(long, default_value_t = 0)]
    seed_a: u64,
    /// Seed for the second summary-vector endpoint.
    #[arg(long, default_value_t = 1)]
    seed_b: u64,
    #[arg(long, default_value_t = 8)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Metric: is | fvd.
    #[arg(long)]
    metric: String,
    /// Videos per side for the Fréchet analog.
    #[arg(long, default_value_t = 256)]
    num: usize,
    #[arg(long, default_value_t = 10)]
    batches: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    /// Reuse a previously saved probe directory.
    #[arg(long)]
    probe: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    probe_steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; defaults to <metric>_report.json in the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// pretrain-compare | mixed-train | image-bench.
    name: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated seed list shared by all arms.
    #[arg(long, value_delimiter = ',', default_values_t = vec![11u64, 12, 13])]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 300)]
    video_iters: u64,
    #[arg(long, default_value_t = 500)]
    pretrain_iters: u64,
    #[arg(long, default_value_t = 64)]
    eval_num: usize,
    #[arg(long, default_value_t = 4)]
    batches: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 300)]
    probe_steps: u64,
    #[arg(long)]
    quiet: bool,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Contract(_) => 2,
        _ => 1,
    }
}

fn resolve_train_config(args: &TrainArgs) -> Result<ModelConfig, Error> {
    let kind = ModelKind::parse(&args.model)?;
    let mut cfg = match args.config.as_ref() {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut file_cfg: ModelConfig = serde_json::from_str(&text)?;
            file_cfg.model = kind;
            file_cfg
        }
        None => match args.preset.as_str() {
            "desk" => ModelConfig::desk(kind),
            "paper" => ModelConfig::paper(kind),
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?} (use desk|paper)"
                )))
            }
        },
    };
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.lr {
        cfg.optimizer.lr = v;
    }
    if let Some(v) = args.frame_size {
        cfg.frame_size = v;
    }
    if let Some(v) = args.t_frames {
        cfg.t_frames = v;
        cfg.clip_len = cfg.clip_len.min(v);
    }
    if let Some(v) = args.summary_term_period {
        cfg.summary_term_period = v;
    }
    if args.eq1_deduplicate {
        cfg.eq1_deduplicate = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::MakeDataset(a) => {
            let manifest = cmd_make_dataset(&MakeDatasetOptions {
                out: a.out.clone(),
                num_videos: a.num_videos,
                frames: a.frames,
                size: a.size,
                seed: a.seed,
                disintegrate: a.disintegrate,
            })?;
            println!(
                "wrote {} entries ({} videos, {} images) to {}",
                manifest.videos.len(),
                manifest.num_videos(),
                manifest.num_images(),
                a.out.display()
            );
        }
        Command::Train(a) => {
            let config = resolve_train_config(&a)?;
            let outcome = cmd_train(&TrainCliOptions {
                data: a.data,
                out: a.out,
                config,
                ckpt_every: a.ckpt_every,
                pretrain_from: a.pretrain_from,
                pretrain_steps: a.pretrain_steps,
                video_only: a.video_only,
                quiet: a.quiet,
            })?;
            println!(
                "finished at step {}; final checkpoint {}",
                outcome.final_step,
                outcome.final_checkpoint.display()
            );
        }
        Command::Sample(a) => {
            cmd_sample(&SampleOptions {
                checkpoint: a.ckpt,
                num: a.num,
                seed: a.seed,
                summary_frames: a.summary_frames,
                out: a.out.clone(),
            })?;
            println!("wrote {}", a.out.display());
        }
        Command::Interpolate(a) => {
            cmd_interpolate(&InterpolateOptions {
                checkpoint: a.ckpt,
                seed_a: a.seed_a,
                seed_b: a.seed_b,
                steps: a.steps,
                out: a.out.clone(),
            })?;
            println!("wrote {}", a.out.display());
        }
        Command::Evaluate(a) => {
            let metric = MetricKind::parse(&a.metric)?;
            let out = a
                .out
                .unwrap_or_else(|| PathBuf::from(format!("{}_report.json", metric.name())));
            let report = cmd_evaluate(&EvaluateOptions {
                checkpoint: a.ckpt,
                data: a.data,
                metric,
                num: a.num,
                batches: a.batches,
                batch_size: a.batch_size,
                probe: a.probe,
                probe_steps: a.probe_steps,
                seed: a.seed,
                out: out.clone(),
            })?;
            println!(
                "{} = {:.6} (std {:.6}, {} samples); report at {}",
                report.metric,
                report.value,
                report.std,
                report.num_samples,
                out.display()
            );
        }
        Command::Experiment(a) => {
            let name = ExperimentName::parse(&a.name)?;
            let mut opts = ExperimentOptions::new(name, a.data, a.out);
            opts.seeds = a.seeds;
            opts.video_iters = a.video_iters;
            opts.pretrain_iters = a.pretrain_iters;
            opts.eval_num = a.eval_num;
            opts.batches = a.batches;
            opts.batch_size = a.batch_size;
            opts.probe_steps = a.probe_steps;
            opts.quiet = a.quiet;
            run_experiment(&opts)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
