//! Implementations behind the CLI subcommands. The binary stays a thin
//! argument parser over these functions, which are also directly usable as a
//! library surface (the runnable examples call them).

use std::path::{Path, PathBuf};

use crate::config::{ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::metrics::{
    fvd_analog, inception_score, train_probe, LabelKind, MetricReport, ProbeClassifier, ProbeKind,
    ProbeTrainConfig, FEATURE_DIM,
};
use crate::rng::RandomSource;
use crate::synth::{build_dataset, disintegrate, Dataset, DatasetManifest, VideoTensor};

use super::{
    resolve_checkpoint, train, write_grid_png, LoadedModel, TrainOptions, TrainOutcome,
    STREAM_EVAL, STREAM_PROBE, STREAM_SAMPLE,
};

/// Stream id for the disintegration shuffle inside `make-dataset`.
const STREAM_DISINTEGRATE: u64 = 7 << 32;

#[derive(Debug, Clone)]
pub struct MakeDatasetOptions {
    pub out: PathBuf,
    pub num_videos: usize,
    pub frames: usize,
    pub size: usize,
    pub seed: u64,
    pub disintegrate: Option<f64>,
}

pub fn cmd_make_dataset(opts: &MakeDatasetOptions) -> Result<DatasetManifest> {
    let mut manifest = build_dataset(opts.num_videos, opts.frames, opts.size, opts.seed, &opts.out)?;
    if let Some(fraction) = opts.disintegrate {
        let mut rng = RandomSource::new(opts.seed).split(STREAM_DISINTEGRATE);
        manifest = disintegrate(&manifest, fraction, &mut rng)?;
        manifest.save(&opts.out.join("manifest.json"))?;
    }
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct TrainCliOptions {
    pub data: PathBuf,
    pub out: PathBuf,
    pub config: ModelConfig,
    pub ckpt_every: u64,
    pub pretrain_from: Option<PathBuf>,
    pub pretrain_steps: u64,
    pub video_only: bool,
    pub quiet: bool,
}

pub fn cmd_train(opts: &TrainCliOptions) -> Result<TrainOutcome> {
    let dataset = Dataset::load(&opts.data)?;
    let mut topts = TrainOptions::new(opts.config.clone(), opts.out.clone());
    topts.ckpt_every = opts.ckpt_every;
    topts.pretrain_from = opts.pretrain_from.clone();
    topts.pretrain_steps = opts.pretrain_steps;
    topts.force_video_only = opts.video_only;
    topts.quiet = opts.quiet;
    train(&dataset, &topts)
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub checkpoint: PathBuf,
    pub num: usize,
    pub seed: u64,
    pub summary_frames: bool,
    pub out: PathBuf,
}

/// Emit `num` sampled videos as horizontal frame strips (with, optionally,
/// the summary frame as an extra leading tile per strip).
pub fn cmd_sample(opts: &SampleOptions) -> Result<()> {
    if opts.num == 0 {
        return Err(Error::Config("--num must be at least 1".into()));
    }
    let ckpt = resolve_checkpoint(&opts.checkpoint)?;
    let model = LoadedModel::load(&ckpt)?;
    let cfg = model.config();
    let hw = cfg.frame_size;
    let mut rng = RandomSource::new(opts.seed).split(STREAM_SAMPLE);
    let mut tiles: Vec<Vec<f32>> = Vec::new();
    let mut cols = None;
    for _ in 0..opts.num {
        let (video, summary) = model.sample_video(&mut rng)?;
        let mut row_tiles = Vec::new();
        if opts.summary_frames {
            let s = summary.ok_or_else(|| {
                Error::Config(format!(
                    "--summary-frames is unavailable for model kind {}",
                    cfg.model.name()
                ))
            })?;
            row_tiles.push(s);
        }
        for t in 0..video.num_frames() {
            row_tiles.push(video.frame(t).to_vec());
        }
        match cols {
            None => cols = Some(row_tiles.len()),
            Some(c) => {
                if c != row_tiles.len() {
                    return Err(Error::Numerical("inconsistent strip width".into()));
                }
            }
        }
        tiles.extend(row_tiles);
    }
    let cols = cols.unwrap();
    write_grid_png(&opts.out, &tiles, opts.num, cols, hw, hw)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct InterpolateOptions {
    pub checkpoint: PathBuf,
    pub seed_a: u64,
    pub seed_b: u64,
    pub steps: usize,
    pub out: PathBuf,
}

/// Linear interpolation between two prior draws of the summary vector;
/// each output row shows the interpolated summary frame followed by the
/// video generated from it under one shared residual noise sequence.
pub fn cmd_interpolate(opts: &InterpolateOptions) -> Result<()> {
    if opts.steps < 2 {
        return Err(Error::Config("--steps must be at least 2".into()));
    }
    let ckpt = resolve_checkpoint(&opts.checkpoint)?;
    let model = LoadedModel::load(&ckpt)?;
    let cfg = model.config().clone();
    let hw = cfg.frame_size;
    let t = cfg.t_frames;
    let lam = |i: usize| i as f64 / (opts.steps - 1) as f64;

    let mut tiles: Vec<Vec<f32>> = Vec::new();
    match &model {
        LoadedModel::Rjvae(m) => {
            let mu_a = m.prior_mu().sample(&mut RandomSource::new(opts.seed_a).split(STREAM_SAMPLE));
            let mu_b = m.prior_mu().sample(&mut RandomSource::new(opts.seed_b).split(STREAM_SAMPLE));
            // One residual noise sequence shared across all rows.
            let mut nrng = RandomSource::new(opts.seed_a ^ opts.seed_b ^ 0x17).split(STREAM_SAMPLE);
            let noise: Vec<Vec<f64>> = (0..t).map(|_| nrng.normal_vec(cfg.d_z)).collect();
            for i in 0..opts.steps {
                let l = lam(i);
                let mu: Vec<f64> = mu_a
                    .iter()
                    .zip(&mu_b)
                    .map(|(&a, &b)| (1.0 - l) * a + l * b)
                    .collect();
                tiles.push(m.decode_frame(&mu)?);
                let (video, _) = m.generate_from_mu(&mu, &noise)?;
                for ti in 0..t {
                    tiles.push(video.frame(ti).to_vec());
                }
            }
        }
        LoadedModel::Rjgan(m) => {
            let mu_a = m.prior_mu().sample(&mut RandomSource::new(opts.seed_a).split(STREAM_SAMPLE));
            let mu_b = m.prior_mu().sample(&mut RandomSource::new(opts.seed_b).split(STREAM_SAMPLE));
            let mut nrng = RandomSource::new(opts.seed_a ^ opts.seed_b ^ 0x17).split(STREAM_SAMPLE);
            let noise = crate::rjgan::NoiseSequence::draw(t, cfg.d_eps, cfg.sigma_eps, &mut nrng);
            for i in 0..opts.steps {
                let l = lam(i);
                let mu: Vec<f64> = mu_a
                    .iter()
                    .zip(&mu_b)
                    .map(|(&a, &b)| (1.0 - l) * a + l * b)
                    .collect();
                tiles.push(m.summary_frame(&mu)?);
                let video = if m.is_chain() {
                    m.gen_video_chain(&mu, &noise)?.0
                } else {
                    m.gen_video(&mu, &noise)?.video
                };
                for ti in 0..t {
                    tiles.push(video.frame(ti).to_vec());
                }
            }
        }
        _ => {
            return Err(Error::Config(format!(
                "interpolate supports summary-vector models, not {}",
                cfg.model.name()
            )));
        }
    }
    write_grid_png(&opts.out, &tiles, opts.steps, t + 1, hw, hw)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    InceptionScore,
    FvdAnalog,
}

impl MetricKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "is" => Ok(MetricKind::InceptionScore),
            "fvd" => Ok(MetricKind::FvdAnalog),
            other => Err(Error::Config(format!("unknown metric {other:?} (use is|fvd)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::InceptionScore => "is",
            MetricKind::FvdAnalog => "fvd",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub metric: MetricKind,
    /// Videos per side for the Fréchet analog.
    pub num: usize,
    /// Batches and batch size for the Inception Score.
    pub batches: usize,
    pub batch_size: usize,
    /// Reuse a saved probe instead of training one.
    pub probe: Option<PathBuf>,
    pub probe_steps: u64,
    pub seed: u64,
    pub out: PathBuf,
}

/// Train (or load) the probe a metric needs.
pub fn obtain_probe(
    dataset: &Dataset,
    metric: MetricKind,
    probe_path: Option<&Path>,
    probe_steps: u64,
    seed: u64,
    save_to: &Path,
) -> Result<(ProbeClassifier, PathBuf)> {
    if let Some(p) = probe_path {
        let probe = ProbeClassifier::load(p)?;
        let want = match metric {
            MetricKind::InceptionScore => ProbeKind::Image2d,
            MetricKind::FvdAnalog => ProbeKind::Video3d,
        };
        if probe.kind != want {
            return Err(Error::Config(format!(
                "probe at {} has the wrong kind for metric {}",
                p.display(),
                metric.name()
            )));
        }
        return Ok((probe, p.to_path_buf()));
    }
    let kind = match metric {
        MetricKind::InceptionScore => ProbeKind::Image2d,
        MetricKind::FvdAnalog => ProbeKind::Video3d,
    };
    let cfg = ProbeTrainConfig {
        steps: probe_steps,
        ..ProbeTrainConfig::default()
    };
    let mut rng = RandomSource::new(seed).split(STREAM_PROBE);
    let probe = train_probe(dataset, kind, LabelKind::Action, &cfg, &mut rng)?;
    probe.save(save_to)?;
    Ok((probe, save_to.to_path_buf()))
}

pub fn cmd_evaluate(opts: &EvaluateOptions) -> Result<MetricReport> {
    let dataset = Dataset::load(&opts.data)?;
    let ckpt = resolve_checkpoint(&opts.checkpoint)?;
    let model = LoadedModel::load(&ckpt)?;
    let (dh, _) = dataset.frame_hw();
    if model.config().frame_size != dh {
        return Err(Error::Config(format!(
            "model frames are {}px but dataset frames are {dh}px",
            model.config().frame_size
        )));
    }
    let probe_save = opts.out.with_extension("probe");
    let (probe, probe_path) = obtain_probe(
        &dataset,
        opts.metric,
        opts.probe.as_deref(),
        opts.probe_steps,
        opts.seed,
        &probe_save,
    )?;
    let mut rng = RandomSource::new(opts.seed).split(STREAM_EVAL);
    let report = match opts.metric {
        MetricKind::InceptionScore => {
            let n = opts.batches * opts.batch_size;
            if n == 0 {
                return Err(Error::Config("need at least one batch and one image".into()));
            }
            let hw = model.config().frame_size;
            let images: Vec<VideoTensor> = (0..n)
                .map(|_| {
                    let f = model.sample_image(&mut rng)?;
                    VideoTensor::new(f, 1, hw, hw, None)
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&VideoTensor> = images.iter().collect();
            let (mean, std) = inception_score(&refs, &probe, opts.batches, opts.batch_size)?;
            MetricReport {
                metric: "inception_score".into(),
                value: mean,
                std,
                num_samples: n,
                probe_checkpoint: probe_path.display().to_string(),
                seed: opts.seed,
                feature_layer: "penultimate".into(),
                feature_dim: FEATURE_DIM,
            }
        }
        MetricKind::FvdAnalog => {
            if opts.num == 0 {
                return Err(Error::Config("--num must be at least 1".into()));
            }
            let videos = dataset.video_indices();
            if videos.is_empty() {
                return Err(Error::Config("dataset has no videos for the real side".into()));
            }
            let real: Vec<&VideoTensor> = (0..opts.num)
                .map(|_| dataset.entry(videos[rng.below(videos.len() as u64) as usize]))
                .collect();
            let generated: Vec<VideoTensor> = (0..opts.num)
                .map(|_| model.sample_video(&mut rng).map(|(v, _)| v))
                .collect::<Result<_>>()?;
            let gen_refs: Vec<&VideoTensor> = generated.iter().collect();
            let value = fvd_analog(&real, &gen_refs, &probe)?;
            MetricReport {
                metric: "fvd_analog".into(),
                value,
                std: 0.0,
                num_samples: opts.num,
                probe_checkpoint: probe_path.display().to_string(),
                seed: opts.seed,
                feature_layer: "penultimate".into(),
                feature_dim: FEATURE_DIM,
            }
        }
    };
    if let Some(parent) = opts.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&opts.out, serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}

/// Desk-scale config matching a dataset's geometry, for harness-driven runs.
pub fn config_for_dataset(kind: ModelKind, dataset: &Dataset, seed: u64) -> Result<ModelConfig> {
    let (h, _) = dataset.frame_hw();
    let t = dataset
        .entries()
        .iter()
        .filter(|e| e.num_frames() > 1)
        .map(|e| e.num_frames())
        .min()
        .unwrap_or(1);
    let mut cfg = ModelConfig::desk(kind);
    cfg.frame_size = h;
    cfg.t_frames = t.max(1);
    cfg.clip_len = cfg.t_frames;
    cfg.seed = seed;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("vidres_cmd_{tag}_{}", std::process::id()));
        std::fs::remove_dir_all(&d).ok();
        d
    }

    #[test]
    fn make_dataset_with_disintegration() {
        let out = tmp("mkds");
        let manifest = cmd_make_dataset(&MakeDatasetOptions {
            out: out.clone(),
            num_videos: 8,
            frames: 4,
            size: 8,
            seed: 7,
            disintegrate: Some(0.5),
        })
        .unwrap();
        assert_eq!(manifest.num_videos(), 4);
        assert_eq!(manifest.num_images(), 16);
        // The saved manifest reflects the mixed split.
        let reloaded = Dataset::load(&out).unwrap();
        assert_eq!(reloaded.image_indices().len(), 16);
        std::fs::remove_dir_all(&out).ok();
    }

    #[test]
    fn metric_kind_parsing() {
        assert_eq!(MetricKind::parse("is").unwrap(), MetricKind::InceptionScore);
        assert_eq!(MetricKind::parse("fvd").unwrap(), MetricKind::FvdAnalog);
        assert!(MetricKind::parse("nope").is_err());
    }
}
