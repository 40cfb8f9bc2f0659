//! Run directories, training loops, sampling helpers, and the experiment
//! runners behind the `vidres` CLI.
//!
//! A run directory is fully reconstructible: the config snapshot, the seed
//! and the dataset determine every emitted artifact bit-exactly. Per-step
//! randomness is derived as `RandomSource::new(seed).split(STREAM_TRAIN + step)`,
//! so an interrupted run resumed from its last checkpoint replays the exact
//! step stream an uninterrupted run would have seen.

pub mod commands;
pub mod experiments;

use std::path::{Path, PathBuf};

use crate::autodiff::{Adam, AdamConfig};
use crate::checkpoint;
use crate::config::{ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::rjgan::{BaselineImageGan, NoiseSequence, Rjgan, TrainMode};
use crate::rjvae::Rjvae;
use crate::rmocogan::Rmocogan;
use crate::rng::RandomSource;
use crate::synth::{pixels_to_bytes, write_frame_png, Dataset, VideoTensor, CHANNELS};

/// Stream offsets for seed derivation (model constructors use ids < 2^16).
pub const STREAM_TRAIN: u64 = 1 << 32;
pub const STREAM_PRETRAIN: u64 = 2 << 32;
pub const STREAM_SAMPLE: u64 = 3 << 32;
pub const STREAM_EVAL: u64 = 4 << 32;
pub const STREAM_PROBE: u64 = 5 << 32;
pub const STREAM_EXPERIMENT: u64 = 6 << 32;

fn adam_config(cfg: &ModelConfig) -> AdamConfig {
    AdamConfig {
        lr: cfg.optimizer.lr,
        beta1: cfg.optimizer.beta1,
        beta2: cfg.optimizer.beta2,
        eps: 1e-8,
        weight_decay: cfg.optimizer.weight_decay,
    }
}

/// Any trained model, loaded back from a checkpoint for sampling/evaluation.
pub enum LoadedModel {
    Rjvae(Rjvae<f32>),
    Rjgan(Rjgan<f32>),
    Rmocogan(Rmocogan<f32>),
    Baseline(BaselineImageGan<f32>),
}

impl LoadedModel {
    pub fn load(ckpt: &Path) -> Result<Self> {
        let meta = checkpoint::read_meta(ckpt)?;
        let cfg = meta.config.clone();
        Ok(match cfg.model {
            ModelKind::Rjvae => {
                let mut m = Rjvae::new(cfg, 0)?;
                checkpoint::load_params(ckpt, &mut m.params)?;
                LoadedModel::Rjvae(m)
            }
            ModelKind::Rjgan | ModelKind::RjganChain => {
                let mut m = Rjgan::new(cfg, 0)?;
                checkpoint::load_params(ckpt, &mut m.params)?;
                LoadedModel::Rjgan(m)
            }
            ModelKind::Rmocogan => {
                let mut m = Rmocogan::new(cfg, 0)?;
                checkpoint::load_params(ckpt, &mut m.params)?;
                LoadedModel::Rmocogan(m)
            }
            ModelKind::BaselineImage => {
                let mut m = BaselineImageGan::new(cfg, 0)?;
                checkpoint::load_params(ckpt, &mut m.params)?;
                LoadedModel::Baseline(m)
            }
        })
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            LoadedModel::Rjvae(m) => m.config(),
            LoadedModel::Rjgan(m) => m.config(),
            LoadedModel::Rmocogan(m) => m.config(),
            LoadedModel::Baseline(m) => m.config(),
        }
    }

    /// One sampled video plus, where the model has one, its summary frame.
    pub fn sample_video(&self, rng: &mut RandomSource) -> Result<(VideoTensor, Option<Vec<f32>>)> {
        let cfg = self.config();
        match self {
            LoadedModel::Rjvae(m) => {
                let (video, path) = m.generate(cfg.t_frames, rng)?;
                let summary = m.decode_frame(&path.mu)?;
                Ok((video, Some(summary)))
            }
            LoadedModel::Rjgan(m) => {
                let mu = m.prior_mu().sample(rng);
                let noise = NoiseSequence::draw(cfg.t_frames, cfg.d_eps, cfg.sigma_eps, rng);
                if m.is_chain() {
                    let (video, path) = m.gen_video_chain(&mu, &noise)?;
                    let summary = m.summary_frame(&path.z0)?;
                    Ok((video, Some(summary)))
                } else {
                    let gv = m.gen_video(&mu, &noise)?;
                    let summary = m.summary_frame(&mu)?;
                    Ok((gv.video, Some(summary)))
                }
            }
            LoadedModel::Rmocogan(m) => {
                let z_c = m.sample_content(rng);
                let noise = NoiseSequence::draw(cfg.t_frames, cfg.d_eps, cfg.sigma_eps, rng);
                let motion = m.gen_motion_path(&noise)?;
                Ok((m.gen_video(&z_c, &motion)?, None))
            }
            LoadedModel::Baseline(m) => {
                let mu = m.prior().sample(rng);
                let frame = m.sample_image(&mu)?;
                let hw = cfg.frame_size;
                Ok((VideoTensor::new(frame, 1, hw, hw, None)?, None))
            }
        }
    }

    /// One sampled image through the model's fixed-prior image path.
    pub fn sample_image(&self, rng: &mut RandomSource) -> Result<Vec<f32>> {
        let cfg = self.config();
        match self {
            LoadedModel::Rjvae(m) => {
                let mu = m.prior_mu().sample(rng);
                m.decode_frame(&mu)
            }
            LoadedModel::Rjgan(m) => {
                let mu = m.prior_mu().sample(rng);
                m.summary_frame(&mu)
            }
            LoadedModel::Rmocogan(m) => {
                // No standalone image path; use the first frame of a sample.
                let z_c = m.sample_content(rng);
                let noise = NoiseSequence::draw(1, cfg.d_eps, cfg.sigma_eps, rng);
                let motion = m.gen_motion_path(&noise)?;
                Ok(m.gen_video(&z_c, &motion)?.frame(0).to_vec())
            }
            LoadedModel::Baseline(m) => {
                let mu = m.prior().sample(rng);
                m.sample_image(&mu)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub config: ModelConfig,
    pub out_dir: PathBuf,
    pub ckpt_every: u64,
    /// Checkpoint (or run directory) providing pretrained G_I/D_I groups.
    pub pretrain_from: Option<PathBuf>,
    /// Image-GAN pre-training steps on the dataset's standalone images
    /// before the main loop (GAN models only).
    pub pretrain_steps: u64,
    /// Train only on video entries even when standalone images exist.
    pub force_video_only: bool,
    /// Progress lines to stdout.
    pub quiet: bool,
}

impl TrainOptions {
    pub fn new(config: ModelConfig, out_dir: PathBuf) -> Self {
        TrainOptions {
            config,
            out_dir,
            ckpt_every: 100,
            pretrain_from: None,
            pretrain_steps: 0,
            force_video_only: false,
            quiet: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub final_step: u64,
    pub final_checkpoint: PathBuf,
    /// Smoothed head/tail of the per-step primary loss column, for quick
    /// improvement checks (ELBO for the VAE, discriminator loss for GANs).
    pub loss_rows: Vec<Vec<f64>>,
}

fn csv_header(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Rjvae => "step,elbo,recon,kl_delta,kl_mu",
        ModelKind::Rjgan | ModelKind::RjganChain => {
            "step,d_loss,g_loss,real_image,fake_image,real_video,fake_video,real_image_dup,summary_fake"
        }
        ModelKind::Rmocogan => "step,d_loss,g_loss,real_image,fake_image,real_video,fake_video",
        ModelKind::BaselineImage => "step,d_loss,g_loss",
    }
}

pub fn checkpoint_dir(run_dir: &Path, step: u64) -> PathBuf {
    run_dir.join("checkpoints").join(format!("step_{step:06}"))
}

/// Latest checkpoint in a run directory, or the directory itself when it
/// already is a checkpoint (contains meta.json).
pub fn resolve_checkpoint(path: &Path) -> Result<PathBuf> {
    if path.join("meta.json").is_file() {
        return Ok(path.to_path_buf());
    }
    let ckpts = path.join("checkpoints");
    let mut best: Option<(u64, PathBuf)> = None;
    if ckpts.is_dir() {
        for entry in std::fs::read_dir(&ckpts)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(num) = name.strip_prefix("step_") {
                if let Ok(step) = num.parse::<u64>() {
                    if best.as_ref().map_or(true, |(b, _)| step > *b) {
                        best = Some((step, entry.path()));
                    }
                }
            }
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| {
        Error::Config(format!(
            "no checkpoint found under {} (expected meta.json or checkpoints/step_*)",
            path.display()
        ))
    })
}

struct LossCsv {
    path: PathBuf,
    rows: Vec<Vec<f64>>,
    header: String,
}

impl LossCsv {
    /// Open or create the loss CSV, dropping rows past `start_step` so a
    /// resumed run continues without duplicates or gaps.
    fn open(run_dir: &Path, kind: ModelKind, start_step: u64) -> Result<Self> {
        let path = run_dir.join("loss.csv");
        let header = csv_header(kind).to_string();
        let mut rows = Vec::new();
        if path.is_file() {
            let text = std::fs::read_to_string(&path)?;
            for (i, line) in text.lines().enumerate() {
                if i == 0 {
                    if line != header {
                        return Err(Error::Config("loss.csv header mismatch".into()));
                    }
                    continue;
                }
                let vals: Vec<f64> = line
                    .split(',')
                    .map(|v| v.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Config(format!("bad loss.csv row: {e}")))?;
                if (vals[0] as u64) <= start_step {
                    rows.push(vals);
                }
            }
        }
        let csv = LossCsv { path, rows, header };
        csv.flush()?;
        Ok(csv)
    }

    fn push(&mut self, row: Vec<f64>) -> Result<()> {
        self.rows.push(row);
        // Append just the new row.
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new().append(true).open(&self.path)?;
        let line = self
            .rows
            .last()
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if i == 0 {
                    format!("{}", *v as u64)
                } else {
                    format!("{v}")
                }
            })
            .collect::<Vec<_>>()
            .join(",");
        writeln!(f, "{line}")?;
        Ok(())
    }

    fn flush(&self) -> Result<()> {
        use std::io::Write;
        let mut f = std::fs::File::create(&self.path)?;
        writeln!(f, "{}", self.header)?;
        for row in &self.rows {
            let line = row
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if i == 0 {
                        format!("{}", *v as u64)
                    } else {
                        format!("{v}")
                    }
                })
                .collect::<Vec<_>>()
                .join(",");
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Train any model kind on the given dataset, writing a run directory with a
/// config snapshot, per-step loss rows, and periodic checkpoints.
pub fn train(dataset: &Dataset, opts: &TrainOptions) -> Result<TrainOutcome> {
    let cfg = &opts.config;
    cfg.validate()?;
    let (h, _) = dataset.frame_hw();
    if h != cfg.frame_size {
        return Err(Error::Config(format!(
            "dataset frames are {h}px, config expects {}px",
            cfg.frame_size
        )));
    }
    std::fs::create_dir_all(&opts.out_dir)?;
    let cfg_path = opts.out_dir.join("config.json");
    if cfg_path.is_file() {
        let existing: ModelConfig = serde_json::from_str(&std::fs::read_to_string(&cfg_path)?)?;
        if existing != *cfg {
            return Err(Error::Config(
                "run directory already holds a different config; refusing to mix runs".into(),
            ));
        }
    } else {
        std::fs::write(&cfg_path, serde_json::to_string_pretty(cfg)? + "\n")?;
    }

    let video_idx = dataset.video_indices();
    let image_idx = dataset.image_indices();
    if video_idx.is_empty() && cfg.model != ModelKind::BaselineImage {
        return Err(Error::Config("dataset has no video entries".into()));
    }

    // Resume from the latest checkpoint when one exists.
    let start_step = match resolve_checkpoint(&opts.out_dir) {
        Ok(ckpt) => checkpoint::read_meta(&ckpt)?.step,
        Err(_) => 0,
    };

    let master = RandomSource::new(cfg.seed);
    let mut csv = LossCsv::open(&opts.out_dir, cfg.model, start_step)?;
    let progress_every = (cfg.iterations / 10).max(1);

    let batch_of = |rng: &mut RandomSource, pool: &[usize]| -> Vec<usize> {
        (0..cfg.batch_size)
            .map(|_| pool[rng.below(pool.len() as u64) as usize])
            .collect()
    };

    macro_rules! run_loop {
        ($save:expr, $step_fn:expr) => {{
            if start_step >= cfg.iterations {
                // Nothing to do; report the existing checkpoint.
            }
            for step in (start_step + 1)..=cfg.iterations {
                let mut rng = master.split(STREAM_TRAIN + step);
                let row = $step_fn(step, &mut rng)?;
                csv.push(row)?;
                if !opts.quiet && (step % progress_every == 0 || step == cfg.iterations) {
                    let tail = csv.rows.last().unwrap();
                    println!(
                        "step {step}/{}: {}",
                        cfg.iterations,
                        tail[1..]
                            .iter()
                            .map(|v| format!("{v:.4}"))
                            .collect::<Vec<_>>()
                            .join(" ")
                    );
                }
                if step % opts.ckpt_every == 0 || step == cfg.iterations {
                    $save(step)?;
                }
            }
        }};
    }

    match cfg.model {
        ModelKind::Rjvae => {
            let mut model: Rjvae<f32> = Rjvae::new(cfg.clone(), cfg.seed)?;
            let mut adam = Adam::new(adam_config(cfg), &model.params);
            if start_step > 0 {
                let ckpt = resolve_checkpoint(&opts.out_dir)?;
                checkpoint::load_params(&ckpt, &mut model.params)?;
                checkpoint::load_adam(&ckpt, "main", &mut adam, &model.params)?;
            }
            let model = std::cell::RefCell::new(model);
            let adam = std::cell::RefCell::new(adam);
            let save = |step: u64| -> Result<()> {
                checkpoint::save(
                    &checkpoint_dir(&opts.out_dir, step),
                    cfg.model.name(),
                    step,
                    cfg,
                    &model.borrow().params,
                    &[("main", &adam.borrow())],
                )
            };
            run_loop!(save, |_step: u64, rng: &mut RandomSource| -> Result<Vec<f64>> {
                let batch_idx = batch_of(rng, &video_idx);
                let batch: Vec<&VideoTensor> = batch_idx.iter().map(|&i| dataset.entry(i)).collect();
                let r = model
                    .borrow_mut()
                    .train_step(&batch, &mut adam.borrow_mut(), rng)?;
                Ok(vec![_step as f64, r.total, r.recon, r.kl_delta, r.kl_mu])
            });
        }
        ModelKind::Rjgan | ModelKind::RjganChain => {
            let mut model: Rjgan<f32> = Rjgan::new(cfg.clone(), cfg.seed)?;
            let mut adam_d = Adam::new(adam_config(cfg), &model.params);
            let mut adam_g = Adam::new(adam_config(cfg), &model.params);
            if let Some(src) = &opts.pretrain_from {
                let ckpt = resolve_checkpoint(src)?;
                let loaded =
                    checkpoint::load_params_with_prefixes(&ckpt, &mut model.params, &["g_i.", "d_i."])?;
                if !opts.quiet {
                    println!("loaded {loaded} pretrained G_I/D_I arrays from {}", ckpt.display());
                }
            }
            if start_step > 0 {
                let ckpt = resolve_checkpoint(&opts.out_dir)?;
                checkpoint::load_params(&ckpt, &mut model.params)?;
                checkpoint::load_adam(&ckpt, "d", &mut adam_d, &model.params)?;
                checkpoint::load_adam(&ckpt, "g", &mut adam_g, &model.params)?;
            } else if opts.pretrain_steps > 0 {
                let images: Vec<&VideoTensor> = image_idx.iter().map(|&i| dataset.entry(i)).collect();
                if images.is_empty() {
                    return Err(Error::Config(
                        "pre-training requested but the dataset has no standalone images".into(),
                    ));
                }
                for pstep in 1..=opts.pretrain_steps {
                    let mut rng = master.split(STREAM_PRETRAIN + pstep);
                    model.pretrain_image_step(&images, &mut adam_d, &mut adam_g, &mut rng)?;
                }
                if !opts.quiet {
                    println!("pre-trained G_I/D_I for {} image steps", opts.pretrain_steps);
                }
            }
            let mode = if cfg.model == ModelKind::RjganChain {
                TrainMode::Chain
            } else if !image_idx.is_empty() && !opts.force_video_only {
                TrainMode::Mixed
            } else {
                TrainMode::VideoOnly
            };
            let model = std::cell::RefCell::new(model);
            let adam_d = std::cell::RefCell::new(adam_d);
            let adam_g = std::cell::RefCell::new(adam_g);
            let save = |step: u64| -> Result<()> {
                checkpoint::save(
                    &checkpoint_dir(&opts.out_dir, step),
                    cfg.model.name(),
                    step,
                    cfg,
                    &model.borrow().params,
                    &[("d", &adam_d.borrow()), ("g", &adam_g.borrow())],
                )
            };
            run_loop!(save, |step: u64, rng: &mut RandomSource| -> Result<Vec<f64>> {
                let batch_idx = batch_of(rng, &video_idx);
                let batch: Vec<&VideoTensor> = batch_idx.iter().map(|&i| dataset.entry(i)).collect();
                let images: Vec<&VideoTensor> = image_idx.iter().map(|&i| dataset.entry(i)).collect();
                let r = model.borrow_mut().train_step(
                    &batch,
                    &images,
                    &mut adam_d.borrow_mut(),
                    &mut adam_g.borrow_mut(),
                    step - 1,
                    mode,
                    rng,
                )?;
                Ok(vec![
                    step as f64,
                    r.d_loss,
                    r.g_loss,
                    r.terms.real_image,
                    r.terms.fake_image,
                    r.terms.real_video,
                    r.terms.fake_video,
                    r.terms.real_image_dup,
                    r.terms.summary_fake,
                ])
            });
        }
        ModelKind::Rmocogan => {
            let mut model: Rmocogan<f32> = Rmocogan::new(cfg.clone(), cfg.seed)?;
            let mut adam_d = Adam::new(adam_config(cfg), &model.params);
            let mut adam_g = Adam::new(adam_config(cfg), &model.params);
            if start_step > 0 {
                let ckpt = resolve_checkpoint(&opts.out_dir)?;
                checkpoint::load_params(&ckpt, &mut model.params)?;
                checkpoint::load_adam(&ckpt, "d", &mut adam_d, &model.params)?;
                checkpoint::load_adam(&ckpt, "g", &mut adam_g, &model.params)?;
            }
            let model = std::cell::RefCell::new(model);
            let adam_d = std::cell::RefCell::new(adam_d);
            let adam_g = std::cell::RefCell::new(adam_g);
            let save = |step: u64| -> Result<()> {
                checkpoint::save(
                    &checkpoint_dir(&opts.out_dir, step),
                    cfg.model.name(),
                    step,
                    cfg,
                    &model.borrow().params,
                    &[("d", &adam_d.borrow()), ("g", &adam_g.borrow())],
                )
            };
            run_loop!(save, |step: u64, rng: &mut RandomSource| -> Result<Vec<f64>> {
                let batch_idx = batch_of(rng, &video_idx);
                let batch: Vec<&VideoTensor> = batch_idx.iter().map(|&i| dataset.entry(i)).collect();
                let r = model.borrow_mut().train_step(
                    &batch,
                    &mut adam_d.borrow_mut(),
                    &mut adam_g.borrow_mut(),
                    rng,
                )?;
                Ok(vec![
                    step as f64,
                    r.d_loss,
                    r.g_loss,
                    r.real_image,
                    r.fake_image,
                    r.real_video,
                    r.fake_video,
                ])
            });
        }
        ModelKind::BaselineImage => {
            let pool: Vec<usize> = if video_idx.is_empty() {
                image_idx.clone()
            } else {
                video_idx.clone()
            };
            if pool.is_empty() {
                return Err(Error::Config("dataset is empty".into()));
            }
            let mut model: BaselineImageGan<f32> = BaselineImageGan::new(cfg.clone(), cfg.seed)?;
            let mut adam_d = Adam::new(adam_config(cfg), &model.params);
            let mut adam_g = Adam::new(adam_config(cfg), &model.params);
            if start_step > 0 {
                let ckpt = resolve_checkpoint(&opts.out_dir)?;
                checkpoint::load_params(&ckpt, &mut model.params)?;
                checkpoint::load_adam(&ckpt, "d", &mut adam_d, &model.params)?;
                checkpoint::load_adam(&ckpt, "g", &mut adam_g, &model.params)?;
            }
            let model = std::cell::RefCell::new(model);
            let adam_d = std::cell::RefCell::new(adam_d);
            let adam_g = std::cell::RefCell::new(adam_g);
            let save = |step: u64| -> Result<()> {
                checkpoint::save(
                    &checkpoint_dir(&opts.out_dir, step),
                    cfg.model.name(),
                    step,
                    cfg,
                    &model.borrow().params,
                    &[("d", &adam_d.borrow()), ("g", &adam_g.borrow())],
                )
            };
            run_loop!(save, |step: u64, rng: &mut RandomSource| -> Result<Vec<f64>> {
                let batch_idx = batch_of(rng, &pool);
                let batch: Vec<&VideoTensor> = batch_idx.iter().map(|&i| dataset.entry(i)).collect();
                let (d, gl) = model.borrow_mut().train_step(
                    &batch,
                    &mut adam_d.borrow_mut(),
                    &mut adam_g.borrow_mut(),
                    rng,
                )?;
                Ok(vec![step as f64, d, gl])
            });
        }
    }

    let final_step = cfg.iterations.max(start_step);
    Ok(TrainOutcome {
        run_dir: opts.out_dir.clone(),
        final_step,
        final_checkpoint: checkpoint_dir(&opts.out_dir, final_step),
        loss_rows: csv.rows,
    })
}

/// Compose equally sized C×H×W tiles into one big C-plane image buffer,
/// row-major grid order.
pub fn compose_grid(tiles: &[Vec<f32>], rows: usize, cols: usize, h: usize, w: usize) -> Vec<u8> {
    assert_eq!(tiles.len(), rows * cols, "tile count must fill the grid");
    let gh = rows * h;
    let gw = cols * w;
    let mut planes = vec![0u8; CHANNELS * gh * gw];
    for (i, tile) in tiles.iter().enumerate() {
        let bytes = pixels_to_bytes(tile);
        let r0 = (i / cols) * h;
        let c0 = (i % cols) * w;
        for c in 0..CHANNELS {
            for y in 0..h {
                for x in 0..w {
                    planes[c * gh * gw + (r0 + y) * gw + (c0 + x)] =
                        bytes[c * h * w + y * w + x];
                }
            }
        }
    }
    planes
}

pub fn write_grid_png(
    path: &Path,
    tiles: &[Vec<f32>],
    rows: usize,
    cols: usize,
    h: usize,
    w: usize,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let planes = compose_grid(tiles, rows, cols, h, w);
    write_frame_png(path, &planes, rows * h, cols * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::build_dataset;

    fn tmpdir(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("vidres_harness_{tag}_{}", std::process::id()));
        std::fs::remove_dir_all(&d).ok();
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    fn tiny_cfg(kind: ModelKind) -> ModelConfig {
        let mut cfg = ModelConfig::desk(kind);
        cfg.frame_size = 8;
        cfg.t_frames = 4;
        cfg.clip_len = 4;
        cfg.base_channels = 4;
        cfg.recurrent_hidden = 8;
        cfg.d_z = 8;
        cfg.d_eps = if kind == ModelKind::Rmocogan { 3 } else { 8 };
        cfg.d_c = 5;
        cfg.d_m = 3;
        cfg.mlp_hidden = 8;
        cfg.batch_size = 2;
        cfg.iterations = 4;
        cfg.seed = 9;
        cfg
    }

    #[test]
    fn train_writes_run_dir_and_resumes() {
        let data = tmpdir("traindata");
        build_dataset(6, 4, 8, 3, &data).unwrap();
        let ds = Dataset::load(&data).unwrap();

        let run = tmpdir("trainrun");
        let mut opts = TrainOptions::new(tiny_cfg(ModelKind::Rjvae), run.clone());
        opts.ckpt_every = 2;
        opts.quiet = true;
        let out = train(&ds, &opts).unwrap();
        assert_eq!(out.final_step, 4);
        assert!(out.final_checkpoint.join("meta.json").is_file());
        let csv = std::fs::read_to_string(run.join("loss.csv")).unwrap();
        let steps: Vec<u64> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(steps, vec![1, 2, 3, 4], "monotone, gap-free step column");

        // A second identical run produces byte-identical checkpoints.
        let run2 = tmpdir("trainrun2");
        let mut opts2 = opts.clone();
        opts2.out_dir = run2.clone();
        let out2 = train(&ds, &opts2).unwrap();
        let a = std::fs::read(out.final_checkpoint.join("dec.fc.w.bin")).unwrap();
        let b = std::fs::read(out2.final_checkpoint.join("dec.fc.w.bin")).unwrap();
        assert_eq!(a, b);

        // Resume is the identity when training already finished.
        let out3 = train(&ds, &opts).unwrap();
        assert_eq!(out3.final_step, 4);

        // Truncated run resumes to the same final bytes as the one-shot run.
        let run4 = tmpdir("trainrun4");
        let mut opts4 = opts.clone();
        opts4.out_dir = run4.clone();
        opts4.config.iterations = 2;
        train(&ds, &opts4).unwrap();
        opts4.config.iterations = 4;
        // config.json differs in iterations; rewrite snapshot for the resumed leg.
        std::fs::write(
            run4.join("config.json"),
            serde_json::to_string_pretty(&opts4.config).unwrap() + "\n",
        )
        .unwrap();
        let out4 = train(&ds, &opts4).unwrap();
        let c = std::fs::read(out4.final_checkpoint.join("dec.fc.w.bin")).unwrap();
        assert_eq!(a, c, "resumed run must replay the uninterrupted stream");

        for d in [data, run, run2, run4] {
            std::fs::remove_dir_all(&d).ok();
        }
    }

    #[test]
    fn train_rejects_mismatched_config_in_run_dir() {
        let data = tmpdir("cfgdata");
        build_dataset(4, 4, 8, 3, &data).unwrap();
        let ds = Dataset::load(&data).unwrap();
        let run = tmpdir("cfgrun");
        let mut opts = TrainOptions::new(tiny_cfg(ModelKind::Rjvae), run.clone());
        opts.quiet = true;
        train(&ds, &opts).unwrap();
        opts.config.seed = 1234;
        assert!(matches!(train(&ds, &opts), Err(Error::Config(_))));
        std::fs::remove_dir_all(&data).ok();
        std::fs::remove_dir_all(&run).ok();
    }

    #[test]
    fn all_gan_kinds_train_and_reload() {
        let data = tmpdir("gandata");
        build_dataset(6, 4, 8, 5, &data).unwrap();
        let ds = Dataset::load(&data).unwrap();
        for kind in [ModelKind::Rjgan, ModelKind::RjganChain, ModelKind::Rmocogan, ModelKind::BaselineImage] {
            let run = tmpdir(&format!("ganrun_{}", kind.name()));
            let mut opts = TrainOptions::new(tiny_cfg(kind), run.clone());
            opts.ckpt_every = 4;
            opts.quiet = true;
            let out = train(&ds, &opts).unwrap();
            let model = LoadedModel::load(&out.final_checkpoint).unwrap();
            let mut rng = RandomSource::new(1);
            let (video, _) = model.sample_video(&mut rng).unwrap();
            assert!(video.num_frames() >= 1);
            let img = model.sample_image(&mut rng).unwrap();
            assert_eq!(img.len(), CHANNELS * 64);
            std::fs::remove_dir_all(&run).ok();
        }
        std::fs::remove_dir_all(&data).ok();
    }

    #[test]
    fn grid_composition_places_tiles() {
        let h = 2;
        let w = 2;
        let tile_a = vec![1.0f32; CHANNELS * h * w];
        let tile_b = vec![-1.0f32; CHANNELS * h * w];
        let planes = compose_grid(&[tile_a, tile_b], 1, 2, h, w);
        // Row-major: left tile white (255), right tile black (0).
        assert_eq!(planes[0], 255);
        assert_eq!(planes[w], 0); // first row, second tile starts at x = w
    }
}
