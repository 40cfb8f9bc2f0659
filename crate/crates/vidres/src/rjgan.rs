//! Residual joint GAN.
//!
//! Generation draws a summary vector from the fixed isotropic prior, runs a
//! GRU over `[mu, eps(t)]` to produce residuals, and decodes `mu + delta(t)`
//! frame by frame. Two discriminators judge random frames (D_I) and
//! fixed-length clips (D_V); the objective adds an image-GAN term that feeds
//! summary frames G_I(mu) to D_I, with the printed duplicate of the
//! real-image term kept (a config switch collapses it). The generator uses
//! the non-saturating convention. The chain mode replaces the summary
//! decomposition with z(t) = z(t-1) + delta(t) from a prior-sampled z(0).

use crate::arch::{clip_input, frames_input, rows_to_clips, Act, ImageDecoder, ImageEncoderTrunk, VideoEncoderTrunk};
use crate::autodiff::{Adam, Graph, GruCell, Linear, ParamSet, Scalar, Tensor, Var};
use crate::config::{ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::math::DiagonalGaussian;
use crate::rjvae::LatentPath;
use crate::rng::RandomSource;
use crate::synth::{sample_clip_st, sample_frame_s1, VideoTensor, CHANNELS};

/// Clamp applied to discriminator probabilities before any logarithm.
pub const PROB_EPSILON: f64 = 1e-7;

/// Per-step i.i.d. noise driving the residual recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSequence {
    pub eps: Vec<Vec<f64>>,
}

impl NoiseSequence {
    pub fn draw(t: usize, d_eps: usize, sigma_eps: f64, rng: &mut RandomSource) -> Self {
        NoiseSequence {
            eps: (0..t)
                .map(|_| rng.normal_vec(d_eps).iter().map(|v| v * sigma_eps).collect())
                .collect(),
        }
    }

    pub fn zeros(t: usize, d_eps: usize) -> Self {
        NoiseSequence {
            eps: vec![vec![0.0; d_eps]; t],
        }
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }
}

/// A generated video together with its latent path and driving noise.
#[derive(Debug, Clone)]
pub struct GeneratedVideo {
    pub video: VideoTensor,
    pub path: LatentPath,
    pub noise: NoiseSequence,
}

/// Latent trajectory of the chain ablation: z(t) = z(t-1) + delta(t).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPath {
    pub z0: Vec<f64>,
    pub deltas: Vec<Vec<f64>>,
}

impl ChainPath {
    /// z(t) accumulated left to right: z0 + delta(1) + ... + delta(t).
    pub fn z_at(&self, t: usize) -> Vec<f64> {
        let mut z = self.z0.clone();
        for delta in self.deltas.iter().take(t + 1) {
            for (zi, di) in z.iter_mut().zip(delta) {
                *zi += di;
            }
        }
        z
    }
}

/// The six objective terms, reported in the order they are printed in the
/// minimax objective: real/fake image, real/fake video, the duplicated
/// real-image term, and the summary-frame term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eq1Terms {
    pub real_image: f64,
    pub fake_image: f64,
    pub real_video: f64,
    pub fake_video: f64,
    pub real_image_dup: f64,
    pub summary_fake: f64,
}

impl Eq1Terms {
    pub fn six_term_sum(&self) -> f64 {
        self.real_image
            + self.fake_image
            + self.real_video
            + self.fake_video
            + self.real_image_dup
            + self.summary_fake
    }

    /// Discriminator-side aggregate; `dedup` drops the duplicated real term.
    pub fn discriminator_total(&self, dedup: bool) -> f64 {
        let base = self.real_image + self.fake_image + self.real_video + self.fake_video
            + self.summary_fake;
        if dedup {
            base
        } else {
            base + self.real_image_dup
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
}

fn mean_neg_log(ps: &[f64]) -> f64 {
    ps.iter().map(|&p| -clamp_prob(p).ln()).sum::<f64>() / ps.len().max(1) as f64
}

fn mean_neg_log_one_minus(ps: &[f64]) -> f64 {
    ps.iter().map(|&p| -(1.0 - clamp_prob(p)).ln()).sum::<f64>() / ps.len().max(1) as f64
}

/// Evaluate the six objective terms from raw discriminator probabilities.
/// With every probability at 0.5 each term is ln 2 and the sum is 6·ln 2.
pub fn objective_terms_from_probs(
    real_image: &[f64],
    fake_image: &[f64],
    real_video: &[f64],
    fake_video: &[f64],
    summary_image: &[f64],
) -> Eq1Terms {
    let real_image_term = mean_neg_log(real_image);
    Eq1Terms {
        real_image: real_image_term,
        fake_image: mean_neg_log_one_minus(fake_image),
        real_video: mean_neg_log(real_video),
        fake_video: mean_neg_log_one_minus(fake_video),
        real_image_dup: real_image_term,
        summary_fake: mean_neg_log_one_minus(summary_image),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    VideoOnly,
    /// Image discriminator additionally sees the dataset's standalone images.
    Mixed,
    /// Chain-ablation generator wiring.
    Chain,
}

#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub terms: Eq1Terms,
    pub d_loss: f64,
    pub g_loss: f64,
}

pub(crate) struct Layers {
    g_i: ImageDecoder,
    r_m: GruCell,
    r_m_head: Linear,
    d_i_trunk: ImageEncoderTrunk,
    d_i_head: Linear,
    d_v_trunk: VideoEncoderTrunk,
    d_v_head: Linear,
}

pub struct Rjgan<S: Scalar> {
    cfg: ModelConfig,
    layers: Layers,
    pub params: ParamSet<S>,
}

/// Generator-side parameter prefixes (G_I and R_M update together).
pub const GENERATOR_PREFIXES: [&str; 2] = ["g_i.", "r_m."];
/// Discriminator-side parameter prefixes (D_I and D_V update together).
pub const DISCRIMINATOR_PREFIXES: [&str; 2] = ["d_i.", "d_v."];

impl<S: Scalar> Rjgan<S> {
    pub fn new(cfg: ModelConfig, init_seed: u64) -> Result<Self> {
        if !matches!(cfg.model, ModelKind::Rjgan | ModelKind::RjganChain) {
            return Err(Error::Config(format!(
                "Rjgan requires a rjgan or rjgan-chain config, got {}",
                cfg.model.name()
            )));
        }
        cfg.validate()?;
        let mut rng = RandomSource::new(init_seed).split(0xB2);
        let mut ps = ParamSet::new();
        let layers = register_gan_layers(&cfg, &mut ps, &mut rng);
        Ok(Rjgan {
            cfg,
            layers,
            params: ps,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn is_chain(&self) -> bool {
        self.cfg.model == ModelKind::RjganChain
    }

    /// Fixed isotropic prior over the summary vector (or z(0) in chain mode).
    pub fn prior_mu(&self) -> DiagonalGaussian {
        DiagonalGaussian::isotropic(self.cfg.d_z, self.cfg.sigma_mu)
            .expect("sigma validated at construction")
    }

    // ---- in-graph generation ----

    fn residual_rows(
        &self,
        g: &mut Graph<S>,
        mu: Var,
        eps: &[Var],
        chain: bool,
    ) -> (Vec<Var>, Vec<Var>) {
        let b = g.shape(mu)[0];
        let mut state = self.layers.r_m.zero_state(g, b);
        let mut z_prev = mu;
        let mut deltas = Vec::with_capacity(eps.len());
        let mut zs = Vec::with_capacity(eps.len());
        for &e in eps {
            let cond = if chain { z_prev } else { mu };
            let x = g.concat_cols(cond, e);
            state = self.layers.r_m.step(g, &self.params, x, state);
            let delta = self.layers.r_m_head.apply(g, &self.params, state);
            let z = g.add(if chain { z_prev } else { mu }, delta);
            deltas.push(delta);
            zs.push(z);
            z_prev = z;
        }
        (deltas, zs)
    }

    fn gen_frames_graph(
        &self,
        g: &mut Graph<S>,
        mu_vals: &[Vec<f64>],
        noise: &[NoiseSequence],
        chain: bool,
    ) -> Result<(Var, Vec<Var>, Vec<Var>)> {
        let b = mu_vals.len();
        if b == 0 || noise.len() != b {
            return Err(Error::Contract("generation batch mismatch".into()));
        }
        let t = noise[0].len();
        if t == 0 || noise.iter().any(|n| n.len() != t) {
            return Err(Error::Contract("noise sequences must be nonempty and equal length".into()));
        }
        let dz = self.cfg.d_z;
        let de = self.cfg.d_eps;
        if mu_vals.iter().any(|m| m.len() != dz) {
            return Err(Error::Contract("summary vector dimension mismatch".into()));
        }
        if noise.iter().any(|n| n.eps.iter().any(|e| e.len() != de)) {
            return Err(Error::Contract("noise dimension mismatch".into()));
        }
        let mu_flat: Vec<f64> = mu_vals.iter().flat_map(|m| m.iter().copied()).collect();
        let mu = g.input(Tensor::from_f64(vec![b, dz], &mu_flat));
        let eps: Vec<Var> = (0..t)
            .map(|ti| {
                let flat: Vec<f64> = noise
                    .iter()
                    .flat_map(|n| n.eps[ti].iter().copied())
                    .collect();
                g.input(Tensor::from_f64(vec![b, de], &flat))
            })
            .collect();
        let (deltas, zs) = self.residual_rows(g, mu, &eps, chain);
        let z_all = g.concat_rows(&zs); // t-major [T*B, dz]
        let frames = self.layers.g_i.apply(g, &self.params, z_all);
        Ok((frames, deltas, zs))
    }

    fn d_image_probs(&self, g: &mut Graph<S>, frames: Var) -> Var {
        let h = self.layers.d_i_trunk.apply(g, &self.params, frames);
        let logits = self.layers.d_i_head.apply(g, &self.params, h);
        let p = g.sigmoid(logits);
        g.clamp(p, PROB_EPSILON, 1.0 - PROB_EPSILON)
    }

    fn d_video_probs(&self, g: &mut Graph<S>, clips: Var) -> Var {
        let h = self.layers.d_v_trunk.apply(g, &self.params, clips);
        let logits = self.layers.d_v_head.apply(g, &self.params, h);
        let p = g.sigmoid(logits);
        g.clamp(p, PROB_EPSILON, 1.0 - PROB_EPSILON)
    }

    fn mean_neg_log_graph(g: &mut Graph<S>, probs: Var) -> Var {
        let n = g.value(probs).len();
        let l = g.ln(probs);
        let s = g.sum_all(l);
        g.scale(s, -1.0 / n as f64)
    }

    fn mean_neg_log_one_minus_graph(g: &mut Graph<S>, probs: Var) -> Var {
        let n = g.value(probs).len();
        let neg = g.neg(probs);
        let one_minus = g.add_scalar(neg, 1.0);
        let l = g.ln(one_minus);
        let s = g.sum_all(l);
        g.scale(s, -1.0 / n as f64)
    }

    // ---- public sampling ----

    /// Residual sequence delta(1:T) = GRU([mu, eps(t)]); causal in the noise.
    pub fn gen_residual_seq(&self, mu: &[f64], noise: &NoiseSequence) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let (_, deltas, _) = self.gen_frames_graph(&mut g, &[mu.to_vec()], &[noise.clone()], false)?;
        Ok(deltas
            .iter()
            .map(|&d| g.value(d).iter().map(|v| v.to_f64()).collect())
            .collect())
    }

    /// Full generation: frames decoded from mu + delta(t).
    pub fn gen_video(&self, mu: &[f64], noise: &NoiseSequence) -> Result<GeneratedVideo> {
        let mut g = Graph::new();
        let (frames, deltas, _) =
            self.gen_frames_graph(&mut g, &[mu.to_vec()], &[noise.clone()], false)?;
        let t = noise.len();
        let hw = self.cfg.frame_size;
        let vals = g.value(frames);
        let pixels: Vec<f32> = vals.iter().map(|v| v.to_f64() as f32).collect();
        let video = VideoTensor::new(pixels, t, hw, hw, None)?;
        let path = LatentPath {
            mu: mu.to_vec(),
            deltas: deltas
                .iter()
                .map(|&d| g.value(d).iter().map(|v| v.to_f64()).collect())
                .collect(),
        };
        Ok(GeneratedVideo {
            video,
            path,
            noise: noise.clone(),
        })
    }

    /// The image G_I(mu), decoded straight from the summary vector.
    pub fn summary_frame(&self, mu: &[f64]) -> Result<Vec<f32>> {
        if mu.len() != self.cfg.d_z {
            return Err(Error::Contract(format!(
                "summary vector has dimension {}, model expects {}",
                mu.len(),
                self.cfg.d_z
            )));
        }
        let mut g = Graph::new();
        let z = g.input(Tensor::from_f64(vec![1, self.cfg.d_z], mu));
        let x = self.layers.g_i.apply(&mut g, &self.params, z);
        Ok(g.value(x).iter().map(|v| v.to_f64() as f32).collect())
    }

    /// Chain ablation: z(t) = z(t-1) + delta(t) with z(0) from the prior.
    pub fn gen_video_chain(
        &self,
        z0: &[f64],
        noise: &NoiseSequence,
    ) -> Result<(VideoTensor, ChainPath)> {
        let mut g = Graph::new();
        let (frames, deltas, _) =
            self.gen_frames_graph(&mut g, &[z0.to_vec()], &[noise.clone()], true)?;
        let hw = self.cfg.frame_size;
        let pixels: Vec<f32> = g.value(frames).iter().map(|v| v.to_f64() as f32).collect();
        let video = VideoTensor::new(pixels, noise.len(), hw, hw, None)?;
        let path = ChainPath {
            z0: z0.to_vec(),
            deltas: deltas
                .iter()
                .map(|&d| g.value(d).iter().map(|v| v.to_f64()).collect())
                .collect(),
        };
        Ok((video, path))
    }

    /// Decode an explicit chain path (used to check the cumulative-sum
    /// identity and the all-zero-delta degenerate case).
    pub fn decode_chain_path(&self, path: &ChainPath) -> Result<VideoTensor> {
        let t = path.deltas.len();
        let hw = self.cfg.frame_size;
        let mut frames = Vec::with_capacity(t * CHANNELS * hw * hw);
        for ti in 0..t {
            let z = path.z_at(ti);
            let mut g = Graph::new();
            let zn = g.input(Tensor::from_f64(vec![1, self.cfg.d_z], &z));
            let x = self.layers.g_i.apply(&mut g, &self.params, zn);
            frames.extend(g.value(x).iter().map(|v| v.to_f64() as f32));
        }
        VideoTensor::new(frames, t, hw, hw, None)
    }

    // ---- training ----

    /// One discriminator update followed by one generator update.
    #[allow(clippy::too_many_arguments)]
    pub fn train_step(
        &mut self,
        videos: &[&VideoTensor],
        images: &[&VideoTensor],
        adam_d: &mut Adam<S>,
        adam_g: &mut Adam<S>,
        step_index: u64,
        mode: TrainMode,
        rng: &mut RandomSource,
    ) -> Result<StepReport> {
        if videos.is_empty() {
            return Err(Error::Contract("empty video batch".into()));
        }
        let b = videos.len();
        let t = self.cfg.t_frames;
        let hw = self.cfg.frame_size;
        let clip_len = self.cfg.clip_len;
        let chain = mode == TrainMode::Chain || self.is_chain();
        for v in videos {
            if v.num_frames() < t.max(clip_len) || v.height() != hw {
                return Err(Error::Contract(
                    "video too short or wrong frame size for this model".into(),
                ));
            }
        }
        let summary_on = step_index % self.cfg.summary_term_period == 0;

        // Pre-draw all randomness so the D and G graphs see the same batch.
        let prior = self.prior_mu();
        let mu_batch: Vec<Vec<f64>> = (0..b).map(|_| prior.sample(rng)).collect();
        let noise_batch: Vec<NoiseSequence> = (0..b)
            .map(|_| NoiseSequence::draw(t, self.cfg.d_eps, self.cfg.sigma_eps, rng))
            .collect();
        let summary_mu: Vec<Vec<f64>> = (0..b).map(|_| prior.sample(rng)).collect();
        let real_frames: Vec<&[f32]> = videos
            .iter()
            .map(|v| sample_frame_s1(v, rng).1)
            .collect();
        let mixed_images: Vec<&VideoTensor> = if mode == TrainMode::Mixed && !images.is_empty() {
            (0..b)
                .map(|_| images[rng.below(images.len() as u64) as usize])
                .collect()
        } else {
            Vec::new()
        };
        let real_clips: Vec<VideoTensor> = videos
            .iter()
            .map(|v| sample_clip_st(v, clip_len, rng))
            .collect::<Result<_>>()?;
        let fake_s1: Vec<usize> = (0..b).map(|_| rng.below(t as u64) as usize).collect();
        let fake_clip_start: Vec<usize> = (0..b)
            .map(|_| rng.below((t - clip_len + 1) as u64) as usize)
            .collect();

        // ---- discriminator update ----
        let (terms, d_loss) = {
            let mut g = Graph::new();
            let (fake_frames, _, _) = self.gen_frames_graph(&mut g, &mu_batch, &noise_batch, chain)?;
            let fake_frames = g.detach(fake_frames);
            let fake_img_rows = gather_video_rows(&mut g, fake_frames, b, &fake_s1);
            let fake_clips = gather_clips(&mut g, fake_frames, b, t, clip_len, &fake_clip_start);

            let mut real_pixels: Vec<f32> = Vec::new();
            for f in &real_frames {
                real_pixels.extend_from_slice(f);
            }
            for img in &mixed_images {
                real_pixels.extend_from_slice(img.frame(0));
            }
            let n_real = b + mixed_images.len();
            let real_imgs = frames_input(&mut g, &real_pixels, n_real, hw, hw);

            let clip_vars: Vec<Var> = real_clips
                .iter()
                .map(|c| clip_input(&mut g, c.data(), clip_len, hw, hw))
                .collect();
            let real_clip_batch = g.concat_rows(&clip_vars);

            let p_real_img = self.d_image_probs(&mut g, real_imgs);
            let p_fake_img = self.d_image_probs(&mut g, fake_img_rows);
            let p_real_vid = self.d_video_probs(&mut g, real_clip_batch);
            let p_fake_vid = self.d_video_probs(&mut g, fake_clips);

            let t_real_img = Self::mean_neg_log_graph(&mut g, p_real_img);
            let t_fake_img = Self::mean_neg_log_one_minus_graph(&mut g, p_fake_img);
            let t_real_vid = Self::mean_neg_log_graph(&mut g, p_real_vid);
            let t_fake_vid = Self::mean_neg_log_one_minus_graph(&mut g, p_fake_vid);

            let (t_summary, p_summary) = if summary_on {
                let mu_flat: Vec<f64> = summary_mu.iter().flat_map(|m| m.iter().copied()).collect();
                let zs = g.input(Tensor::from_f64(vec![b, self.cfg.d_z], &mu_flat));
                let frames = self.layers.g_i.apply(&mut g, &self.params, zs);
                let frames = g.detach(frames);
                let p = self.d_image_probs(&mut g, frames);
                (Some(Self::mean_neg_log_one_minus_graph(&mut g, p)), Some(p))
            } else {
                (None, None)
            };
            let _ = p_summary;

            let mut d_loss = g.add(t_real_img, t_fake_img);
            d_loss = g.add(d_loss, t_real_vid);
            d_loss = g.add(d_loss, t_fake_vid);
            if let Some(ts) = t_summary {
                d_loss = g.add(d_loss, ts);
            }
            if !self.cfg.eq1_deduplicate {
                // The printed objective counts the real-image term twice.
                d_loss = g.add(d_loss, t_real_img);
            }

            let terms = Eq1Terms {
                real_image: g.scalar_value(t_real_img).to_f64(),
                fake_image: g.scalar_value(t_fake_img).to_f64(),
                real_video: g.scalar_value(t_real_vid).to_f64(),
                fake_video: g.scalar_value(t_fake_vid).to_f64(),
                real_image_dup: g.scalar_value(t_real_img).to_f64(),
                summary_fake: t_summary.map_or(0.0, |ts| g.scalar_value(ts).to_f64()),
            };
            let d_val = g.scalar_value(d_loss).to_f64();
            if !d_val.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite discriminator loss: {terms:?}"
                )));
            }
            let grads = g.backward(d_loss);
            if !grads.all_finite() {
                return Err(Error::Training("non-finite discriminator gradient".into()));
            }
            adam_d.step_filtered(&mut self.params, &grads, |n| {
                DISCRIMINATOR_PREFIXES.iter().any(|p| n.starts_with(p))
            });
            (terms, d_val)
        };

        // ---- generator update (non-saturating) ----
        let g_loss = {
            let mut g = Graph::new();
            let (fake_frames, _, _) = self.gen_frames_graph(&mut g, &mu_batch, &noise_batch, chain)?;
            let fake_img_rows = gather_video_rows(&mut g, fake_frames, b, &fake_s1);
            let fake_clips = gather_clips(&mut g, fake_frames, b, t, clip_len, &fake_clip_start);
            let p_img = self.d_image_probs(&mut g, fake_img_rows);
            let p_vid = self.d_video_probs(&mut g, fake_clips);
            let l_img = Self::mean_neg_log_graph(&mut g, p_img);
            let l_vid = Self::mean_neg_log_graph(&mut g, p_vid);
            let mut g_loss = g.add(l_img, l_vid);
            if summary_on {
                let mu_flat: Vec<f64> = summary_mu.iter().flat_map(|m| m.iter().copied()).collect();
                let zs = g.input(Tensor::from_f64(vec![b, self.cfg.d_z], &mu_flat));
                let frames = self.layers.g_i.apply(&mut g, &self.params, zs);
                let p = self.d_image_probs(&mut g, frames);
                let l = Self::mean_neg_log_graph(&mut g, p);
                g_loss = g.add(g_loss, l);
            }
            let g_val = g.scalar_value(g_loss).to_f64();
            if !g_val.is_finite() {
                return Err(Error::Training("non-finite generator loss".into()));
            }
            let grads = g.backward(g_loss);
            if !grads.all_finite() {
                return Err(Error::Training("non-finite generator gradient".into()));
            }
            adam_g.step_filtered(&mut self.params, &grads, |n| {
                GENERATOR_PREFIXES.iter().any(|p| n.starts_with(p))
            });
            g_val
        };

        if !self.params.all_finite() {
            return Err(Error::Training("parameters became non-finite".into()));
        }
        Ok(StepReport {
            terms,
            d_loss,
            g_loss,
        })
    }

    /// One image-GAN pre-training step on standalone images: only G_I (via
    /// the summary path) and D_I participate; R_M and D_V stay bit-unchanged.
    pub fn pretrain_image_step(
        &mut self,
        images: &[&VideoTensor],
        adam_d: &mut Adam<S>,
        adam_g: &mut Adam<S>,
        rng: &mut RandomSource,
    ) -> Result<(f64, f64)> {
        if images.is_empty() {
            return Err(Error::Contract("pre-training needs image entries".into()));
        }
        let b = self.cfg.batch_size.min(images.len()).max(1);
        let picked: Vec<&VideoTensor> = (0..b)
            .map(|_| images[rng.below(images.len() as u64) as usize])
            .collect();
        let mus: Vec<Vec<f64>> = (0..b).map(|_| self.prior_mu().sample(rng)).collect();
        image_gan_step(
            &self.layers.g_i,
            &self.layers.d_i_trunk,
            &self.layers.d_i_head,
            &mut self.params,
            adam_d,
            adam_g,
            &picked,
            &mus,
            self.cfg.frame_size,
            self.cfg.d_z,
        )
    }
}

pub(crate) fn register_gan_layers<S: Scalar>(
    cfg: &ModelConfig,
    ps: &mut ParamSet<S>,
    rng: &mut RandomSource,
) -> Layers {
    let dz = cfg.decoder_input_dim();
    let g_i = ImageDecoder::new(ps, rng, "g_i", dz, cfg.frame_size, cfg.base_channels);
    let r_m = GruCell::new(
        ps,
        rng,
        "r_m.cell",
        // RJGAN conditions on [mu, eps]; the MoCoGAN variant on eps alone.
        if cfg.model == ModelKind::Rmocogan {
            cfg.d_eps
        } else {
            cfg.d_z + cfg.d_eps
        },
        cfg.recurrent_hidden,
    );
    let r_m_head = Linear::new(
        ps,
        rng,
        "r_m.head",
        cfg.recurrent_hidden,
        if cfg.model == ModelKind::Rmocogan {
            cfg.d_m
        } else {
            cfg.d_z
        },
    );
    let d_i_trunk = ImageEncoderTrunk::new(
        ps,
        rng,
        "d_i.cnn",
        cfg.frame_size,
        cfg.base_channels,
        Act::LeakyRelu(0.2),
    );
    let d_i_head = Linear::new(ps, rng, "d_i.head", d_i_trunk.out_len, 1);
    let d_v_trunk = VideoEncoderTrunk::new(
        ps,
        rng,
        "d_v.cnn",
        cfg.frame_size,
        cfg.clip_len,
        cfg.base_channels,
        Act::LeakyRelu(0.2),
    );
    let d_v_head = Linear::new(ps, rng, "d_v.head", d_v_trunk.out_len, 1);
    Layers {
        g_i,
        r_m,
        r_m_head,
        d_i_trunk,
        d_i_head,
        d_v_trunk,
        d_v_head,
    }
}

/// Gather one frame row per video from a t-major [T*B, ...] frame tensor.
pub(crate) fn gather_video_rows<S: Scalar>(g: &mut Graph<S>, frames: Var, b: usize, t_for_b: &[usize]) -> Var {
    let parts: Vec<Var> = t_for_b
        .iter()
        .enumerate()
        .map(|(bi, &ti)| {
            let row = ti * b + bi;
            g.slice_rows(frames, row, row + 1)
        })
        .collect();
    g.concat_rows(&parts)
}

/// Gather per-video clips (contiguous frame ranges) from t-major rows and
/// reorder into [B, C, clip, H, W].
pub(crate) fn gather_clips<S: Scalar>(
    g: &mut Graph<S>,
    frames: Var,
    b: usize,
    _t: usize,
    clip_len: usize,
    starts: &[usize],
) -> Var {
    let mut rows = Vec::with_capacity(clip_len * b);
    for ti in 0..clip_len {
        for (bi, &s) in starts.iter().enumerate() {
            let row = (s + ti) * b + bi;
            rows.push(g.slice_rows(frames, row, row + 1));
        }
    }
    let stacked = g.concat_rows(&rows);
    rows_to_clips(g, stacked, b, clip_len)
}

/// Shared image-GAN step (pre-training and the baseline image model):
/// one D_I update on real vs G_I(mu), then one non-saturating G_I update.
#[allow(clippy::too_many_arguments)]
pub(crate) fn image_gan_step<S: Scalar>(
    g_i: &ImageDecoder,
    d_trunk: &ImageEncoderTrunk,
    d_head: &Linear,
    params: &mut ParamSet<S>,
    adam_d: &mut Adam<S>,
    adam_g: &mut Adam<S>,
    real: &[&VideoTensor],
    mus: &[Vec<f64>],
    frame_size: usize,
    d_z: usize,
) -> Result<(f64, f64)> {
    let b = real.len();
    let probs =
        |g: &mut Graph<S>, params: &ParamSet<S>, x: Var| -> Var {
            let h = d_trunk.apply(g, params, x);
            let logits = d_head.apply(g, params, h);
            let p = g.sigmoid(logits);
            g.clamp(p, PROB_EPSILON, 1.0 - PROB_EPSILON)
        };
    let mu_flat: Vec<f64> = mus.iter().flat_map(|m| m.iter().copied()).collect();

    // D update.
    let d_loss = {
        let mut g = Graph::new();
        let mut real_pixels: Vec<f32> = Vec::new();
        for v in real {
            real_pixels.extend_from_slice(v.frame(0));
        }
        let real_in = frames_input(&mut g, &real_pixels, b, frame_size, frame_size);
        let z = g.input(Tensor::from_f64(vec![b, d_z], &mu_flat));
        let fake = g_i.apply(&mut g, params, z);
        let fake = g.detach(fake);
        let p_real = probs(&mut g, params, real_in);
        let p_fake = probs(&mut g, params, fake);
        let lr = g.ln(p_real);
        let sr = g.sum_all(lr);
        let t_real = g.scale(sr, -1.0 / b as f64);
        let negf = g.neg(p_fake);
        let omf = g.add_scalar(negf, 1.0);
        let lf = g.ln(omf);
        let sf = g.sum_all(lf);
        let t_fake = g.scale(sf, -1.0 / b as f64);
        let loss = g.add(t_real, t_fake);
        let val = g.scalar_value(loss).to_f64();
        if !val.is_finite() {
            return Err(Error::Training("non-finite image-GAN D loss".into()));
        }
        let grads = g.backward(loss);
        adam_d.step_filtered(params, &grads, |n| n.starts_with("d_i."));
        val
    };

    // G update (non-saturating).
    let g_loss = {
        let mut g = Graph::new();
        let z = g.input(Tensor::from_f64(vec![b, d_z], &mu_flat));
        let fake = g_i.apply(&mut g, params, z);
        let p = probs(&mut g, params, fake);
        let lp = g.ln(p);
        let sp = g.sum_all(lp);
        let loss = g.scale(sp, -1.0 / b as f64);
        let val = g.scalar_value(loss).to_f64();
        if !val.is_finite() {
            return Err(Error::Training("non-finite image-GAN G loss".into()));
        }
        let grads = g.backward(loss);
        adam_g.step_filtered(params, &grads, |n| n.starts_with("g_i."));
        val
    };
    Ok((d_loss, g_loss))
}

/// Image-only baseline with G_I/D_I architectures identical to the joint
/// model's; trains on randomly sampled individual frames.
pub struct BaselineImageGan<S: Scalar> {
    cfg: ModelConfig,
    g_i: ImageDecoder,
    d_i_trunk: ImageEncoderTrunk,
    d_i_head: Linear,
    pub params: ParamSet<S>,
}

impl<S: Scalar> BaselineImageGan<S> {
    pub fn new(cfg: ModelConfig, init_seed: u64) -> Result<Self> {
        if cfg.model != ModelKind::BaselineImage {
            return Err(Error::Config(format!(
                "BaselineImageGan requires a baseline-image config, got {}",
                cfg.model.name()
            )));
        }
        cfg.validate()?;
        let mut rng = RandomSource::new(init_seed).split(0xB2);
        let mut ps = ParamSet::new();
        let g_i = ImageDecoder::new(&mut ps, &mut rng, "g_i", cfg.d_z, cfg.frame_size, cfg.base_channels);
        let d_i_trunk = ImageEncoderTrunk::new(
            &mut ps,
            &mut rng,
            "d_i.cnn",
            cfg.frame_size,
            cfg.base_channels,
            Act::LeakyRelu(0.2),
        );
        let d_i_head = Linear::new(&mut ps, &mut rng, "d_i.head", d_i_trunk.out_len, 1);
        Ok(BaselineImageGan {
            cfg,
            g_i,
            d_i_trunk,
            d_i_head,
            params: ps,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn prior(&self) -> DiagonalGaussian {
        DiagonalGaussian::isotropic(self.cfg.d_z, self.cfg.sigma_mu)
            .expect("sigma validated at construction")
    }

    /// One adversarial step on S_1-sampled frames of the given videos.
    pub fn train_step(
        &mut self,
        videos: &[&VideoTensor],
        adam_d: &mut Adam<S>,
        adam_g: &mut Adam<S>,
        rng: &mut RandomSource,
    ) -> Result<(f64, f64)> {
        if videos.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let frames: Vec<VideoTensor> = videos
            .iter()
            .map(|v| {
                let (t, _) = sample_frame_s1(v, rng);
                v.frame_as_image(t)
            })
            .collect();
        let frame_refs: Vec<&VideoTensor> = frames.iter().collect();
        let mus: Vec<Vec<f64>> = (0..frames.len()).map(|_| self.prior().sample(rng)).collect();
        image_gan_step(
            &self.g_i,
            &self.d_i_trunk,
            &self.d_i_head,
            &mut self.params,
            adam_d,
            adam_g,
            &frame_refs,
            &mus,
            self.cfg.frame_size,
            self.cfg.d_z,
        )
    }

    pub fn sample_image(&self, mu: &[f64]) -> Result<Vec<f32>> {
        let mut g = Graph::new();
        let z = g.input(Tensor::from_f64(vec![1, self.cfg.d_z], mu));
        let x = self.g_i.apply(&mut g, &self.params, z);
        Ok(g.value(x).iter().map(|v| v.to_f64() as f32).collect())
    }
}
