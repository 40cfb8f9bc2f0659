//! Residual MoCoGAN: motion/content decomposition with residual content codes.
//!
//! A content summary z_C is drawn once per video; motion codes z_M(t) come
//! from a GRU driven purely by noise, independent of z_C; a stateless
//! two-hidden-layer MLP turns [z_C, z_M(t)] into a per-step content residual.
//! Frames decode from [z_C + delta_C(t), z_M(t)], so temporal dependence
//! flows only through the motion path. Forcing delta_C = 0 recovers plain
//! MoCoGAN generation exactly. Training uses the four-term MoCoGAN objective
//! (no summary-frame term).

use crate::arch::{clip_input, frames_input, Act, ImageDecoder, ImageEncoderTrunk, VideoEncoderTrunk};
use crate::autodiff::{Adam, Graph, GruCell, Linear, Mlp, ParamSet, Scalar, Tensor, Var};
use crate::config::{ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::math::DiagonalGaussian;
use crate::rjgan::{NoiseSequence, PROB_EPSILON};
use crate::rng::RandomSource;
use crate::synth::{sample_clip_st, sample_frame_s1, VideoTensor};

/// Per-video content summary code.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentCode {
    pub z_c: Vec<f64>,
}

/// Motion codes z_M(1:T), generated from noise alone (causal, content-free).
#[derive(Debug, Clone, PartialEq)]
pub struct MotionPath {
    pub z_m: Vec<Vec<f64>>,
}

impl MotionPath {
    pub fn len(&self) -> usize {
        self.z_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_m.is_empty()
    }
}

/// Per-step content residuals delta_C(t) = MLP(z_C, z_M(t)).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualContentPath {
    pub delta_c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct MocoStepReport {
    pub real_image: f64,
    pub fake_image: f64,
    pub real_video: f64,
    pub fake_video: f64,
    pub d_loss: f64,
    pub g_loss: f64,
}

struct Layers {
    g_i: ImageDecoder,
    r_m: GruCell,
    r_m_head: Linear,
    nn_delta: Mlp,
    d_i_trunk: ImageEncoderTrunk,
    d_i_head: Linear,
    d_v_trunk: VideoEncoderTrunk,
    d_v_head: Linear,
}

pub struct Rmocogan<S: Scalar> {
    cfg: ModelConfig,
    layers: Layers,
    pub params: ParamSet<S>,
}

impl<S: Scalar> Rmocogan<S> {
    pub fn new(cfg: ModelConfig, init_seed: u64) -> Result<Self> {
        if cfg.model != ModelKind::Rmocogan {
            return Err(Error::Config(format!(
                "Rmocogan requires a rmocogan config, got {}",
                cfg.model.name()
            )));
        }
        cfg.validate()?;
        let mut rng = RandomSource::new(init_seed).split(0xC3);
        let mut ps = ParamSet::new();
        let g_i = ImageDecoder::new(
            &mut ps,
            &mut rng,
            "g_i",
            cfg.d_c + cfg.d_m,
            cfg.frame_size,
            cfg.base_channels,
        );
        let r_m = GruCell::new(&mut ps, &mut rng, "r_m.cell", cfg.d_eps, cfg.recurrent_hidden);
        let r_m_head = Linear::new(&mut ps, &mut rng, "r_m.head", cfg.recurrent_hidden, cfg.d_m);
        // Two hidden layers; the first maps [z_C, z_M] to mlp_hidden, the
        // second keeps the dimension, the output layer is a plain affine map.
        let nn_delta = Mlp::new(
            &mut ps,
            &mut rng,
            "nn_delta",
            &[cfg.d_c + cfg.d_m, cfg.mlp_hidden, cfg.mlp_hidden, cfg.d_c],
        );
        let d_i_trunk = ImageEncoderTrunk::new(
            &mut ps,
            &mut rng,
            "d_i.cnn",
            cfg.frame_size,
            cfg.base_channels,
            Act::LeakyRelu(0.2),
        );
        let d_i_head = Linear::new(&mut ps, &mut rng, "d_i.head", d_i_trunk.out_len, 1);
        let d_v_trunk = VideoEncoderTrunk::new(
            &mut ps,
            &mut rng,
            "d_v.cnn",
            cfg.frame_size,
            cfg.clip_len,
            cfg.base_channels,
            Act::LeakyRelu(0.2),
        );
        let d_v_head = Linear::new(&mut ps, &mut rng, "d_v.head", d_v_trunk.out_len, 1);
        Ok(Rmocogan {
            cfg,
            layers: Layers {
                g_i,
                r_m,
                r_m_head,
                nn_delta,
                d_i_trunk,
                d_i_head,
                d_v_trunk,
                d_v_head,
            },
            params: ps,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn content_prior(&self) -> DiagonalGaussian {
        DiagonalGaussian::isotropic(self.cfg.d_c, self.cfg.sigma_mu)
            .expect("sigma validated at construction")
    }

    /// Sample a content code from the fixed prior.
    pub fn sample_content(&self, rng: &mut RandomSource) -> ContentCode {
        ContentCode {
            z_c: self.content_prior().sample(rng),
        }
    }

    /// Generate motion codes from noise; z_C plays no part here, so the
    /// motion path is bit-identical whatever content it is later paired with.
    pub fn gen_motion_path(&self, noise: &NoiseSequence) -> Result<MotionPath> {
        if noise.is_empty() {
            return Err(Error::Contract("motion path needs at least one step".into()));
        }
        if noise.eps.iter().any(|e| e.len() != self.cfg.d_eps) {
            return Err(Error::Contract("noise dimension mismatch".into()));
        }
        let mut g: Graph<S> = Graph::new();
        let mut state = self.layers.r_m.zero_state(&mut g, 1);
        let mut out = Vec::with_capacity(noise.len());
        for eps in &noise.eps {
            let x = g.input(Tensor::from_f64(vec![1, self.cfg.d_eps], eps));
            state = self.layers.r_m.step(&mut g, &self.params, x, state);
            let zm = self.layers.r_m_head.apply(&mut g, &self.params, state);
            out.push(g.value(zm).iter().map(|v| v.to_f64()).collect());
        }
        Ok(MotionPath { z_m: out })
    }

    /// Residual content vector for one step: a stateless function of
    /// (z_C, z_M(t)) only.
    pub fn residual_content(&self, z_c: &ContentCode, z_m_t: &[f64]) -> Result<Vec<f64>> {
        if z_c.z_c.len() != self.cfg.d_c || z_m_t.len() != self.cfg.d_m {
            return Err(Error::Contract("content/motion dimension mismatch".into()));
        }
        let mut g: Graph<S> = Graph::new();
        let zc = g.input(Tensor::from_f64(vec![1, self.cfg.d_c], &z_c.z_c));
        let zm = g.input(Tensor::from_f64(vec![1, self.cfg.d_m], z_m_t));
        let x = g.concat_cols(zc, zm);
        let d = self.layers.nn_delta.apply(&mut g, &self.params, x);
        Ok(g.value(d).iter().map(|v| v.to_f64()).collect())
    }

    pub fn residual_path(&self, z_c: &ContentCode, motion: &MotionPath) -> Result<ResidualContentPath> {
        Ok(ResidualContentPath {
            delta_c: motion
                .z_m
                .iter()
                .map(|zm| self.residual_content(z_c, zm))
                .collect::<Result<_>>()?,
        })
    }

    fn decode_step(&self, z_c: &[f64], delta_c: &[f64], z_m: &[f64]) -> Vec<f32> {
        let mut g: Graph<S> = Graph::new();
        let content: Vec<f64> = z_c.iter().zip(delta_c).map(|(&c, &d)| c + d).collect();
        let mut full = content;
        full.extend_from_slice(z_m);
        let z = g.input(Tensor::from_f64(vec![1, self.cfg.d_c + self.cfg.d_m], &full));
        let x = self.layers.g_i.apply(&mut g, &self.params, z);
        g.value(x).iter().map(|v| v.to_f64() as f32).collect()
    }

    /// Frames decoded from [z_C + delta_C(t), z_M(t)]; pass `force_zero_delta`
    /// to recover the plain MoCoGAN path exactly.
    pub fn gen_video_with(
        &self,
        z_c: &ContentCode,
        motion: &MotionPath,
        force_zero_delta: bool,
    ) -> Result<VideoTensor> {
        if motion.is_empty() {
            return Err(Error::Contract("need at least one motion step".into()));
        }
        let hw = self.cfg.frame_size;
        let mut frames = Vec::new();
        let zero = vec![0.0; self.cfg.d_c];
        for zm in &motion.z_m {
            let delta = if force_zero_delta {
                zero.clone()
            } else {
                self.residual_content(z_c, zm)?
            };
            frames.extend(self.decode_step(&z_c.z_c, &delta, zm));
        }
        VideoTensor::new(frames, motion.len(), hw, hw, None)
    }

    pub fn gen_video(&self, z_c: &ContentCode, motion: &MotionPath) -> Result<VideoTensor> {
        self.gen_video_with(z_c, motion, false)
    }

    // ---- training ----

    fn gen_frames_graph(
        &self,
        g: &mut Graph<S>,
        z_c: &[Vec<f64>],
        noise: &[NoiseSequence],
    ) -> Result<Var> {
        let b = z_c.len();
        let t = noise[0].len();
        let zc_flat: Vec<f64> = z_c.iter().flat_map(|z| z.iter().copied()).collect();
        let zc = g.input(Tensor::from_f64(vec![b, self.cfg.d_c], &zc_flat));
        let mut state = self.layers.r_m.zero_state(g, b);
        let mut rows = Vec::with_capacity(t);
        for ti in 0..t {
            let eps_flat: Vec<f64> = noise.iter().flat_map(|n| n.eps[ti].iter().copied()).collect();
            let eps = g.input(Tensor::from_f64(vec![b, self.cfg.d_eps], &eps_flat));
            state = self.layers.r_m.step(g, &self.params, eps, state);
            let zm = self.layers.r_m_head.apply(g, &self.params, state);
            let x = g.concat_cols(zc, zm);
            let delta = self.layers.nn_delta.apply(g, &self.params, x);
            let content = g.add(zc, delta);
            let full = g.concat_cols(content, zm);
            rows.push(full);
        }
        let z_all = g.concat_rows(&rows);
        Ok(self.layers.g_i.apply(g, &self.params, z_all))
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

    /// One MoCoGAN-objective step: D on S_1 frames and S_T clips, then the
    /// non-saturating generator update. Four terms, no summary-frame term.
    pub fn train_step(
        &mut self,
        videos: &[&VideoTensor],
        adam_d: &mut Adam<S>,
        adam_g: &mut Adam<S>,
        rng: &mut RandomSource,
    ) -> Result<MocoStepReport> {
        if videos.is_empty() {
            return Err(Error::Contract("empty video batch".into()));
        }
        let b = videos.len();
        let t = self.cfg.t_frames;
        let hw = self.cfg.frame_size;
        let clip_len = self.cfg.clip_len;

        let zc_batch: Vec<Vec<f64>> = (0..b).map(|_| self.content_prior().sample(rng)).collect();
        let noise_batch: Vec<NoiseSequence> = (0..b)
            .map(|_| NoiseSequence::draw(t, self.cfg.d_eps, self.cfg.sigma_eps, rng))
            .collect();
        let real_frames: Vec<&[f32]> = videos.iter().map(|v| sample_frame_s1(v, rng).1).collect();
        let real_clips: Vec<VideoTensor> = videos
            .iter()
            .map(|v| sample_clip_st(v, clip_len, rng))
            .collect::<Result<_>>()?;
        let fake_s1: Vec<usize> = (0..b).map(|_| rng.below(t as u64) as usize).collect();
        let fake_clip_start: Vec<usize> = (0..b)
            .map(|_| rng.below((t - clip_len + 1) as u64) as usize)
            .collect();

        let (report_d, d_loss) = {
            let mut g = Graph::new();
            let fake = self.gen_frames_graph(&mut g, &zc_batch, &noise_batch)?;
            let fake = g.detach(fake);
            let fake_imgs = crate::rjgan::gather_video_rows(&mut g, fake, b, &fake_s1);
            let fake_clips =
                crate::rjgan::gather_clips(&mut g, fake, b, t, clip_len, &fake_clip_start);
            let mut real_pixels: Vec<f32> = Vec::new();
            for f in &real_frames {
                real_pixels.extend_from_slice(f);
            }
            let real_imgs = frames_input(&mut g, &real_pixels, b, hw, hw);
            let clip_vars: Vec<Var> = real_clips
                .iter()
                .map(|c| clip_input(&mut g, c.data(), clip_len, hw, hw))
                .collect();
            let real_clip_batch = g.concat_rows(&clip_vars);

            let p_real_img = self.d_image_probs(&mut g, real_imgs);
            let p_fake_img = self.d_image_probs(&mut g, fake_imgs);
            let p_real_vid = self.d_video_probs(&mut g, real_clip_batch);
            let p_fake_vid = self.d_video_probs(&mut g, fake_clips);

            let mnl = |g: &mut Graph<S>, p: Var| {
                let n = g.value(p).len();
                let l = g.ln(p);
                let s = g.sum_all(l);
                g.scale(s, -1.0 / n as f64)
            };
            let mnl1m = |g: &mut Graph<S>, p: Var| {
                let n = g.value(p).len();
                let np = g.neg(p);
                let om = g.add_scalar(np, 1.0);
                let l = g.ln(om);
                let s = g.sum_all(l);
                g.scale(s, -1.0 / n as f64)
            };
            let t_ri = mnl(&mut g, p_real_img);
            let t_fi = mnl1m(&mut g, p_fake_img);
            let t_rv = mnl(&mut g, p_real_vid);
            let t_fv = mnl1m(&mut g, p_fake_vid);
            let mut loss = g.add(t_ri, t_fi);
            loss = g.add(loss, t_rv);
            loss = g.add(loss, t_fv);
            let report = (
                g.scalar_value(t_ri).to_f64(),
                g.scalar_value(t_fi).to_f64(),
                g.scalar_value(t_rv).to_f64(),
                g.scalar_value(t_fv).to_f64(),
            );
            let val = g.scalar_value(loss).to_f64();
            if !val.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite discriminator loss: terms {report:?}"
                )));
            }
            let grads = g.backward(loss);
            adam_d.step_filtered(&mut self.params, &grads, |n| {
                n.starts_with("d_i.") || n.starts_with("d_v.")
            });
            (report, val)
        };

        let g_loss = {
            let mut g = Graph::new();
            let fake = self.gen_frames_graph(&mut g, &zc_batch, &noise_batch)?;
            let fake_imgs = crate::rjgan::gather_video_rows(&mut g, fake, b, &fake_s1);
            let fake_clips =
                crate::rjgan::gather_clips(&mut g, fake, b, t, clip_len, &fake_clip_start);
            let p_img = self.d_image_probs(&mut g, fake_imgs);
            let p_vid = self.d_video_probs(&mut g, fake_clips);
            let li = g.ln(p_img);
            let si = g.sum_all(li);
            let ti_ = g.scale(si, -1.0 / b as f64);
            let lv = g.ln(p_vid);
            let sv = g.sum_all(lv);
            let tv = g.scale(sv, -1.0 / b as f64);
            let loss = g.add(ti_, tv);
            let val = g.scalar_value(loss).to_f64();
            if !val.is_finite() {
                return Err(Error::Training("non-finite generator loss".into()));
            }
            let grads = g.backward(loss);
            adam_g.step_filtered(&mut self.params, &grads, |n| {
                n.starts_with("g_i.") || n.starts_with("r_m.") || n.starts_with("nn_delta.")
            });
            val
        };

        if !self.params.all_finite() {
            return Err(Error::Training("parameters became non-finite".into()));
        }
        Ok(MocoStepReport {
            real_image: report_d.0,
            fake_image: report_d.1,
            real_video: report_d.2,
            fake_video: report_d.3,
            d_loss,
            g_loss,
        })
    }
}

/// Disentanglement probe: fix a content code, vary the motion codes, and
/// report probe labels per generated video. Residual vectors are recomputed
/// for every sampled motion path.
pub fn disentangle_probe<S: Scalar>(
    model: &Rmocogan<S>,
    identity_probe: &crate::metrics::ProbeClassifier,
    action_probe: &crate::metrics::ProbeClassifier,
    num_content: usize,
    num_motion: usize,
    rng: &mut RandomSource,
) -> Result<(Vec<VideoTensor>, DisentangleReport)> {
    if num_content == 0 || num_motion == 0 {
        return Err(Error::Contract("need at least one content and one motion".into()));
    }
    let t = model.cfg.t_frames;
    let mut grid = Vec::with_capacity(num_content * num_motion);
    let mut entries = Vec::with_capacity(num_content * num_motion);
    for c in 0..num_content {
        let z_c = model.sample_content(rng);
        for m in 0..num_motion {
            let noise = NoiseSequence::draw(t, model.cfg.d_eps, model.cfg.sigma_eps, rng);
            let motion = model.gen_motion_path(&noise)?;
            let video = model.gen_video(&z_c, &motion)?;
            let frame0 = video.frame_as_image(0);
            let identity_label = identity_probe.predict_labels(&[&frame0])?[0];
            let action_label = action_probe.predict_labels(&[&video])?[0];
            entries.push(DisentangleEntry {
                content_id: c,
                motion_id: m,
                identity_label,
                action_label,
            });
            grid.push(video);
        }
    }
    let report = DisentangleReport::from_entries(entries, num_content);
    Ok((grid, report))
}

/// One row of a disentanglement probe report.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DisentangleEntry {
    pub content_id: usize,
    pub motion_id: usize,
    pub identity_label: u32,
    pub action_label: u32,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DisentangleReport {
    pub entries: Vec<DisentangleEntry>,
    /// Fraction of content codes whose identity label stays constant across
    /// all sampled motions.
    pub identity_constancy: f64,
}

impl DisentangleReport {
    pub fn from_entries(entries: Vec<DisentangleEntry>, num_content: usize) -> Self {
        let mut constant = 0usize;
        for c in 0..num_content {
            let labels: Vec<u32> = entries
                .iter()
                .filter(|e| e.content_id == c)
                .map(|e| e.identity_label)
                .collect();
            if !labels.is_empty() && labels.iter().all(|&l| l == labels[0]) {
                constant += 1;
            }
        }
        DisentangleReport {
            entries,
            identity_constancy: constant as f64 / num_content.max(1) as f64,
        }
    }
}
