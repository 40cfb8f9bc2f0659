//! Residual joint VAE.
//!
//! Generative model: a summary vector drawn once from N(0, sigma_mu^2 I), a
//! conditional LSTM prior over per-frame residuals, and a convolutional
//! decoder mapping `mu + delta(t)` to frame t under a unit-variance Gaussian
//! likelihood. Inference: a bi-directional recurrent encoder for the summary
//! posterior and a per-frame CNN encoder for the residual posteriors, both
//! reading shared frame encodings phi(t). Training maximizes the exact ELBO
//! (reconstruction minus residual and summary KL terms) with a single
//! reparameterized sample; the prior is conditioned on the posterior-sampled
//! residual path.

use crate::arch::{frames_input, ImageDecoder, ImageEncoderTrunk};
use crate::autodiff::{
    Adam, Gradients, Graph, Linear, LstmCell, Mlp, ParamSet, Scalar, Tensor, Var,
};
use crate::config::{ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::math::{DiagonalGaussian, LN_2PI, LOG_VAR_CLAMP};
use crate::rng::RandomSource;
use crate::synth::{VideoTensor, CHANNELS};

/// Frame encoding dimension (phi).
pub const PHI_DIM: usize = 512;

/// Summary vector plus per-step residuals; frame code t is `mu + deltas[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPath {
    pub mu: Vec<f64>,
    pub deltas: Vec<Vec<f64>>,
}

impl LatentPath {
    pub fn num_steps(&self) -> usize {
        self.deltas.len()
    }

    /// Derived frame code: mu + deltas[t].
    pub fn frame_code(&self, t: usize) -> Vec<f64> {
        self.mu
            .iter()
            .zip(&self.deltas[t])
            .map(|(&m, &d)| m + d)
            .collect()
    }

    pub fn frame_codes(&self) -> Vec<Vec<f64>> {
        (0..self.num_steps()).map(|t| self.frame_code(t)).collect()
    }
}

/// LSTM state of the residual prior; starts at zero alongside delta(0) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl RecurrentState {
    pub fn zero(hidden: usize) -> Self {
        RecurrentState {
            hidden: vec![0.0; hidden],
            cell: vec![0.0; hidden],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboReport {
    /// recon - kl_delta - kl_mu.
    pub total: f64,
    pub recon: f64,
    pub kl_delta: f64,
    pub kl_mu: f64,
}

/// Frozen noise for one ELBO evaluation (one vector per latent draw).
#[derive(Debug, Clone)]
pub struct ElboNoise {
    pub mu: Vec<f64>,
    pub deltas: Vec<Vec<f64>>,
}

impl ElboNoise {
    pub fn draw(d_z: usize, t: usize, rng: &mut RandomSource) -> Self {
        ElboNoise {
            mu: rng.normal_vec(d_z),
            deltas: (0..t).map(|_| rng.normal_vec(d_z)).collect(),
        }
    }
}

struct Layers {
    dec: ImageDecoder,
    prior_cell: LstmCell,
    prior_mean: Linear,
    prior_logvar: Linear,
    enc_trunk: ImageEncoderTrunk,
    phi_head: Linear,
    mu_fwd: LstmCell,
    mu_bwd: LstmCell,
    mu_mean: Linear,
    mu_logvar: Linear,
    delta_mlp: Mlp,
    delta_mean: Linear,
    delta_logvar: Linear,
}

pub struct Rjvae<S: Scalar> {
    cfg: ModelConfig,
    layers: Layers,
    pub params: ParamSet<S>,
}

/// The four parameter groups: decoder, residual prior, summary encoder,
/// frame/residual encoder.
pub const PARAM_GROUPS: [&str; 4] = ["dec.", "prior.", "mu_enc.", "delta_enc."];

impl<S: Scalar> Rjvae<S> {
    pub fn new(cfg: ModelConfig, init_seed: u64) -> Result<Self> {
        if cfg.model != ModelKind::Rjvae {
            return Err(Error::Config(format!(
                "Rjvae requires a rjvae config, got {}",
                cfg.model.name()
            )));
        }
        cfg.validate()?;
        let mut rng = RandomSource::new(init_seed).split(0xA1);
        let mut ps = ParamSet::new();
        let dz = cfg.d_z;
        let rh = cfg.recurrent_hidden;
        let dec = ImageDecoder::new(&mut ps, &mut rng, "dec", dz, cfg.frame_size, cfg.base_channels);
        let prior_cell = LstmCell::new(&mut ps, &mut rng, "prior.cell", 2 * dz, rh);
        let prior_mean = Linear::new(&mut ps, &mut rng, "prior.mean", rh, dz);
        let prior_logvar = Linear::new(&mut ps, &mut rng, "prior.logvar", rh, dz);
        let enc_trunk = ImageEncoderTrunk::new(
            &mut ps,
            &mut rng,
            "delta_enc.cnn",
            cfg.frame_size,
            cfg.base_channels,
            crate::arch::Act::Silu,
        );
        let phi_head = Linear::new(&mut ps, &mut rng, "delta_enc.phi", enc_trunk.out_len, PHI_DIM);
        let mu_fwd = LstmCell::new(&mut ps, &mut rng, "mu_enc.fwd", PHI_DIM, rh);
        let mu_bwd = LstmCell::new(&mut ps, &mut rng, "mu_enc.bwd", PHI_DIM, rh);
        let mu_mean = Linear::new(&mut ps, &mut rng, "mu_enc.mean", 2 * rh, dz);
        let mu_logvar = Linear::new(&mut ps, &mut rng, "mu_enc.logvar", 2 * rh, dz);
        let delta_mlp = Mlp::new(&mut ps, &mut rng, "delta_enc.mlp", &[PHI_DIM + dz, 2 * rh]);
        let delta_mean = Linear::new(&mut ps, &mut rng, "delta_enc.mean", 2 * rh, dz);
        let delta_logvar = Linear::new(&mut ps, &mut rng, "delta_enc.logvar", 2 * rh, dz);
        Ok(Rjvae {
            cfg,
            layers: Layers {
                dec,
                prior_cell,
                prior_mean,
                prior_logvar,
                enc_trunk,
                phi_head,
                mu_fwd,
                mu_bwd,
                mu_mean,
                mu_logvar,
                delta_mlp,
                delta_mean,
                delta_logvar,
            },
            params: ps,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Fixed isotropic prior over the summary vector.
    pub fn prior_mu(&self) -> DiagonalGaussian {
        DiagonalGaussian::isotropic(self.cfg.d_z, self.cfg.sigma_mu)
            .expect("sigma validated at construction")
    }

    // ---- graph builders ----

    fn phi_graph(&self, g: &mut Graph<S>, frames: Var) -> Var {
        let h = self.layers.enc_trunk.apply(g, &self.params, frames);
        self.layers.phi_head.apply(g, &self.params, h)
    }

    fn mu_posterior_graph(&self, g: &mut Graph<S>, phi_all: Var, t: usize, b: usize) -> (Var, Var) {
        let (mut hf, mut cf) = self.layers.mu_fwd.zero_state(g, b);
        for step in 0..t {
            let x = g.slice_rows(phi_all, step * b, (step + 1) * b);
            let (h, c) = self.layers.mu_fwd.step(g, &self.params, x, hf, cf);
            hf = h;
            cf = c;
        }
        let (mut hb, mut cb) = self.layers.mu_bwd.zero_state(g, b);
        for step in (0..t).rev() {
            let x = g.slice_rows(phi_all, step * b, (step + 1) * b);
            let (h, c) = self.layers.mu_bwd.step(g, &self.params, x, hb, cb);
            hb = h;
            cb = c;
        }
        let h = g.concat_cols(hf, hb);
        let mean = self.layers.mu_mean.apply(g, &self.params, h);
        let lv = self.layers.mu_logvar.apply(g, &self.params, h);
        let lv = g.clamp(lv, -LOG_VAR_CLAMP, LOG_VAR_CLAMP);
        (mean, lv)
    }

    fn delta_posterior_graph(&self, g: &mut Graph<S>, phi_t: Var, mu: Var) -> (Var, Var) {
        let x = g.concat_cols(phi_t, mu);
        let h = self.layers.delta_mlp.apply(g, &self.params, x);
        let h = g.silu(h);
        let mean = self.layers.delta_mean.apply(g, &self.params, h);
        let lv = self.layers.delta_logvar.apply(g, &self.params, h);
        let lv = g.clamp(lv, -LOG_VAR_CLAMP, LOG_VAR_CLAMP);
        (mean, lv)
    }

    fn prior_step_graph(
        &self,
        g: &mut Graph<S>,
        mu: Var,
        delta_prev: Var,
        state: (Var, Var),
    ) -> (Var, Var, (Var, Var)) {
        let x = g.concat_cols(mu, delta_prev);
        let (h, c) = self.layers.prior_cell.step(g, &self.params, x, state.0, state.1);
        let mean = self.layers.prior_mean.apply(g, &self.params, h);
        let lv = self.layers.prior_logvar.apply(g, &self.params, h);
        let lv = g.clamp(lv, -LOG_VAR_CLAMP, LOG_VAR_CLAMP);
        (mean, lv, (h, c))
    }

    fn decode_graph(&self, g: &mut Graph<S>, z: Var) -> Var {
        self.layers.dec.apply(g, &self.params, z)
    }

    /// Per-row KL(q ‖ p) between diagonal Gaussians given as [B, d] tensors.
    fn kl_rows(g: &mut Graph<S>, mq: Var, lq: Var, mp: Var, lp: Var) -> Var {
        let d = g.shape(mq)[1];
        let t1 = g.sub(lp, lq);
        let dq = g.sub(lq, lp);
        let t2 = g.exp(dq);
        let dm = g.sub(mq, mp);
        let dm2 = g.mul(dm, dm);
        let nlp = g.neg(lp);
        let prec = g.exp(nlp);
        let t3 = g.mul(dm2, prec);
        let s = g.add(t1, t2);
        let s = g.add(s, t3);
        let rows = g.row_sums(s);
        let rows = g.add_scalar(rows, -(d as f64));
        g.scale(rows, 0.5)
    }

    fn isotropic_prior_nodes(&self, g: &mut Graph<S>, b: usize) -> (Var, Var) {
        let dz = self.cfg.d_z;
        let zero = g.input(Tensor::zeros(vec![b, dz]));
        let lv_val = 2.0 * self.cfg.sigma_mu.ln();
        let lv = g.input(Tensor::from_f64(vec![b, dz], &vec![lv_val; b * dz]));
        (zero, lv)
    }

    fn noise_input(&self, g: &mut Graph<S>, noise: &[Vec<f64>]) -> Var {
        let dz = self.cfg.d_z;
        let b = noise.len();
        let flat: Vec<f64> = noise.iter().flat_map(|n| n.iter().copied()).collect();
        g.input(Tensor::from_f64(vec![b, dz], &flat))
    }

    fn reparam(g: &mut Graph<S>, mean: Var, logvar: Var, noise: Var) -> Var {
        let half = g.scale(logvar, 0.5);
        let std = g.exp(half);
        let scaled = g.mul(std, noise);
        g.add(mean, scaled)
    }

    /// Build the full single-sample ELBO for a batch of equal-length videos.
    /// Noise holds one entry per video. Returns per-video [B] vectors.
    fn elbo_graph(
        &self,
        g: &mut Graph<S>,
        videos: &[&VideoTensor],
        noise: &[ElboNoise],
    ) -> Result<(Var, Var, Var, Var)> {
        let b = videos.len();
        if b == 0 {
            return Err(Error::Contract("empty batch".into()));
        }
        let t = videos[0].num_frames();
        let (h, w) = (videos[0].height(), videos[0].width());
        if h != self.cfg.frame_size || w != self.cfg.frame_size {
            return Err(Error::Contract(format!(
                "video frames are {h}x{w}, model expects {0}x{0}",
                self.cfg.frame_size
            )));
        }
        if videos.iter().any(|v| v.num_frames() != t) {
            return Err(Error::Contract("batch videos must share one length".into()));
        }
        if noise.len() != b || noise.iter().any(|n| n.deltas.len() != t) {
            return Err(Error::Contract("noise bundle shape mismatch".into()));
        }
        let dz = self.cfg.d_z;
        // t-major frame rows: row index = t*B + b.
        let mut flat = Vec::with_capacity(t * b * CHANNELS * h * w);
        for ti in 0..t {
            for v in videos {
                flat.extend_from_slice(v.frame(ti));
            }
        }
        let frames = frames_input(g, &flat, t * b, h, w);
        let phi_all = self.phi_graph(g, frames);

        let (mu_mean, mu_lv) = self.mu_posterior_graph(g, phi_all, t, b);
        let mu_noise_vecs: Vec<Vec<f64>> = noise.iter().map(|n| n.mu.clone()).collect();
        let mu_noise = self.noise_input(g, &mu_noise_vecs);
        let mu_s = Self::reparam(g, mu_mean, mu_lv, mu_noise);

        let (prior_mean0, prior_lv0) = self.isotropic_prior_nodes(g, b);
        let kl_mu = Self::kl_rows(g, mu_mean, mu_lv, prior_mean0, prior_lv0); // [B]

        let mut state = self.layers.prior_cell.zero_state(g, b);
        let mut delta_prev = g.input(Tensor::zeros(vec![b, dz]));
        let mut kl_delta: Option<Var> = None;
        let mut z_rows = Vec::with_capacity(t);
        for ti in 0..t {
            let phi_t = g.slice_rows(phi_all, ti * b, (ti + 1) * b);
            let (dm, dlv) = self.delta_posterior_graph(g, phi_t, mu_s);
            let dn_vecs: Vec<Vec<f64>> = noise.iter().map(|n| n.deltas[ti].clone()).collect();
            let dn = self.noise_input(g, &dn_vecs);
            let delta_s = Self::reparam(g, dm, dlv, dn);
            let (pm, plv, new_state) = self.prior_step_graph(g, mu_s, delta_prev, state);
            state = new_state;
            let kl_t = Self::kl_rows(g, dm, dlv, pm, plv); // [B]
            kl_delta = Some(match kl_delta {
                None => kl_t,
                Some(acc) => g.add(acc, kl_t),
            });
            let z_t = g.add(mu_s, delta_s);
            z_rows.push(z_t);
            delta_prev = delta_s;
        }
        let kl_delta = kl_delta.expect("t >= 1");
        let z_all = g.concat_rows(&z_rows); // [T*B, dz]
        let decoded = self.decode_graph(g, z_all); // [T*B, C, H, W]
        let diff = g.sub(frames, decoded);
        let sq = g.mul(diff, diff);
        let d_pix = CHANNELS * h * w;
        let sq2 = g.reshape(sq, vec![t * b, d_pix]);
        let frame_sq = g.row_sums(sq2); // [T*B]
        let frame_logp = g.scale(frame_sq, -0.5);
        let frame_logp = g.add_scalar(frame_logp, -0.5 * d_pix as f64 * LN_2PI);
        let per_tb = g.reshape(frame_logp, vec![t, b]);
        let recon = g.col_sums(per_tb); // [B]

        let neg_kl_delta = g.neg(kl_delta);
        let neg_kl_mu = g.neg(kl_mu);
        let total = g.add(recon, neg_kl_delta);
        let total = g.add(total, neg_kl_mu);
        Ok((total, recon, kl_delta, kl_mu))
    }

    fn report_from(
        g: &Graph<S>,
        idx: usize,
        total: Var,
        recon: Var,
        kl_delta: Var,
        kl_mu: Var,
    ) -> ElboReport {
        ElboReport {
            total: g.value(total)[idx].to_f64(),
            recon: g.value(recon)[idx].to_f64(),
            kl_delta: g.value(kl_delta)[idx].to_f64(),
            kl_mu: g.value(kl_mu)[idx].to_f64(),
        }
    }

    // ---- public operations ----

    /// Single-sample ELBO with explicit (frozen) noise.
    pub fn elbo_with_noise(&self, video: &VideoTensor, noise: &ElboNoise) -> Result<ElboReport> {
        let mut g = Graph::new();
        let (total, recon, kld, klm) = self.elbo_graph(&mut g, &[video], &[noise.clone()])?;
        let report = Self::report_from(&g, 0, total, recon, kld, klm);
        if !report.total.is_finite() {
            return Err(Error::Training(format!(
                "non-finite ELBO: recon {}, kl_delta {}, kl_mu {}",
                report.recon, report.kl_delta, report.kl_mu
            )));
        }
        Ok(report)
    }

    /// Single-sample reparameterized ELBO estimate.
    pub fn elbo(&self, video: &VideoTensor, rng: &mut RandomSource) -> Result<ElboReport> {
        let noise = ElboNoise::draw(self.cfg.d_z, video.num_frames(), rng);
        self.elbo_with_noise(video, &noise)
    }

    /// Mean ELBO over `samples` independent draws, plus the per-sample totals
    /// (for standard errors). Samples are batched in chunks.
    pub fn elbo_multi(
        &self,
        video: &VideoTensor,
        samples: usize,
        rng: &mut RandomSource,
    ) -> Result<(ElboReport, Vec<f64>)> {
        if samples == 0 {
            return Err(Error::Contract("need at least one sample".into()));
        }
        let chunk = 64usize;
        let mut totals = Vec::with_capacity(samples);
        let mut acc = ElboReport {
            total: 0.0,
            recon: 0.0,
            kl_delta: 0.0,
            kl_mu: 0.0,
        };
        let mut remaining = samples;
        while remaining > 0 {
            let k = remaining.min(chunk);
            let videos: Vec<&VideoTensor> = std::iter::repeat(video).take(k).collect();
            let noise: Vec<ElboNoise> = (0..k)
                .map(|_| ElboNoise::draw(self.cfg.d_z, video.num_frames(), rng))
                .collect();
            let mut g = Graph::new();
            let (total, recon, kld, klm) = self.elbo_graph(&mut g, &videos, &noise)?;
            for i in 0..k {
                let r = Self::report_from(&g, i, total, recon, kld, klm);
                totals.push(r.total);
                acc.total += r.total;
                acc.recon += r.recon;
                acc.kl_delta += r.kl_delta;
                acc.kl_mu += r.kl_mu;
            }
            remaining -= k;
        }
        let n = samples as f64;
        Ok((
            ElboReport {
                total: acc.total / n,
                recon: acc.recon / n,
                kl_delta: acc.kl_delta / n,
                kl_mu: acc.kl_mu / n,
            },
            totals,
        ))
    }

    /// ELBO value and analytic parameter gradients for frozen noise
    /// (the object the finite-difference oracle checks).
    pub fn elbo_loss_and_grads(
        &self,
        video: &VideoTensor,
        noise: &ElboNoise,
    ) -> Result<(ElboReport, Gradients<S>)> {
        let mut g = Graph::new();
        let (total, recon, kld, klm) = self.elbo_graph(&mut g, &[video], &[noise.clone()])?;
        let report = Self::report_from(&g, 0, total, recon, kld, klm);
        let scalar = g.sum_all(total);
        let grads = g.backward(scalar);
        Ok((report, grads))
    }

    /// One gradient-ascent step on the batch-mean ELBO. Returns the
    /// batch-mean report before the update.
    pub fn train_step(
        &mut self,
        batch: &[&VideoTensor],
        adam: &mut Adam<S>,
        rng: &mut RandomSource,
    ) -> Result<ElboReport> {
        let b = batch.len();
        let noise: Vec<ElboNoise> = batch
            .iter()
            .map(|v| ElboNoise::draw(self.cfg.d_z, v.num_frames(), rng))
            .collect();
        let mut g = Graph::new();
        let (total, recon, kld, klm) = self.elbo_graph(&mut g, batch, &noise)?;
        let mut mean = ElboReport {
            total: 0.0,
            recon: 0.0,
            kl_delta: 0.0,
            kl_mu: 0.0,
        };
        for i in 0..b {
            let r = Self::report_from(&g, i, total, recon, kld, klm);
            mean.total += r.total / b as f64;
            mean.recon += r.recon / b as f64;
            mean.kl_delta += r.kl_delta / b as f64;
            mean.kl_mu += r.kl_mu / b as f64;
        }
        if !mean.total.is_finite() {
            return Err(Error::Training(format!(
                "non-finite ELBO in training step: recon {}, kl_delta {}, kl_mu {}",
                mean.recon, mean.kl_delta, mean.kl_mu
            )));
        }
        let sum = g.sum_all(total);
        let loss = g.scale(sum, -1.0 / b as f64);
        let grads = g.backward(loss);
        if !grads.all_finite() {
            return Err(Error::Training("non-finite ELBO gradient".into()));
        }
        adam.step(&mut self.params, &grads);
        if !self.params.all_finite() {
            return Err(Error::Training("parameters became non-finite".into()));
        }
        Ok(mean)
    }

    /// Summary posterior q(mu | x(1:T)); order-sensitive in the frames.
    pub fn infer_mu(&self, video: &VideoTensor) -> Result<DiagonalGaussian> {
        let t = video.num_frames();
        let (h, w) = (video.height(), video.width());
        let mut g = Graph::new();
        let frames = frames_input(&mut g, video.data(), t, h, w);
        let phi = self.phi_graph(&mut g, frames);
        let (mean, lv) = self.mu_posterior_graph(&mut g, phi, t, 1);
        DiagonalGaussian::new(
            g.value(mean).iter().map(|v| v.to_f64()).collect(),
            g.value(lv).iter().map(|v| v.to_f64()).collect(),
        )
    }

    /// Per-frame residual posterior q(delta(t) | mu, x(t)); depends on this
    /// frame only.
    pub fn infer_delta(&self, mu: &[f64], frame: &[f32]) -> Result<DiagonalGaussian> {
        if mu.len() != self.cfg.d_z {
            return Err(Error::Contract(format!(
                "mu has dimension {}, model expects {}",
                mu.len(),
                self.cfg.d_z
            )));
        }
        let hw = self.cfg.frame_size;
        if frame.len() != CHANNELS * hw * hw {
            return Err(Error::Contract("frame size mismatch".into()));
        }
        let mut g = Graph::new();
        let f = frames_input(&mut g, frame, 1, hw, hw);
        let phi = self.phi_graph(&mut g, f);
        let mu_node = g.input(Tensor::from_f64(vec![1, self.cfg.d_z], mu));
        let (mean, lv) = self.delta_posterior_graph(&mut g, phi, mu_node);
        DiagonalGaussian::new(
            g.value(mean).iter().map(|v| v.to_f64()).collect(),
            g.value(lv).iter().map(|v| v.to_f64()).collect(),
        )
    }

    /// Residual posteriors for every frame of a video under a fixed mu.
    pub fn infer_deltas(&self, video: &VideoTensor, mu: &[f64]) -> Result<Vec<DiagonalGaussian>> {
        (0..video.num_frames())
            .map(|t| self.infer_delta(mu, video.frame(t)))
            .collect()
    }

    /// One step of the conditional residual prior p(delta(t) | delta(<t), mu).
    pub fn prior_delta_step(
        &self,
        mu: &[f64],
        delta_prev: &[f64],
        state: &RecurrentState,
    ) -> Result<(DiagonalGaussian, RecurrentState)> {
        let dz = self.cfg.d_z;
        let rh = self.cfg.recurrent_hidden;
        if mu.len() != dz || delta_prev.len() != dz {
            return Err(Error::Contract("prior step dimension mismatch".into()));
        }
        if state.hidden.len() != rh || state.cell.len() != rh {
            return Err(Error::Contract("recurrent state dimension mismatch".into()));
        }
        if !state.hidden.iter().chain(&state.cell).all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite recurrent state".into()));
        }
        let mut g = Graph::new();
        let mu_n = g.input(Tensor::from_f64(vec![1, dz], mu));
        let dp_n = g.input(Tensor::from_f64(vec![1, dz], delta_prev));
        let h_n = g.input(Tensor::from_f64(vec![1, rh], &state.hidden));
        let c_n = g.input(Tensor::from_f64(vec![1, rh], &state.cell));
        let (mean, lv, (h, c)) = self.prior_step_graph(&mut g, mu_n, dp_n, (h_n, c_n));
        let dist = DiagonalGaussian::new(
            g.value(mean).iter().map(|v| v.to_f64()).collect(),
            g.value(lv).iter().map(|v| v.to_f64()).collect(),
        )?;
        let new_state = RecurrentState {
            hidden: g.value(h).iter().map(|v| v.to_f64()).collect(),
            cell: g.value(c).iter().map(|v| v.to_f64()).collect(),
        };
        if !new_state.hidden.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("prior step produced non-finite state".into()));
        }
        Ok((dist, new_state))
    }

    /// Decode one latent vector to a frame (the mean of the likelihood).
    pub fn decode_frame(&self, z: &[f64]) -> Result<Vec<f32>> {
        if z.len() != self.cfg.d_z {
            return Err(Error::Contract(format!(
                "latent has dimension {}, model expects {}",
                z.len(),
                self.cfg.d_z
            )));
        }
        let mut g = Graph::new();
        let zn = g.input(Tensor::from_f64(vec![1, self.cfg.d_z], z));
        let x = self.decode_graph(&mut g, zn);
        Ok(g.value(x).iter().map(|v| v.to_f64() as f32).collect())
    }

    /// Ancestral sampling from a given summary vector with explicit per-step
    /// prior noise (one vector per frame); lets callers share a residual
    /// noise sequence across several mu values.
    pub fn generate_from_mu(
        &self,
        mu: &[f64],
        step_noise: &[Vec<f64>],
    ) -> Result<(VideoTensor, LatentPath)> {
        let t = step_noise.len();
        if t == 0 {
            return Err(Error::Contract("need at least one frame".into()));
        }
        let dz = self.cfg.d_z;
        if mu.len() != dz || step_noise.iter().any(|n| n.len() != dz) {
            return Err(Error::Contract("generation noise dimension mismatch".into()));
        }
        let mut state = RecurrentState::zero(self.cfg.recurrent_hidden);
        let mut delta_prev = vec![0.0; dz];
        let mut deltas = Vec::with_capacity(t);
        for noise in step_noise {
            let (dist, new_state) = self.prior_delta_step(mu, &delta_prev, &state)?;
            let delta = dist.sample_with_noise(noise)?;
            state = new_state;
            delta_prev = delta.clone();
            deltas.push(delta);
        }
        let path = LatentPath {
            mu: mu.to_vec(),
            deltas,
        };
        let hw = self.cfg.frame_size;
        let mut frames = Vec::with_capacity(t * CHANNELS * hw * hw);
        for ti in 0..t {
            frames.extend(self.decode_frame(&path.frame_code(ti))?);
        }
        let video = VideoTensor::new(frames, t, hw, hw, None)?;
        Ok((video, path))
    }

    /// Ancestral sampling: mu from the isotropic prior, residuals from the
    /// recurrent prior, frames decoded from mu + delta(t).
    pub fn generate(&self, t: usize, rng: &mut RandomSource) -> Result<(VideoTensor, LatentPath)> {
        if t == 0 {
            return Err(Error::Contract("need at least one frame".into()));
        }
        let dz = self.cfg.d_z;
        let mu = self.prior_mu().sample(rng);
        let step_noise: Vec<Vec<f64>> = (0..t).map(|_| rng.normal_vec(dz)).collect();
        self.generate_from_mu(&mu, &step_noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> ModelConfig {
        let mut cfg = ModelConfig::desk(ModelKind::Rjvae);
        cfg.d_z = 4;
        cfg.d_eps = 4;
        cfg.frame_size = 8;
        cfg.t_frames = 3;
        cfg.clip_len = 3;
        cfg.base_channels = 4;
        cfg.recurrent_hidden = 8;
        cfg
    }

    fn tiny_model() -> Rjvae<f64> {
        Rjvae::new(tiny_cfg(), 42).unwrap()
    }

    fn random_video(cfg: &ModelConfig, seed: u64) -> VideoTensor {
        let mut rng = RandomSource::new(seed);
        let hw = cfg.frame_size;
        let n = cfg.t_frames * CHANNELS * hw * hw;
        let data: Vec<f32> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0) as f32).collect();
        VideoTensor::new(data, cfg.t_frames, hw, hw, None).unwrap()
    }

    #[test]
    fn prior_mu_matches_config() {
        let model = tiny_model();
        let p = model.prior_mu();
        assert_eq!(p.dim(), 4);
        assert!(p.mean().iter().all(|&m| m == 0.0));
        assert!(p.log_var().iter().all(|&lv| lv == 0.0));
        assert_eq!(crate::math::gaussian_kl(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn prior_mu_sigma_two() {
        let mut cfg = tiny_cfg();
        cfg.sigma_mu = 2.0;
        let model: Rjvae<f64> = Rjvae::new(cfg, 0).unwrap();
        for &lv in model.prior_mu().log_var() {
            assert!((lv - 4.0f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn prior_delta_step_deterministic_and_mu_sensitive() {
        let model = tiny_model();
        let state = RecurrentState::zero(8);
        let mu = vec![0.3, -0.2, 0.9, 0.1];
        let zero = vec![0.0; 4];
        let (d1, s1) = model.prior_delta_step(&mu, &zero, &state).unwrap();
        let (d2, s2) = model.prior_delta_step(&mu, &zero, &state).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(s1, s2);
        let mut mu2 = mu.clone();
        mu2[0] += 0.5;
        let (d3, _) = model.prior_delta_step(&mu2, &zero, &state).unwrap();
        assert_ne!(d1.mean(), d3.mean(), "prior must depend on mu");
    }

    #[test]
    fn elbo_components_decompose() {
        let model = tiny_model();
        let cfg = tiny_cfg();
        let video = random_video(&cfg, 7);
        let mut rng = RandomSource::new(3);
        let r = model.elbo(&video, &mut rng).unwrap();
        assert!((r.total - (r.recon - r.kl_delta - r.kl_mu)).abs() < 1e-9);
        assert!(r.kl_delta >= 0.0);
        assert!(r.kl_mu >= 0.0);
    }

    #[test]
    fn elbo_kl_mu_matches_closed_form_public_ops() {
        let model = tiny_model();
        let cfg = tiny_cfg();
        let video = random_video(&cfg, 9);
        // With zero mu-noise the sampled mu is the posterior mean; kl_mu is a
        // pure function of the posterior and must match gaussian_kl exactly.
        let noise = ElboNoise {
            mu: vec![0.0; 4],
            deltas: (0..3).map(|_| vec![0.0; 4]).collect(),
        };
        let r = model.elbo_with_noise(&video, &noise).unwrap();
        let q = model.infer_mu(&video).unwrap();
        let expect = crate::math::gaussian_kl(&q, &model.prior_mu()).unwrap();
        assert!(
            (r.kl_mu - expect).abs() <= 1e-10 * (1.0 + expect.abs()),
            "kl_mu {} vs {}",
            r.kl_mu,
            expect
        );
    }

    #[test]
    fn infer_mu_is_order_sensitive() {
        let model = tiny_model();
        let cfg = tiny_cfg();
        let video = random_video(&cfg, 11);
        // Swap two frames.
        let mut swapped = Vec::new();
        for t in [1usize, 0, 2] {
            swapped.extend_from_slice(video.frame(t));
        }
        let swapped = VideoTensor::new(swapped, 3, 8, 8, None).unwrap();
        let a = model.infer_mu(&video).unwrap();
        let b = model.infer_mu(&swapped).unwrap();
        assert_ne!(a.mean(), b.mean());
        // Deterministic on identical input.
        let c = model.infer_mu(&video).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.dim(), model.config().d_z);
        let kl = crate::math::gaussian_kl(&a, &model.prior_mu()).unwrap();
        assert!(kl.is_finite() && kl >= 0.0);
    }

    #[test]
    fn infer_delta_local_to_its_frame() {
        let model = tiny_model();
        let cfg = tiny_cfg();
        let v1 = random_video(&cfg, 13);
        let mut frames2 = v1.data().to_vec();
        // Perturb frames 0 and 2, keep frame 1.
        let fl = v1.frame_len();
        for x in frames2[..fl].iter_mut() {
            *x = (*x * -0.5).clamp(-1.0, 1.0);
        }
        for x in frames2[2 * fl..].iter_mut() {
            *x = (*x * 0.25).clamp(-1.0, 1.0);
        }
        let v2 = VideoTensor::new(frames2, 3, 8, 8, None).unwrap();
        let mu = vec![0.1, 0.2, -0.3, 0.4];
        let d1 = model.infer_deltas(&v1, &mu).unwrap();
        let d2 = model.infer_deltas(&v2, &mu).unwrap();
        assert_eq!(d1[1], d2[1], "frame-1 posterior must ignore other frames");
        assert_ne!(d1[0], d2[0]);
    }

    #[test]
    fn generate_is_deterministic_and_redecodable() {
        let model = tiny_model();
        let mut r1 = RandomSource::new(5);
        let mut r2 = RandomSource::new(5);
        let (v1, path) = model.generate(3, &mut r1).unwrap();
        let (v2, _) = model.generate(3, &mut r2).unwrap();
        assert_eq!(v1.data(), v2.data(), "same seed, same video");
        // Re-decoding the returned path reproduces the frames bit-exactly.
        for t in 0..3 {
            let frame = model.decode_frame(&path.frame_code(t)).unwrap();
            assert_eq!(frame.as_slice(), v1.frame(t));
        }
        // T = 1 works.
        let (v3, p3) = model.generate(1, &mut r1).unwrap();
        assert_eq!(v3.num_frames(), 1);
        assert_eq!(p3.num_steps(), 1);
    }

    #[test]
    fn decode_frame_bounded() {
        let model = tiny_model();
        let frame = model.decode_frame(&[3.0, -10.0, 0.0, 25.0]).unwrap();
        assert!(frame.iter().all(|&v| (-1.0..=1.0).contains(&v)));
    }

    #[test]
    fn elbo_multi_reduces_variance() {
        let model = tiny_model();
        let cfg = tiny_cfg();
        let video = random_video(&cfg, 21);
        let mut rng = RandomSource::new(2);
        let (mean, totals) = model.elbo_multi(&video, 100, &mut rng).unwrap();
        assert_eq!(totals.len(), 100);
        let emp: f64 = totals.iter().sum::<f64>() / 100.0;
        assert!((mean.total - emp).abs() < 1e-9);
    }

    #[test]
    fn train_step_changes_parameters_deterministically() {
        let cfg = tiny_cfg();
        let video = random_video(&cfg, 31);
        let run = |seed: u64| -> Vec<f32> {
            let mut model: Rjvae<f32> = Rjvae::new(tiny_cfg(), 8).unwrap();
            let mut adam = Adam::new(
                crate::autodiff::AdamConfig {
                    lr: cfg.optimizer.lr,
                    beta1: cfg.optimizer.beta1,
                    beta2: cfg.optimizer.beta2,
                    eps: 1e-8,
                    weight_decay: cfg.optimizer.weight_decay,
                },
                &model.params,
            );
            let mut rng = RandomSource::new(seed);
            let r = model.train_step(&[&video], &mut adam, &mut rng).unwrap();
            assert!(r.total.is_finite());
            model.params.values("dec.fc.w").unwrap().to_vec()
        };
        let a = run(4);
        let b = run(4);
        assert_eq!(a, b, "identical seed must reproduce identical parameters");
        let c = run(5);
        assert_ne!(a, c, "different noise should move parameters differently");
    }

    #[test]
    fn rigged_zero_kl_zero_residual_total() {
        // With exact reconstruction and q = p everywhere the ELBO reduces to
        // T * (-(D/2) ln 2pi): assembled from the same primitives elbo uses.
        let t = 5usize;
        let d = 12usize;
        let frame = vec![0.25f64; d];
        let mut total = 0.0;
        for _ in 0..t {
            total += crate::math::gaussian_log_density(&frame, &frame, true).unwrap();
        }
        let expect = -(t as f64) * (d as f64 / 2.0) * LN_2PI;
        assert!((total - expect).abs() < 1e-12);
    }
}
