//! Probe classifiers and the quantitative metrics built on them:
//! Inception Score from an image probe and a Fréchet video distance analog
//! from a spatio-temporal probe.
//!
//! The official FVD uses a pretrained I3D network; at desk scale the feature
//! network is a small 3-D conv action classifier trained on the synthetic
//! dataset, so the resulting numbers are internal-consistency metrics only.
//! Features are penultimate-layer activations, and every report names that
//! layer explicitly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::{clip_input, frames_input, Act, ImageEncoderTrunk, VideoEncoderTrunk};
use crate::synth::CHANNELS;
use crate::autodiff::{Adam, AdamConfig, Graph, Linear, ParamSet, Var};
use crate::checkpoint::{read_array, write_array, ArrayMeta};
use crate::error::{Error, Result};
use crate::math::{frechet_distance, FeatureStats};
use crate::rng::RandomSource;
use crate::synth::{Dataset, VideoTensor};

/// Probability floor inside the Inception Score KL.
pub const PROB_FLOOR: f64 = 1e-12;

/// Penultimate feature dimension of every probe.
pub const FEATURE_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    Image2d,
    Video3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    Identity,
    Action,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeTrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Std of Gaussian pixel noise added to training inputs. The probe pool
    /// is small, so without it the classifier memorizes individual samples
    /// instead of the labeled factors.
    pub input_noise: f64,
    /// Maximum random translation (pixels) applied to training samples; the
    /// flat background makes shifts label-preserving for every factor.
    pub augment_shift: usize,
    /// Apply random 90-degree rotations and flips (exact pixel permutations)
    /// to training samples. Label-preserving for identity, not for actions
    /// with a direction, so only the identity probe turns it on.
    pub augment_dihedral: bool,
    pub base_channels: usize,
    /// Fraction of entries held out for the accuracy estimate.
    pub holdout_fraction: f64,
}

impl Default for ProbeTrainConfig {
    fn default() -> Self {
        ProbeTrainConfig {
            steps: 1500,
            batch_size: 16,
            lr: 1e-3,
            weight_decay: 1e-4,
            input_noise: 0.05,
            augment_shift: 4,
            augment_dihedral: false,
            base_channels: 16,
            holdout_fraction: 0.25,
        }
    }
}

enum Trunk {
    Image(ImageEncoderTrunk),
    Video(VideoEncoderTrunk),
}

/// Small convolutional classifier with a 64-dim penultimate feature layer.
pub struct ProbeClassifier {
    pub kind: ProbeKind,
    pub label: LabelKind,
    pub num_classes: usize,
    pub frame_size: usize,
    pub clip_len: usize,
    pub base_channels: usize,
    /// Class index -> original dataset label value.
    pub label_values: Vec<u32>,
    pub held_out_accuracy: f64,
    pub seed: u64,
    trunk: Trunk,
    feat: Linear,
    head: Linear,
    params: ParamSet<f32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProbeMeta {
    kind: ProbeKind,
    label: LabelKind,
    num_classes: usize,
    frame_size: usize,
    clip_len: usize,
    base_channels: usize,
    label_values: Vec<u32>,
    held_out_accuracy: f64,
    seed: u64,
    feature_dim: usize,
    feature_layer: String,
    params: Vec<ArrayMeta>,
}

impl ProbeClassifier {
    fn build(
        kind: ProbeKind,
        label: LabelKind,
        num_classes: usize,
        frame_size: usize,
        clip_len: usize,
        base_channels: usize,
        label_values: Vec<u32>,
        seed: u64,
    ) -> Self {
        let mut rng = RandomSource::new(seed).split(0xD4);
        let mut ps = ParamSet::new();
        // Probe trunks diverge from the discriminator layout where it buys
        // generalization from a tiny labeled pool: a luminance input channel
        // (hue-invariant silhouettes), per-sample layer norm, and global
        // average+max pooling instead of a position-sensitive flatten.
        let (trunk, pooled_len) = match kind {
            ProbeKind::Image2d => {
                let t = ImageEncoderTrunk::with_input_channels(
                    &mut ps,
                    &mut rng,
                    "probe.cnn",
                    CHANNELS + 1,
                    frame_size,
                    base_channels,
                    Act::LeakyRelu(0.2),
                );
                let c = t.out_channels;
                (Trunk::Image(t), 2 * c)
            }
            ProbeKind::Video3d => {
                let t = VideoEncoderTrunk::with_input_channels(
                    &mut ps,
                    &mut rng,
                    "probe.cnn",
                    CHANNELS + 1,
                    frame_size,
                    clip_len,
                    base_channels,
                    Act::LeakyRelu(0.2),
                );
                let c = t.out_channels;
                (Trunk::Video(t), 2 * c)
            }
        };
        let feat = Linear::new(&mut ps, &mut rng, "probe.feat", pooled_len, FEATURE_DIM);
        let head = Linear::new(&mut ps, &mut rng, "probe.head", FEATURE_DIM, num_classes);
        ProbeClassifier {
            kind,
            label,
            num_classes,
            frame_size,
            clip_len,
            base_channels,
            label_values,
            held_out_accuracy: 0.0,
            seed,
            trunk,
            feat,
            head,
            params: ps,
        }
    }

    /// RGB plus a luminance plane: silhouettes stay comparable across the
    /// dataset's color schemes.
    fn with_luminance(frame: &[f32], hw: usize) -> Vec<f32> {
        let plane = hw * hw;
        let mut out = Vec::with_capacity((CHANNELS + 1) * plane);
        out.extend_from_slice(frame);
        for p in 0..plane {
            out.push((frame[p] + frame[plane + p] + frame[2 * plane + p]) / 3.0);
        }
        out
    }

    fn input_node(&self, g: &mut Graph<f32>, samples: &[&VideoTensor]) -> Result<Var> {
        let hw = self.frame_size;
        let plane = hw * hw;
        match self.kind {
            ProbeKind::Image2d => {
                let mut pixels = Vec::new();
                for s in samples {
                    if s.height() != hw {
                        return Err(Error::Contract("probe frame size mismatch".into()));
                    }
                    pixels.extend(Self::with_luminance(s.frame(0), hw));
                }
                let data: Vec<f32> = pixels;
                Ok(g.input(crate::autodiff::Tensor::new(
                    vec![samples.len(), CHANNELS + 1, hw, hw],
                    data,
                )))
            }
            ProbeKind::Video3d => {
                // [B, C+1, T, H, W] with the luminance plane appended per frame.
                let t = self.clip_len;
                let mut data = Vec::with_capacity(samples.len() * (CHANNELS + 1) * t * plane);
                for s in samples {
                    if s.num_frames() < t || s.height() != hw {
                        return Err(Error::Contract(
                            "probe clip length or frame size mismatch".into(),
                        ));
                    }
                    let clip = s.clip(0, t);
                    let mut chw = vec![0.0f32; (CHANNELS + 1) * t * plane];
                    for ti in 0..t {
                        let frame = clip.frame(ti);
                        for c in 0..CHANNELS {
                            for p in 0..plane {
                                chw[(c * t + ti) * plane + p] = frame[c * plane + p];
                            }
                        }
                        for p in 0..plane {
                            chw[(CHANNELS * t + ti) * plane + p] =
                                (frame[p] + frame[plane + p] + frame[2 * plane + p]) / 3.0;
                        }
                    }
                    data.extend(chw);
                }
                Ok(g.input(crate::autodiff::Tensor::new(
                    vec![samples.len(), CHANNELS + 1, t, hw, hw],
                    data,
                )))
            }
        }
    }

    /// Penultimate activations (the feature layer): [N, 64] row-major.
    pub fn extract_features(&self, samples: &[&VideoTensor]) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Err(Error::Contract("no samples".into()));
        }
        let mut g = Graph::new();
        let x = self.input_node(&mut g, samples)?;
        let feats = self.features_graph(&mut g, x);
        Ok(g.value(feats).iter().map(|&v| v as f64).collect())
    }

    fn features_graph(&self, g: &mut Graph<f32>, x: Var) -> Var {
        let h = match &self.trunk {
            Trunk::Image(t) => t.apply_spatial_ln(g, &self.params, x),
            Trunk::Video(t) => t.apply_spatial_ln(g, &self.params, x),
        };
        let avg = g.global_avg_pool(h);
        let mx = g.global_max_pool(h);
        let pooled = g.concat_cols(avg, mx);
        let f = self.feat.apply(g, &self.params, pooled);
        g.leaky_relu(f, 0.2)
    }

    fn logits_graph(&self, g: &mut Graph<f32>, x: Var) -> Var {
        let f = self.features_graph(g, x);
        self.head.apply(g, &self.params, f)
    }

    /// Class-conditional probabilities p(y|x): [N, num_classes] row-major.
    pub fn predict_probs(&self, samples: &[&VideoTensor]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let x = self.input_node(&mut g, samples)?;
        let logits = self.logits_graph(&mut g, x);
        let logp = g.log_softmax_rows(logits);
        Ok(g.value(logp).iter().map(|&v| (v as f64).exp()).collect())
    }

    /// Most likely original label value per sample.
    pub fn predict_labels(&self, samples: &[&VideoTensor]) -> Result<Vec<u32>> {
        let probs = self.predict_probs(samples)?;
        let c = self.num_classes;
        Ok(probs
            .chunks_exact(c)
            .map(|row| {
                let mut best = 0usize;
                for j in 1..c {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                self.label_values[best]
            })
            .collect())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut metas = Vec::new();
        for (name, shape, data) in self.params.iter() {
            write_array(dir, name, data)?;
            metas.push(ArrayMeta {
                name: name.to_string(),
                shape: shape.to_vec(),
            });
        }
        let meta = ProbeMeta {
            kind: self.kind,
            label: self.label,
            num_classes: self.num_classes,
            frame_size: self.frame_size,
            clip_len: self.clip_len,
            base_channels: self.base_channels,
            label_values: self.label_values.clone(),
            held_out_accuracy: self.held_out_accuracy,
            seed: self.seed,
            feature_dim: FEATURE_DIM,
            feature_layer: "penultimate".to_string(),
            params: metas,
        };
        std::fs::write(
            dir.join("probe.json"),
            serde_json::to_string_pretty(&meta)? + "\n",
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: ProbeMeta =
            serde_json::from_str(&std::fs::read_to_string(dir.join("probe.json"))?)?;
        let mut probe = ProbeClassifier::build(
            meta.kind,
            meta.label,
            meta.num_classes,
            meta.frame_size,
            meta.clip_len,
            meta.base_channels,
            meta.label_values.clone(),
            meta.seed,
        );
        for am in &meta.params {
            let data = read_array(dir, &am.name, am.shape.iter().product())?;
            probe.params.set_values(&am.name, &data)?;
        }
        probe.held_out_accuracy = meta.held_out_accuracy;
        Ok(probe)
    }
}

/// Train a probe classifier on the labeled synthetic dataset; the held-out
/// accuracy is recorded on the returned probe.
pub fn train_probe(
    dataset: &Dataset,
    kind: ProbeKind,
    label: LabelKind,
    cfg: &ProbeTrainConfig,
    rng: &mut RandomSource,
) -> Result<ProbeClassifier> {
    let (h, _) = dataset.frame_hw();
    let clip_len = dataset
        .entries()
        .iter()
        .filter(|e| e.num_frames() > 1)
        .map(|e| e.num_frames())
        .min()
        .unwrap_or(1);

    // Usable entries: any for the image probe, multi-frame for the video probe.
    let pool: Vec<usize> = match kind {
        ProbeKind::Image2d => (0..dataset.entries().len()).collect(),
        ProbeKind::Video3d => dataset.video_indices(),
    };
    if pool.len() < 4 {
        return Err(Error::Contract("dataset too small to train a probe".into()));
    }
    let label_of = |idx: usize| -> u32 {
        let (ident, action) = dataset.entry(idx).labels().unwrap_or((0, 0));
        match label {
            LabelKind::Identity => ident,
            LabelKind::Action => action,
        }
    };
    let mut values: Vec<u32> = pool.iter().map(|&i| label_of(i)).collect();
    values.sort_unstable();
    values.dedup();
    if values.len() < 2 {
        return Err(Error::Contract(format!(
            "need at least 2 classes, found {}",
            values.len()
        )));
    }
    let class_of = |v: u32| values.iter().position(|&x| x == v).unwrap();

    // Split entries into train/holdout.
    let mut order = pool.clone();
    rng.shuffle(&mut order);
    let holdout_n = ((order.len() as f64 * cfg.holdout_fraction).round() as usize)
        .clamp(1, order.len() - 1);
    let holdout: Vec<usize> = order[..holdout_n].to_vec();
    let train: Vec<usize> = order[holdout_n..].to_vec();

    let seed = rng.next_u64();
    let mut probe = ProbeClassifier::build(
        kind,
        label,
        values.len(),
        h,
        clip_len,
        cfg.base_channels,
        values.clone(),
        seed,
    );
    let mut adam = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..AdamConfig::default()
        },
        &probe.params,
    );

    // Training samples: whole clips for the video probe, single frames for
    // the image probe (a random frame of a random entry each draw). Inputs
    // get Gaussian pixel noise so the labeled factors, not individual
    // samples, carry the gradient signal.
    for _ in 0..cfg.steps {
        let mut batch: Vec<VideoTensor> = Vec::with_capacity(cfg.batch_size);
        let mut targets = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let idx = train[rng.below(train.len() as u64) as usize];
            let entry = dataset.entry(idx);
            let sample = match kind {
                ProbeKind::Image2d => {
                    let t = rng.below(entry.num_frames() as u64) as usize;
                    entry.frame_as_image(t)
                }
                ProbeKind::Video3d => entry.clip(0, clip_len),
            };
            let sample = if cfg.augment_dihedral {
                dihedral_copy(&sample, rng.below(8) as u8)
            } else {
                sample
            };
            let sample = if cfg.augment_shift > 0 {
                let m = cfg.augment_shift as i64;
                let dx = rng.below((2 * m + 1) as u64) as i64 - m;
                let dy = rng.below((2 * m + 1) as u64) as i64 - m;
                shifted_copy(&sample, dx, dy, ())
            } else {
                sample
            };
            batch.push(noisy_copy(&sample, cfg.input_noise, rng));
            targets.push(class_of(label_of(idx)));
        }
        let refs: Vec<&VideoTensor> = batch.iter().collect();
        let mut g = Graph::new();
        let x = probe.input_node(&mut g, &refs)?;
        let logits = probe.logits_graph(&mut g, x);
        let logp = g.log_softmax_rows(logits);
        let loss = g.nll_rows(logp, &targets);
        if !g.scalar_value(loss).is_finite() {
            return Err(Error::Training("non-finite probe loss".into()));
        }
        let grads = g.backward(loss);
        adam.step(&mut probe.params, &grads);
    }

    // Held-out accuracy, over frames (image probe) or clips (video probe).
    let mut correct = 0usize;
    let mut total = 0usize;
    for &idx in &holdout {
        let entry = dataset.entry(idx);
        let samples: Vec<VideoTensor> = match kind {
            ProbeKind::Image2d => (0..entry.num_frames()).map(|t| entry.frame_as_image(t)).collect(),
            ProbeKind::Video3d => vec![entry.clip(0, clip_len)],
        };
        let refs: Vec<&VideoTensor> = samples.iter().collect();
        let preds = probe.predict_labels(&refs)?;
        for p in preds {
            if p == label_of(idx) {
                correct += 1;
            }
            total += 1;
        }
    }
    probe.held_out_accuracy = correct as f64 / total.max(1) as f64;
    Ok(probe)
}

/// One of the 8 square symmetries (4 rotations x optional horizontal flip)
/// as an exact pixel permutation applied to every frame.
fn dihedral_copy(v: &VideoTensor, which: u8) -> VideoTensor {
    if which == 0 {
        return v.clone();
    }
    let h = v.height();
    let w = v.width();
    assert_eq!(h, w, "dihedral augmentation needs square frames");
    let plane = h * w;
    let rot = which % 4;
    let flip = which >= 4;
    let mut out = vec![0.0f32; v.data().len()];
    for t in 0..v.num_frames() {
        let src = v.frame(t);
        let base = t * CHANNELS * plane;
        for c in 0..CHANNELS {
            for y in 0..h {
                for x in 0..w {
                    let (mut sy, mut sx) = match rot {
                        0 => (y, x),
                        1 => (x, h - 1 - y),
                        2 => (h - 1 - y, w - 1 - x),
                        _ => (w - 1 - x, y),
                    };
                    if flip {
                        sx = w - 1 - sx;
                    }
                    out[base + c * plane + y * w + x] = src[c * plane + sy * w + sx];
                }
            }
        }
    }
    VideoTensor::new(out, v.num_frames(), h, w, v.labels())
        .expect("permutation keeps the pixel range")
}

/// Translate every frame by (dx, dy) pixels with clamp-to-edge sampling.
fn shifted_copy(v: &VideoTensor, dx: i64, dy: i64, rng_unused: ()) -> VideoTensor {
    let _ = rng_unused;
    if dx == 0 && dy == 0 {
        return v.clone();
    }
    let (h, w) = (v.height() as i64, v.width() as i64);
    let plane = (h * w) as usize;
    let mut out = vec![0.0f32; v.data().len()];
    for t in 0..v.num_frames() {
        let src = v.frame(t);
        let base = t * CHANNELS * plane;
        for c in 0..CHANNELS {
            for y in 0..h {
                for x in 0..w {
                    let sy = (y - dy).clamp(0, h - 1) as usize;
                    let sx = (x - dx).clamp(0, w - 1) as usize;
                    out[base + c * plane + (y * w + x) as usize] =
                        src[c * plane + sy * w as usize + sx];
                }
            }
        }
    }
    VideoTensor::new(out, v.num_frames(), v.height(), v.width(), v.labels())
        .expect("shift preserves the pixel range")
}

fn noisy_copy(v: &VideoTensor, sigma: f64, rng: &mut RandomSource) -> VideoTensor {
    if sigma <= 0.0 {
        return v.clone();
    }
    let data: Vec<f32> = v
        .data()
        .iter()
        .map(|&x| (x + (rng.normal() * sigma) as f32).clamp(-1.0, 1.0))
        .collect();
    VideoTensor::new(data, v.num_frames(), v.height(), v.width(), v.labels())
        .expect("noisy copy keeps the pixel range by clamping")
}

/// Inception Score of one batch of class-conditional rows: exp of the mean
/// KL(p(y|x) ‖ batch marginal), with a probability floor inside the logs.
pub fn batch_inception_score(conditionals: &[Vec<f64>]) -> Result<f64> {
    if conditionals.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let c = conditionals[0].len();
    if conditionals.iter().any(|r| r.len() != c) {
        return Err(Error::Contract("ragged conditional rows".into()));
    }
    let n = conditionals.len() as f64;
    let mut marginal = vec![0.0; c];
    for row in conditionals {
        for (m, &p) in marginal.iter_mut().zip(row) {
            *m += p / n;
        }
    }
    let mut mean_kl = 0.0;
    for row in conditionals {
        let mut kl = 0.0;
        for (&p, &q) in row.iter().zip(&marginal) {
            let p = p.max(PROB_FLOOR);
            let q = q.max(PROB_FLOOR);
            kl += p * (p.ln() - q.ln());
        }
        mean_kl += kl.max(0.0) / n;
    }
    Ok(mean_kl.exp())
}

/// Inception Score over `num_batches` consecutive batches of `batch_size`
/// images: returns (mean, standard deviation across batches).
pub fn inception_score(
    images: &[&VideoTensor],
    probe: &ProbeClassifier,
    num_batches: usize,
    batch_size: usize,
) -> Result<(f64, f64)> {
    if probe.kind != ProbeKind::Image2d {
        return Err(Error::Contract("inception_score needs an image probe".into()));
    }
    if num_batches == 0 || batch_size == 0 {
        return Err(Error::Contract("need at least one batch".into()));
    }
    if images.len() < num_batches * batch_size {
        return Err(Error::Contract(format!(
            "need {} images, got {}",
            num_batches * batch_size,
            images.len()
        )));
    }
    let c = probe.num_classes;
    let mut scores = Vec::with_capacity(num_batches);
    for b in 0..num_batches {
        let batch = &images[b * batch_size..(b + 1) * batch_size];
        let flat = probe.predict_probs(batch)?;
        let rows: Vec<Vec<f64>> = flat.chunks_exact(c).map(|r| r.to_vec()).collect();
        scores.push(batch_inception_score(&rows)?);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let std = if scores.len() > 1 {
        (scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (scores.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    Ok((mean, std))
}

/// Fréchet distance between Gaussian fits of probe features of two video
/// sets. Degenerate fits (fewer samples than feature dimension + 1) get
/// trace-scaled diagonal shrinkage, with a warning on stderr.
pub fn fvd_analog(
    real: &[&VideoTensor],
    generated: &[&VideoTensor],
    probe: &ProbeClassifier,
) -> Result<f64> {
    if probe.kind != ProbeKind::Video3d {
        return Err(Error::Contract("fvd_analog needs a video probe".into()));
    }
    if real.is_empty() || generated.is_empty() {
        return Err(Error::Contract("both video sets must be nonempty".into()));
    }
    let fit = |videos: &[&VideoTensor], tag: &str| -> Result<FeatureStats> {
        let feats = probe.extract_features(videos)?;
        let n = videos.len();
        let mut stats = FeatureStats::fit(&feats, n, FEATURE_DIM)?;
        if n < FEATURE_DIM + 1 {
            let lambda = 1e-6 * stats.trace() / FEATURE_DIM as f64;
            eprintln!(
                "warning: {tag} set has {n} samples for {FEATURE_DIM}-dim features; \
                 applying diagonal shrinkage lambda = {lambda:.3e}"
            );
            stats.shrink(lambda.max(1e-12));
        }
        Ok(stats)
    };
    let sr = fit(real, "real")?;
    let sg = fit(generated, "generated")?;
    frechet_distance(&sr, &sg)
}

/// Metric report written by the evaluation commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub std: f64,
    pub num_samples: usize,
    pub probe_checkpoint: String,
    pub seed: u64,
    /// Which probe layer supplied features (always the penultimate layer).
    pub feature_layer: String,
    pub feature_dim: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::build_dataset;

    #[test]
    fn uniform_conditionals_give_unit_score() {
        let rows = vec![vec![0.25; 4]; 10];
        let is = batch_inception_score(&rows).unwrap();
        assert!((is - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_hot_balanced_gives_class_count() {
        let c = 5;
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let mut r = vec![0.0; c];
                r[i % c] = 1.0;
                r
            })
            .collect();
        let is = batch_inception_score(&rows).unwrap();
        assert!((is - 5.0).abs() < 1e-6, "IS = {is}");
    }

    #[test]
    fn two_image_hand_case() {
        // Conditionals (0.9, 0.1) and (0.1, 0.9) against marginal (0.5, 0.5):
        // KL = 0.9 ln(0.9/0.5) + 0.1 ln(0.1/0.5) = 0.368064, IS = e^KL.
        let rows = vec![vec![0.9, 0.1], vec![0.1, 0.9]];
        let is = batch_inception_score(&rows).unwrap();
        assert!((is - 1.4450).abs() < 1e-3, "IS = {is}");
        let exact = (0.9f64 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln()).exp();
        assert!((is - exact).abs() < 1e-12);
    }

    #[test]
    fn inception_score_bounds_hold_on_random_rows() {
        let mut rng = RandomSource::new(1);
        for _ in 0..50 {
            let c = 2 + rng.below(6) as usize;
            let n = 2 + rng.below(20) as usize;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let mut r: Vec<f64> = (0..c).map(|_| rng.uniform() + 1e-3).collect();
                    let s: f64 = r.iter().sum();
                    for x in r.iter_mut() {
                        *x /= s;
                    }
                    r
                })
                .collect();
            let is = batch_inception_score(&rows).unwrap();
            assert!(
                (1.0 - 1e-9..=c as f64 + 1e-9).contains(&is),
                "IS {is} outside [1, {c}]"
            );
        }
    }

    fn tiny_dataset(tag: &str) -> (std::path::PathBuf, Dataset) {
        let dir = std::env::temp_dir().join(format!("vidres_metrics_{tag}_{}", std::process::id()));
        std::fs::remove_dir_all(&dir).ok();
        build_dataset(16, 4, 8, 11, &dir).unwrap();
        let ds = Dataset::load(&dir).unwrap();
        (dir, ds)
    }

    #[test]
    fn probe_trains_deterministically_and_round_trips() {
        let (dir, ds) = tiny_dataset("probe");
        let cfg = ProbeTrainConfig {
            steps: 10,
            batch_size: 4,
            ..ProbeTrainConfig::default()
        };
        let mut r1 = RandomSource::new(3);
        let p1 = train_probe(&ds, ProbeKind::Video3d, LabelKind::Action, &cfg, &mut r1).unwrap();
        let mut r2 = RandomSource::new(3);
        let p2 = train_probe(&ds, ProbeKind::Video3d, LabelKind::Action, &cfg, &mut r2).unwrap();
        let refs: Vec<&VideoTensor> = ds.entries().iter().take(3).collect();
        assert_eq!(
            p1.extract_features(&refs).unwrap(),
            p2.extract_features(&refs).unwrap()
        );
        assert_eq!(p1.num_classes, 4);

        // Identical sample twice -> identical feature rows.
        let dup = [refs[0], refs[0]];
        let f = p1.extract_features(&dup).unwrap();
        assert_eq!(&f[..FEATURE_DIM], &f[FEATURE_DIM..]);

        // Save/load round trip preserves behavior.
        let pdir = dir.join("probe_ckpt");
        p1.save(&pdir).unwrap();
        let loaded = ProbeClassifier::load(&pdir).unwrap();
        assert_eq!(
            p1.extract_features(&refs).unwrap(),
            loaded.extract_features(&refs).unwrap()
        );
        assert_eq!(loaded.held_out_accuracy, p1.held_out_accuracy);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn probe_rejects_single_class() {
        let (dir, ds) = tiny_dataset("oneclass");
        // An action probe on a dataset sliced to one action would fail; here
        // simulate by demanding identity labels from image entries only after
        // disintegration of nothing - instead check the error path directly
        // with a dataset of fewer than 2 distinct labels via label override.
        // Simplest: probe on a 3-entry subset is still >= 2 classes, so build
        // a directory with 4 videos all sharing shape/action cell 0.
        std::fs::remove_dir_all(&dir).ok();
        let dir2 = std::env::temp_dir().join(format!("vidres_metrics_single_{}", std::process::id()));
        std::fs::remove_dir_all(&dir2).ok();
        // 4 videos: k % 4 shapes cycle, so take k=0..4 gives 4 shapes; to get
        // one action only, 4 videos all have action (k/4)%4 = 0.
        build_dataset(4, 4, 8, 1, &dir2).unwrap();
        let ds2 = Dataset::load(&dir2).unwrap();
        let cfg = ProbeTrainConfig {
            steps: 1,
            batch_size: 2,
            ..ProbeTrainConfig::default()
        };
        let mut rng = RandomSource::new(0);
        let r = train_probe(&ds2, ProbeKind::Video3d, LabelKind::Action, &cfg, &mut rng);
        assert!(r.is_err(), "4 videos share one action cell and must be rejected");
        let _ = ds;
        std::fs::remove_dir_all(&dir2).ok();
    }

    #[test]
    fn fvd_identity_and_symmetry() {
        let (dir, ds) = tiny_dataset("fvd");
        let cfg = ProbeTrainConfig {
            steps: 20,
            batch_size: 4,
            ..ProbeTrainConfig::default()
        };
        let mut rng = RandomSource::new(7);
        let probe = train_probe(&ds, ProbeKind::Video3d, LabelKind::Action, &cfg, &mut rng).unwrap();
        let all: Vec<&VideoTensor> = ds.entries().iter().collect();
        let d_same = fvd_analog(&all, &all, &probe).unwrap();
        assert!(d_same.abs() <= 1e-4, "identical sets gave {d_same}");
        let (a, b) = all.split_at(8);
        let dab = fvd_analog(a, b, &probe).unwrap();
        let dba = fvd_analog(b, a, &probe).unwrap();
        assert!((dab - dba).abs() < 1e-6);
        assert!(dab >= 0.0);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn probe_kind_mismatch_rejected() {
        let (dir, ds) = tiny_dataset("kind");
        let cfg = ProbeTrainConfig {
            steps: 2,
            batch_size: 2,
            ..ProbeTrainConfig::default()
        };
        let mut rng = RandomSource::new(9);
        let image_probe =
            train_probe(&ds, ProbeKind::Image2d, LabelKind::Identity, &cfg, &mut rng).unwrap();
        let all: Vec<&VideoTensor> = ds.entries().iter().collect();
        assert!(fvd_analog(&all, &all, &image_probe).is_err());
        let frames: Vec<VideoTensor> = ds.entries().iter().map(|v| v.frame_as_image(0)).collect();
        let frame_refs: Vec<&VideoTensor> = frames.iter().collect();
        let video_probe =
            train_probe(&ds, ProbeKind::Video3d, LabelKind::Action, &cfg, &mut rng).unwrap();
        assert!(inception_score(&frame_refs, &video_probe, 1, 4).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
