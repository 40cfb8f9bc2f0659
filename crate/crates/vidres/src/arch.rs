//! Convolutional building blocks shared by the generative models, the
//! discriminators, and the probe classifiers.
//!
//! Spatial extent halves per conv layer between the frame size and a 4x4
//! core, so one architecture family covers 8x8 test frames up to 64x64
//! paper-scale frames. The VAE path uses SiLU so the whole objective stays
//! smooth for finite-difference verification; discriminators use the usual
//! leaky ReLU.

use crate::autodiff::{
    Conv2d, Conv2dSpec, Conv3d, Conv3dSpec, ConvTranspose2d, Graph, Linear, ParamSet, Scalar,
    Tensor, Var,
};
use crate::rng::RandomSource;
use crate::synth::CHANNELS;

/// Activation applied between conv layers.
#[derive(Debug, Clone, Copy)]
pub enum Act {
    Silu,
    LeakyRelu(f64),
}

impl Act {
    fn apply<S: Scalar>(self, g: &mut Graph<S>, x: Var) -> Var {
        match self {
            Act::Silu => g.silu(x),
            Act::LeakyRelu(a) => g.leaky_relu(x, a),
        }
    }
}

fn num_halvings(frame_size: usize) -> usize {
    assert!(frame_size.is_power_of_two() && frame_size >= 8);
    (frame_size / 4).trailing_zeros() as usize
}

fn channel_plan(base: usize, layers: usize) -> Vec<usize> {
    (0..layers).map(|l| base << l.min(3)).collect()
}

/// Maps a latent vector to a frame in [-1, 1]^(3·H·W).
#[derive(Debug, Clone)]
pub struct ImageDecoder {
    fc: Linear,
    deconvs: Vec<ConvTranspose2d>,
    top_channels: usize,
    pub frame_size: usize,
}

impl ImageDecoder {
    pub fn new(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        prefix: &str,
        z_dim: usize,
        frame_size: usize,
        base_channels: usize,
    ) -> Self {
        let ups = num_halvings(frame_size);
        let chans = channel_plan(base_channels, ups);
        let top = *chans.last().unwrap();
        let fc = Linear::new(ps, rng, &format!("{prefix}.fc"), z_dim, top * 16);
        let spec = Conv2dSpec { stride: 2, pad: 1 };
        let mut deconvs = Vec::new();
        for l in 0..ups {
            let cin = chans[ups - 1 - l];
            let cout = if l + 1 == ups { CHANNELS } else { chans[ups - 2 - l] };
            deconvs.push(ConvTranspose2d::new(
                ps,
                rng,
                &format!("{prefix}.deconv{l}"),
                cin,
                cout,
                4,
                spec,
            ));
        }
        ImageDecoder {
            fc,
            deconvs,
            top_channels: top,
            frame_size,
        }
    }

    /// z: [B, z_dim] -> frames [B, 3, H, W].
    pub fn apply<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, z: Var) -> Var {
        let b = g.shape(z)[0];
        let h = self.fc.apply(g, ps, z);
        let h = g.silu(h);
        let mut x = g.reshape(h, vec![b, self.top_channels, 4, 4]);
        let n = self.deconvs.len();
        for (l, dc) in self.deconvs.iter().enumerate() {
            x = dc.apply(g, ps, x);
            if l + 1 < n {
                x = g.silu(x);
            }
        }
        g.tanh(x)
    }
}

/// Conv stack from a frame down to a flat 4x4 core feature vector.
#[derive(Debug, Clone)]
pub struct ImageEncoderTrunk {
    convs: Vec<Conv2d>,
    act: Act,
    pub out_len: usize,
    pub out_channels: usize,
}

impl ImageEncoderTrunk {
    pub fn new(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        prefix: &str,
        frame_size: usize,
        base_channels: usize,
        act: Act,
    ) -> Self {
        Self::with_input_channels(ps, rng, prefix, CHANNELS, frame_size, base_channels, act)
    }

    pub fn with_input_channels(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        prefix: &str,
        in_channels: usize,
        frame_size: usize,
        base_channels: usize,
        act: Act,
    ) -> Self {
        let downs = num_halvings(frame_size);
        let chans = channel_plan(base_channels, downs);
        let spec = Conv2dSpec { stride: 2, pad: 1 };
        let mut convs = Vec::new();
        for (l, &cout) in chans.iter().enumerate() {
            let cin = if l == 0 { in_channels } else { chans[l - 1] };
            convs.push(Conv2d::new(ps, rng, &format!("{prefix}.conv{l}"), cin, cout, 4, spec));
        }
        ImageEncoderTrunk {
            convs,
            act,
            out_len: chans.last().unwrap() * 16,
            out_channels: *chans.last().unwrap(),
        }
    }

    /// x: [B, 3, H, W] -> [B, out_len].
    pub fn apply<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var) -> Var {
        let b = g.shape(x)[0];
        let h = self.apply_spatial(g, ps, x);
        g.reshape(h, vec![b, self.out_len])
    }

    /// Conv output before flattening: [B, C_last, 4, 4].
    pub fn apply_spatial<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var) -> Var {
        let mut h = x;
        for conv in &self.convs {
            h = conv.apply(g, ps, h);
            h = self.act.apply(g, h);
        }
        h
    }

    /// Same stack with per-sample layer normalization between conv and
    /// activation (the probes use this; it keeps every forward pass a pure
    /// per-sample function while stabilizing optimization).
    pub fn apply_spatial_ln<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var) -> Var {
        let mut h = x;
        for conv in &self.convs {
            h = conv.apply(g, ps, h);
            h = g.layer_norm_rows(h, 1e-5);
            h = self.act.apply(g, h);
        }
        h
    }
}

/// Spatio-temporal conv stack from a clip down to a flat feature vector.
/// Spatial dims halve every layer; the temporal dim halves while it lasts.
#[derive(Debug, Clone)]
pub struct VideoEncoderTrunk {
    convs: Vec<Conv3d>,
    act: Act,
    pub out_len: usize,
    pub out_channels: usize,
}

impl VideoEncoderTrunk {
    pub fn new(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        prefix: &str,
        frame_size: usize,
        clip_len: usize,
        base_channels: usize,
        act: Act,
    ) -> Self {
        Self::with_input_channels(ps, rng, prefix, CHANNELS, frame_size, clip_len, base_channels, act)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_input_channels(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        prefix: &str,
        in_channels: usize,
        frame_size: usize,
        clip_len: usize,
        base_channels: usize,
        act: Act,
    ) -> Self {
        let downs = num_halvings(frame_size);
        let chans = channel_plan(base_channels, downs);
        let mut convs = Vec::new();
        let mut t = clip_len;
        for (l, &cout) in chans.iter().enumerate() {
            let cin = if l == 0 { in_channels } else { chans[l - 1] };
            let (kt, st, pt) = if t >= 4 {
                (4, 2, 1)
            } else if t >= 2 {
                (2, 2, 0)
            } else {
                (1, 1, 0)
            };
            let spec = Conv3dSpec {
                stride: [st, 2, 2],
                pad: [pt, 1, 1],
            };
            convs.push(Conv3d::new(
                ps,
                rng,
                &format!("{prefix}.conv{l}"),
                cin,
                cout,
                [kt, 4, 4],
                spec,
            ));
            t = (t + 2 * pt - kt) / st + 1;
        }
        VideoEncoderTrunk {
            convs,
            act,
            out_len: chans.last().unwrap() * t * 16,
            out_channels: *chans.last().unwrap(),
        }
    }

    /// x: [B, 3, T, H, W] -> [B, out_len].
    pub fn apply<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var) -> Var {
        let b = g.shape(x)[0];
        let h = self.apply_spatial(g, ps, x);
        g.reshape(h, vec![b, self.out_len])
    }

    /// Conv output before flattening: [B, C_last, t', 4, 4].
    pub fn apply_spatial<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var) -> Var {
        let mut h = x;
        for conv in &self.convs {
            h = conv.apply(g, ps, h);
            h = self.act.apply(g, h);
        }
        h
    }

    /// Layer-normalized variant used by the probe classifiers.
    pub fn apply_spatial_ln<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var) -> Var {
        let mut h = x;
        for conv in &self.convs {
            h = conv.apply(g, ps, h);
            h = g.layer_norm_rows(h, 1e-5);
            h = self.act.apply(g, h);
        }
        h
    }
}

/// Pack T-major frames (each C×H×W) into a [rows, C, H, W] input tensor.
pub fn frames_input<S: Scalar>(
    g: &mut Graph<S>,
    frames: &[f32],
    rows: usize,
    h: usize,
    w: usize,
) -> Var {
    let data: Vec<S> = frames.iter().map(|&v| S::from_f64(v as f64)).collect();
    g.input(Tensor::new(vec![rows, CHANNELS, h, w], data))
}

/// Pack a T×C×H×W video into a single [1, C, T, H, W] clip input.
pub fn clip_input<S: Scalar>(
    g: &mut Graph<S>,
    frames: &[f32],
    t: usize,
    h: usize,
    w: usize,
) -> Var {
    let plane = CHANNELS * h * w;
    assert_eq!(frames.len(), t * plane);
    let mut data = vec![S::ZERO; frames.len()];
    let hw = h * w;
    for ti in 0..t {
        for c in 0..CHANNELS {
            for p in 0..hw {
                data[(c * t + ti) * hw + p] = S::from_f64(frames[ti * plane + c * hw + p] as f64);
            }
        }
    }
    g.input(Tensor::new(vec![1, CHANNELS, t, h, w], data))
}

/// Transpose a batched frame tensor [B*T, C, H, W] (t-major rows within each
/// video) into clips [B, C, T, H, W] for the video discriminator.
pub fn rows_to_clips<S: Scalar>(g: &mut Graph<S>, rows: Var, batch: usize, t: usize) -> Var {
    let sh = g.shape(rows).to_vec();
    assert_eq!(sh[0], batch * t, "row count must be batch*t");
    let (c, h, w) = (sh[1], sh[2], sh[3]);
    // Row r = ti*batch + b maps to clip b, time ti.
    let mut parts = Vec::with_capacity(batch * t * c);
    let hw = h * w;
    let flat = g.reshape(rows, vec![batch * t * c, hw]);
    for b in 0..batch {
        for ci in 0..c {
            for ti in 0..t {
                let row = (ti * batch + b) * c + ci;
                parts.push(g.slice_rows(flat, row, row + 1));
            }
        }
    }
    let stacked = g.concat_rows(&parts);
    g.reshape(stacked, vec![batch, c, t, h, w])
}


#[cfg(test)]
impl<S: Scalar> Graph<S> {
    fn rows_to_clips_helper(&mut self, rows: Var, batch: usize, t: usize) -> Var {
        rows_to_clips(self, rows, batch, t)
    }
}
