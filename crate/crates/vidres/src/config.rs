//! Model/run configuration with desk-scale defaults and the paper-scale preset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Rjvae,
    Rjgan,
    /// First/zeroth-frame chain ablation: z(t) = z(t-1) + delta(t).
    RjganChain,
    Rmocogan,
    /// Image-only GAN with the same G_I/D_I architecture, for benchmarking.
    BaselineImage,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Rjvae,
        ModelKind::Rjgan,
        ModelKind::RjganChain,
        ModelKind::Rmocogan,
        ModelKind::BaselineImage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rjvae => "rjvae",
            ModelKind::Rjgan => "rjgan",
            ModelKind::RjganChain => "rjgan-chain",
            ModelKind::Rmocogan => "rmocogan",
            ModelKind::BaselineImage => "baseline-image",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ModelKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }

    pub fn is_gan(self) -> bool {
        !matches!(self, ModelKind::Rjvae)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
}

/// Full model/run configuration. JSON files use exactly these keys; CLI flags
/// override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: ModelKind,
    /// Frame-level latent dimension (GAN noise dimension d_eps tracks it).
    pub d_z: usize,
    /// Content/motion split for the MoCoGAN variant.
    pub d_c: usize,
    pub d_m: usize,
    pub d_eps: usize,
    pub sigma_mu: f64,
    pub sigma_eps: f64,
    pub frame_size: usize,
    pub t_frames: usize,
    pub clip_len: usize,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub iterations: u64,
    pub seed: u64,
    /// Feed G_I(mu) to the image discriminator every this many steps.
    pub summary_term_period: u64,
    /// Count the duplicated real-image term of the objective only once.
    pub eq1_deduplicate: bool,
    /// Width of the first conv layer; deeper layers double it.
    pub base_channels: usize,
    pub recurrent_hidden: usize,
    /// Hidden width of the residual-content MLP (MoCoGAN variant).
    pub mlp_hidden: usize,
}

impl ModelConfig {
    /// Desk-scale defaults: small enough for CPU minutes, structurally
    /// faithful otherwise.
    pub fn desk(model: ModelKind) -> Self {
        let gan_opt = OptimizerConfig {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            weight_decay: 1e-5,
        };
        let vae_opt = OptimizerConfig {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.0,
        };
        match model {
            ModelKind::Rjvae => ModelConfig {
                model,
                d_z: 64,
                d_c: 24,
                d_m: 8,
                d_eps: 64,
                sigma_mu: 1.0,
                sigma_eps: 1.0,
                frame_size: 32,
                t_frames: 8,
                clip_len: 8,
                optimizer: vae_opt,
                batch_size: 8,
                iterations: 500,
                seed: 0,
                summary_term_period: 1,
                eq1_deduplicate: false,
                base_channels: 16,
                recurrent_hidden: 128,
                mlp_hidden: 32,
            },
            _ => ModelConfig {
                model,
                d_z: 32,
                d_c: 24,
                d_m: 8,
                d_eps: if model == ModelKind::Rmocogan { 8 } else { 32 },
                sigma_mu: 1.0,
                sigma_eps: 1.0,
                frame_size: 32,
                t_frames: 8,
                clip_len: 8,
                optimizer: gan_opt,
                batch_size: 8,
                iterations: 300,
                seed: 0,
                summary_term_period: 1,
                eq1_deduplicate: false,
                base_channels: 16,
                recurrent_hidden: 128,
                mlp_hidden: 32,
            },
        }
    }

    /// Paper-scale preset: dimension 60 (64 for the VAE), learning rates
    /// 0.0002 / 0.0005, betas (0.5, 0.999) / (0.9, 0.999), weight decay
    /// 1e-5 / 0, batch 32 / 128, 64x64 frames.
    pub fn paper(model: ModelKind) -> Self {
        let mut cfg = ModelConfig::desk(model);
        cfg.frame_size = 64;
        cfg.base_channels = 64;
        cfg.iterations = 100_000;
        match model {
            ModelKind::Rjvae => {
                cfg.d_z = 64;
                cfg.d_eps = 64;
                cfg.batch_size = 128;
                cfg.optimizer = OptimizerConfig {
                    lr: 5e-4,
                    beta1: 0.9,
                    beta2: 0.999,
                    weight_decay: 0.0,
                };
            }
            ModelKind::Rmocogan => {
                cfg.d_c = 50;
                cfg.d_m = 10;
                cfg.d_eps = 10;
                cfg.mlp_hidden = 50;
                cfg.d_z = 60;
                cfg.batch_size = 32;
                cfg.optimizer = OptimizerConfig {
                    lr: 2e-4,
                    beta1: 0.5,
                    beta2: 0.999,
                    weight_decay: 1e-5,
                };
            }
            _ => {
                cfg.d_z = 60;
                cfg.d_eps = 60;
                cfg.batch_size = 32;
                cfg.optimizer = OptimizerConfig {
                    lr: 2e-4,
                    beta1: 0.5,
                    beta2: 0.999,
                    weight_decay: 1e-5,
                };
            }
        }
        cfg
    }

    /// Latent dimension fed to the image generator.
    pub fn decoder_input_dim(&self) -> usize {
        match self.model {
            ModelKind::Rmocogan => self.d_c + self.d_m,
            _ => self.d_z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.d_z == 0 || self.d_c == 0 || self.d_m == 0 || self.d_eps == 0 {
            return err("latent dimensions must be positive".into());
        }
        if !self.frame_size.is_power_of_two() || self.frame_size < 8 {
            return err(format!(
                "frame_size must be a power of two >= 8, got {}",
                self.frame_size
            ));
        }
        if self.t_frames == 0 {
            return err("t_frames must be >= 1".into());
        }
        if self.clip_len == 0 || self.clip_len > self.t_frames {
            return err(format!(
                "clip_len must lie in [1, t_frames]: {} vs {}",
                self.clip_len, self.t_frames
            ));
        }
        if self.batch_size == 0 {
            return err("batch_size must be >= 1".into());
        }
        if !(self.sigma_mu > 0.0) || !(self.sigma_eps > 0.0) {
            return err("sigma_mu and sigma_eps must be positive".into());
        }
        if self.summary_term_period == 0 {
            return err("summary_term_period must be >= 1".into());
        }
        if self.base_channels == 0 || self.recurrent_hidden == 0 || self.mlp_hidden == 0 {
            return err("network widths must be positive".into());
        }
        if self.model == ModelKind::Rmocogan && self.d_z != self.d_c + self.d_m {
            return err(format!(
                "for the MoCoGAN variant d_z must equal d_c + d_m ({} vs {} + {})",
                self.d_z, self.d_c, self.d_m
            ));
        }
        if !(self.optimizer.lr > 0.0) {
            return err("learning rate must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_preset_matches_published_hyperparameters() {
        let gan = ModelConfig::paper(ModelKind::Rjgan);
        assert_eq!(gan.d_z, 60);
        assert_eq!(gan.d_eps, 60);
        assert_eq!(gan.optimizer.lr, 2e-4);
        assert_eq!((gan.optimizer.beta1, gan.optimizer.beta2), (0.5, 0.999));
        assert_eq!(gan.optimizer.weight_decay, 1e-5);
        assert_eq!(gan.batch_size, 32);
        assert_eq!((gan.sigma_mu, gan.sigma_eps), (1.0, 1.0));

        let vae = ModelConfig::paper(ModelKind::Rjvae);
        assert_eq!(vae.d_z, 64);
        assert_eq!(vae.optimizer.lr, 5e-4);
        assert_eq!((vae.optimizer.beta1, vae.optimizer.beta2), (0.9, 0.999));
        assert_eq!(vae.optimizer.weight_decay, 0.0);
        assert_eq!(vae.batch_size, 128);

        let moco = ModelConfig::paper(ModelKind::Rmocogan);
        assert_eq!((moco.d_c, moco.d_m), (50, 10));
        assert_eq!(moco.mlp_hidden, 50);
        assert_eq!(moco.d_c + moco.d_m, 60);
    }

    #[test]
    fn desk_defaults_validate() {
        for kind in ModelKind::ALL {
            ModelConfig::desk(kind).validate().unwrap();
            ModelConfig::paper(kind).validate().unwrap();
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = ModelConfig::desk(ModelKind::Rjgan);
        cfg.frame_size = 24;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::desk(ModelKind::Rjgan);
        cfg.clip_len = 99;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::desk(ModelKind::Rmocogan);
        cfg.d_z = 31;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn model_kind_round_trips_names() {
        for kind in ModelKind::ALL {
            assert_eq!(ModelKind::parse(kind.name()).unwrap(), kind);
        }
        assert!(ModelKind::parse("nope").is_err());
    }
}
