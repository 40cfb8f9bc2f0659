//! Residual-vector generative models for joint image and video generation.
//!
//! A video is generated hierarchically: a summary vector drawn once from a
//! fixed isotropic Gaussian encodes what is shared across frames, and a
//! recurrent network emits per-frame residual vectors that interpolate around
//! it in image latent space (`z

//! (t) = mu + delta(t)`). The crate provides
//! the VAE and GAN instantiations of that idea, a MoCoGAN variant with
//! residual content codes, a procedural sprite video dataset, probe-based
//! Fréchet/Inception evaluation metrics, and an experiment harness exposed
//! both as a library and as the `vidres` CLI.
//!
//! Start with the runnable examples (`cargo run --example ...`) or the
//! `vidres` binary.

pub mod arch;
pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod rjgan;
pub mod rjvae;
pub mod rmocogan;
pub mod synth;
pub mod error;
pub mod harness;
pub mod math;
pub mod metrics;
pub mod rng;

pub use error::{Error, Result};
pub use rng::RandomSource;
