//! Shared fixtures and oracles for the acceptance suite.
//!
//! The Fréchet oracle deliberately goes through nalgebra's eigensolver and the
//! opposite symmetrization (C_a^{1/2} C_b C_a^{1/2}) so that the production
//! path (hand-rolled Jacobi on C_b^{1/2} C_a C_b^{1/2}) is checked by an
//! independent route.

#![allow(dead_code)]

use nalgebra::DMatrix;

use vidres::config::{ModelConfig, ModelKind};
use vidres::math::{DiagonalGaussian, FeatureStats};
use vidres::rng::RandomSource;
use vidres::synth::{VideoTensor, CHANNELS};

pub fn random_gaussian(d: usize, rng: &mut RandomSource) -> DiagonalGaussian {
    let mean: Vec<f64> = (0..d).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
    let log_var: Vec<f64> = (0..d).map(|_| rng.uniform_in(-1.5, 1.5)).collect();
    DiagonalGaussian::new(mean, log_var).unwrap()
}

/// Random PSD covariance built as A·Aᵀ + eps·I from a random square factor.
pub fn random_feature_stats(d: usize, rng: &mut RandomSource) -> FeatureStats {
    let a: Vec<f64> = (0..d * d).map(|_| rng.normal() * 0.7).collect();
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += a[i * d + k] * a[j * d + k];
            }
            cov[i * d + j] = acc;
        }
    }
    for i in 0..d {
        cov[i * d + i] += 0.05;
    }
    let mean: Vec<f64> = (0..d).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    FeatureStats::new(mean, cov, 64).unwrap()
}

fn sqrtm_nalgebra(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Brute-force Fréchet distance via nalgebra eigendecompositions,
/// symmetrized around covariance a instead of covariance b.
pub fn frechet_oracle_nalgebra(a: &FeatureStats, b: &FeatureStats) -> f64 {
    let d = a.dim();
    let ca = DMatrix::from_row_slice(d, d, a.cov());
    let cb = DMatrix::from_row_slice(d, d, b.cov());
    let sa = sqrtm_nalgebra(&ca);
    let inner = &sa * &cb * &sa;
    let sym = (&inner + inner.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let tr_sqrt: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    let mean_sq: f64 = a
        .mean()
        .iter()
        .zip(b.mean())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let tr_a: f64 = (0..d).map(|i| a.cov()[i * d + i]).sum();
    let tr_b: f64 = (0..d).map(|i| b.cov()[i * d + i]).sum();
    (mean_sq + tr_a + tr_b - 2.0 * tr_sqrt).max(0.0)
}

/// The reduced double-precision RJVAE used by the gradient and MC criteria:
/// 8x8 frames, d_z = 4, T = 3.
pub fn reduced_rjvae_config() -> ModelConfig {
    let mut cfg = ModelConfig::desk(ModelKind::Rjvae);
    cfg.d_z = 4;
    cfg.d_eps = 4;
    cfg.frame_size = 8;
    cfg.t_frames = 3;
    cfg.clip_len = 3;
    cfg.base_channels = 4;
    cfg.recurrent_hidden = 8;
    cfg.batch_size = 2;
    cfg
}

pub fn random_unit_video(frame_size: usize, t: usize, seed: u64) -> VideoTensor {
    let mut rng = RandomSource::new(seed);
    let n = t * CHANNELS * frame_size * frame_size;
    let data: Vec<f32> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0) as f32).collect();
    VideoTensor::new(data, t, frame_size, frame_size, None).unwrap()
}

pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

use std::path::PathBuf;
use std::sync::OnceLock;

use vidres::rjvae::Rjvae;
use vidres::synth::{build_dataset, Dataset};

pub fn fixture_tmp(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("vidres_acc_{tag}_{}", std::process::id()));
    std::fs::remove_dir_all(&d).ok();
    std::fs::create_dir_all(&d).unwrap();
    d
}

/// 64 toy videos, 8 frames, 16x16: the dataset the training criteria share.
pub fn fixture_dataset_16() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| {
        let dir = std::env::temp_dir().join(format!("vidres_acc_ds16_{}", std::process::id()));
        std::fs::remove_dir_all(&dir).ok();
        build_dataset(64, 8, 16, 7, &dir).unwrap();
        Dataset::load(&dir).unwrap()
    })
}

/// 64 toy videos at 32x32: the dataset the probe-based criteria share.
pub fn fixture_dataset_32() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| {
        let dir = std::env::temp_dir().join(format!("vidres_acc_ds32_{}", std::process::id()));
        std::fs::remove_dir_all(&dir).ok();
        build_dataset(64, 8, 32, 7, &dir).unwrap();
        Dataset::load(&dir).unwrap()
    })
}

/// Mean squared error of posterior-mean reconstructions: an implementation-
/// independent probe of reconstruction quality built from public single-step
/// operations.
pub fn reconstruction_mse(model: &Rjvae<f32>, videos: &[&VideoTensor]) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for v in videos {
        let mu = model.infer_mu(v).unwrap();
        for t in 0..v.num_frames() {
            let d = model.infer_delta(mu.mean(), v.frame(t)).unwrap();
            let z: Vec<f64> = mu.mean().iter().zip(d.mean()).map(|(a, b)| a + b).collect();
            let decoded = model.decode_frame(&z).unwrap();
            for (a, b) in v.frame(t).iter().zip(&decoded) {
                let diff = (a - b) as f64;
                total += diff * diff;
                count += 1.0;
            }
        }
    }
    total / count
}
