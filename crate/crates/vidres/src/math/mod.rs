//! Distribution primitives and shared numerical utilities.
//!
//! Everything here is double precision: these functions back the oracle and
//! metric paths, where `f32` rounding would swamp the tolerances under test.

mod frechet;
mod gradcheck;

pub use frechet::{frechet_distance, sqrtm_psd, sym_eigen, FeatureStats};
pub use gradcheck::{central_difference, finite_difference_gradient, relative_error};

use crate::error::{Error, Result};
use crate::rng::RandomSource;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Bound on log-variance entries, applied at construction.
pub const LOG_VAR_CLAMP: f64 = 20.0;

/// Diagonal Gaussian N(mean, diag(exp(log_var))).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGaussian {
    mean: Vec<f64>,
    log_var: Vec<f64>,
}

impl DiagonalGaussian {
    /// Build from mean and log-variance; log-variance entries are clamped to
    /// [-20, 20] so downstream `exp` can never overflow.
    pub fn new(mean: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::Contract("DiagonalGaussian needs dimension >= 1".into()));
        }
        if mean.len() != log_var.len() {
            return Err(Error::Contract(format!(
                "mean dimension {} != log_var dimension {}",
                mean.len(),
                log_var.len()
            )));
        }
        if !mean.iter().chain(log_var.iter()).all(|v| v.is_finite()) {
            return Err(Error::Contract("DiagonalGaussian entries must be finite".into()));
        }
        let log_var = log_var
            .into_iter()
            .map(|v| v.clamp(-LOG_VAR_CLAMP, LOG_VAR_CLAMP))
            .collect();
        Ok(DiagonalGaussian { mean, log_var })
    }

    /// Standard normal in d dimensions.
    pub fn standard(d: usize) -> Self {
        DiagonalGaussian {
            mean: vec![0.0; d],
            log_var: vec![0.0; d],
        }
    }

    /// Isotropic N(0, sigma^2 I).
    pub fn isotropic(d: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Contract(format!("isotropic sigma must be positive, got {sigma}")));
        }
        DiagonalGaussian::new(vec![0.0; d], vec![2.0 * sigma.ln(); d])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_var(&self) -> &[f64] {
        &self.log_var
    }

    /// mean + exp(log_var / 2) ⊙ noise. With zero noise this returns the mean
    /// bit-exactly.
    pub fn sample_with_noise(&self, noise: &[f64]) -> Result<Vec<f64>> {
        if noise.len() != self.dim() {
            return Err(Error::Contract(format!(
                "noise dimension {} != distribution dimension {}",
                noise.len(),
                self.dim()
            )));
        }
        Ok(self
            .mean
            .iter()
            .zip(&self.log_var)
            .zip(noise)
            .map(|((&m, &lv), &n)| m + (0.5 * lv).exp() * n)
            .collect())
    }

    pub fn sample(&self, rng: &mut RandomSource) -> Vec<f64> {
        let noise = rng.normal_vec(self.dim());
        self.sample_with_noise(&noise).expect("dimension matches by construction")
    }

    /// Log density at x.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Contract(format!(
                "point dimension {} != distribution dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let mut acc = 0.0;
        for ((&m, &lv), &xi) in self.mean.iter().zip(&self.log_var).zip(x) {
            let d = xi - m;
            acc += -0.5 * (lv + d * d * (-lv).exp() + LN_2PI);
        }
        Ok(acc)
    }
}

/// Closed-form KL(q ‖ p) between diagonal Gaussians, summed over dimensions.
pub fn gaussian_kl(q: &DiagonalGaussian, p: &DiagonalGaussian) -> Result<f64> {
    if q.dim() != p.dim() {
        return Err(Error::Contract(format!(
            "KL dimension mismatch: q has {}, p has {}",
            q.dim(),
            p.dim()
        )));
    }
    let mut acc = 0.0;
    for i in 0..q.dim() {
        let (mq, lq) = (q.mean[i], q.log_var[i]);
        let (mp, lp) = (p.mean[i], p.log_var[i]);
        let d = mq - mp;
        acc += 0.5 * (lp - lq + (lq - lp).exp() + d * d * (-lp).exp() - 1.0);
    }
    Ok(acc)
}

/// Reparameterized sample mean + exp(log_var/2) ⊙ noise as a free function.
pub fn reparam_sample(d: &DiagonalGaussian, noise: &[f64]) -> Result<Vec<f64>> {
    d.sample_with_noise(noise)
}

/// Log density of an isotropic unit-variance Gaussian:
/// -0.5·‖x - mean‖² - (D/2)·ln(2π).
///
/// `unit_variance` is part of the contract; non-unit likelihoods are a
/// non-goal and rejected.
pub fn gaussian_log_density(x: &[f64], mean: &[f64], unit_variance: bool) -> Result<f64> {
    if !unit_variance {
        return Err(Error::Contract(
            "only the unit-variance likelihood is supported".into(),
        ));
    }
    if x.len() != mean.len() {
        return Err(Error::Contract(format!(
            "dimension mismatch: x has {}, mean has {}",
            x.len(),
            mean.len()
        )));
    }
    let mut sq = 0.0;
    for (&xi, &mi) in x.iter().zip(mean) {
        let d = xi - mi;
        sq += d * d;
    }
    Ok(-0.5 * sq - 0.5 * x.len() as f64 * LN_2PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(mean: f64, var: f64) -> DiagonalGaussian {
        DiagonalGaussian::new(vec![mean], vec![var.ln()]).unwrap()
    }

    /// Monte Carlo KL oracle: E_q[log q(x) - log p(x)].
    fn mc_kl(q: &DiagonalGaussian, p: &DiagonalGaussian, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = RandomSource::new(seed);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = q.sample(&mut rng);
            let v = q.log_density(&x).unwrap() - p.log_density(&x).unwrap();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        (mean, (var / n as f64).sqrt())
    }

    #[test]
    fn kl_identity_is_zero() {
        let q = DiagonalGaussian::standard(60);
        assert_eq!(gaussian_kl(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn kl_unit_shift_is_half() {
        // KL(N(1,1) ‖ N(0,1)) = 0.5 in closed form; the Monte Carlo oracle
        // with 10^6 samples agrees well within 3 standard errors.
        let q = g1(1.0, 1.0);
        let p = g1(0.0, 1.0);
        let kl = gaussian_kl(&q, &p).unwrap();
        assert!((kl - 0.5).abs() < 1e-12, "kl = {kl}");
        let (mc, se) = mc_kl(&q, &p, 1_000_000, 11);
        assert!((mc - kl).abs() <= 3.0 * se, "mc {mc} vs kl {kl} (se {se})");
    }

    #[test]
    fn kl_variance_e_case() {
        // KL(N(0,e) ‖ N(0,1)) = (e - 2) / 2 ≈ 0.35914.
        let q = g1(0.0, std::f64::consts::E);
        let p = g1(0.0, 1.0);
        let kl = gaussian_kl(&q, &p).unwrap();
        let expect = 0.5 * (std::f64::consts::E - 2.0);
        assert!((kl - expect).abs() < 1e-12, "kl = {kl}");
        assert!((kl - 0.35914).abs() < 1e-4);
        let (mc, se) = mc_kl(&q, &p, 1_000_000, 12);
        assert!((mc - kl).abs() <= 3.0 * se, "mc {mc} vs kl {kl} (se {se})");
    }

    #[test]
    fn kl_dimension_mismatch_rejected() {
        let q = DiagonalGaussian::standard(2);
        let p = DiagonalGaussian::standard(3);
        assert!(gaussian_kl(&q, &p).is_err());
    }

    #[test]
    fn reparam_zero_noise_returns_mean_bit_exactly() {
        let d = DiagonalGaussian::new(vec![0.3, -1.7, 2.5], vec![0.4, -0.2, 1.3]).unwrap();
        let s = reparam_sample(&d, &[0.0, 0.0, 0.0]).unwrap();
        for (a, b) in s.iter().zip(d.mean()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn reparam_standard_returns_noise() {
        let d = DiagonalGaussian::standard(4);
        let noise = [0.5, -2.0, 0.0, 3.25];
        let s = reparam_sample(&d, &noise).unwrap();
        assert_eq!(s, noise.to_vec());
    }

    #[test]
    fn reparam_empirical_mean_matches() {
        let d = DiagonalGaussian::new(vec![1.0, -2.0], vec![0.8, -0.5]).unwrap();
        let mut rng = RandomSource::new(5);
        let n = 100_000;
        let mut acc = [0.0f64; 2];
        for _ in 0..n {
            let s = d.sample(&mut rng);
            acc[0] += s[0];
            acc[1] += s[1];
        }
        for i in 0..2 {
            let emp = acc[i] / n as f64;
            let sigma = (0.5 * d.log_var()[i]).exp();
            let bound = 4.0 * sigma / (n as f64).sqrt();
            assert!(
                (emp - d.mean()[i]).abs() < bound,
                "coord {i}: {emp} vs {} (bound {bound})",
                d.mean()[i]
            );
        }
    }

    #[test]
    fn log_density_zero_residual() {
        let v = gaussian_log_density(&[1.5], &[1.5], true).unwrap();
        assert!((v - (-0.5 * LN_2PI)).abs() < 1e-12);
        assert!((v - (-0.91894)).abs() < 1e-5);
    }

    #[test]
    fn log_density_hand_case_d2() {
        // x - mean = (1, 0), D = 2 -> -0.5 - ln(2π).
        let v = gaussian_log_density(&[1.0, 0.0], &[0.0, 0.0], true).unwrap();
        assert!((v - (-0.5 - LN_2PI)).abs() < 1e-12);
    }

    #[test]
    fn log_density_monotone_in_residual() {
        let mean = [0.0, 0.0, 0.0];
        let mut prev = f64::INFINITY;
        for r in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let v = gaussian_log_density(&[r, 0.0, 0.0], &mean, true).unwrap();
            assert!(v < prev || r == 0.0);
            prev = v;
        }
    }

    #[test]
    fn log_density_requires_unit_variance_flag() {
        assert!(gaussian_log_density(&[0.0], &[0.0], false).is_err());
    }

    #[test]
    fn log_var_clamped_at_construction() {
        let d = DiagonalGaussian::new(vec![0.0], vec![55.0]).unwrap();
        assert_eq!(d.log_var()[0], LOG_VAR_CLAMP);
        let d = DiagonalGaussian::new(vec![0.0], vec![-55.0]).unwrap();
        assert_eq!(d.log_var()[0], -LOG_VAR_CLAMP);
    }

    #[test]
    fn isotropic_log_var() {
        let d = DiagonalGaussian::isotropic(3, 2.0).unwrap();
        for &lv in d.log_var() {
            assert!((lv - 4.0f64.ln()).abs() < 1e-12);
        }
    }
}
