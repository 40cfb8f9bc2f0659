//! Fréchet distance between Gaussian fits of feature distributions.
//!
//! The matrix square root goes through an eigendecomposition of the
//! symmetrized product C_b^{1/2} C_a C_b^{1/2}; eigenvalues below -1e-6 are
//! treated as a genuine PSD violation, anything in (-1e-6, 0) is rounded up
//! to zero.

use crate::error::{Error, Result};

/// Threshold separating numerical noise from a real PSD violation.
const PSD_TOLERANCE: f64 = 1e-6;

/// Symmetry tolerance for covariance inputs.
const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Gaussian fit of a feature sample: mean, covariance, sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    mean: Vec<f64>,
    cov: Vec<f64>,
    count: usize,
}

impl FeatureStats {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>, count: usize) -> Result<Self> {
        let f = mean.len();
        if cov.len() != f * f {
            return Err(Error::Contract(format!(
                "covariance must be {f}x{f}, got {} entries",
                cov.len()
            )));
        }
        if count < 2 {
            return Err(Error::Contract(format!("count must be >= 2, got {count}")));
        }
        for i in 0..f {
            for j in (i + 1)..f {
                if (cov[i * f + j] - cov[j * f + i]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::Contract(format!(
                        "covariance asymmetric at ({i},{j}): {} vs {}",
                        cov[i * f + j],
                        cov[j * f + i]
                    )));
                }
            }
        }
        Ok(FeatureStats { mean, cov, count })
    }

    /// Fit mean and unbiased covariance from an N×f row-major sample matrix.
    pub fn fit(rows: &[f64], n: usize, f: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Contract(format!("need >= 2 samples, got {n}")));
        }
        if rows.len() != n * f {
            return Err(Error::Contract("sample matrix size mismatch".into()));
        }
        let mut mean = vec![0.0; f];
        for i in 0..n {
            for j in 0..f {
                mean[j] += rows[i * f + j];
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut cov = vec![0.0; f * f];
        for i in 0..n {
            for j in 0..f {
                let dj = rows[i * f + j] - mean[j];
                for k in j..f {
                    cov[j * f + k] += dj * (rows[i * f + k] - mean[k]);
                }
            }
        }
        let denom = (n - 1) as f64;
        for j in 0..f {
            for k in j..f {
                let v = cov[j * f + k] / denom;
                cov[j * f + k] = v;
                cov[k * f + j] = v;
            }
        }
        FeatureStats::new(mean, cov, n)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Add lambda·I to the covariance (shrinkage for degenerate fits).
    pub fn shrink(&mut self, lambda: f64) {
        let f = self.dim();
        for i in 0..f {
            self.cov[i * f + i] += lambda;
        }
    }

    pub fn trace(&self) -> f64 {
        let f = self.dim();
        (0..f).map(|i| self.cov[i * f + i]).sum()
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns (eigenvalues, V) with V row-major and column j holding the
/// eigenvector for eigenvalue j, so A = V diag(λ) Vᵀ.
pub fn sym_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m
        .iter()
        .fold(0.0_f64, |acc, &x| acc.max(x.abs()))
        .max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= 1e-14 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| m[i * n + i]).collect();
    (eig, v)
}

/// Symmetric PSD square root via eigendecomposition; eigenvalues below
/// -[`PSD_TOLERANCE`] are an error, small negatives clamp to zero.
pub fn sqrtm_psd(a: &[f64], n: usize, label: &str) -> Result<Vec<f64>> {
    let (eig, v) = sym_eigen(a, n);
    let mut sq = vec![0.0; n];
    for (i, &l) in eig.iter().enumerate() {
        if l < -PSD_TOLERANCE {
            return Err(Error::Numerical(format!(
                "{label} is not positive semidefinite: eigenvalue {l} below -{PSD_TOLERANCE}"
            )));
        }
        sq[i] = l.max(0.0).sqrt();
    }
    // V diag(sqrt λ) Vᵀ
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += v[i * n + k] * sq[k] * v[j * n + k];
            }
            out[i * n + j] = acc;
            out[j * n + i] = acc;
        }
    }
    Ok(out)
}

fn matmul_sq(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut y = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let av = a[i * n + k];
            for j in 0..n {
                y[i * n + j] += av * b[k * n + j];
            }
        }
    }
    y
}

/// Fréchet distance between two Gaussian fits:
/// ‖m_a - m_b‖² + Tr(C_a + C_b - 2·(C_a C_b)^{1/2}).
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Contract(format!(
            "feature dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let f = a.dim();
    let mut mean_sq = 0.0;
    for i in 0..f {
        let d = a.mean[i] - b.mean[i];
        mean_sq += d * d;
    }
    let sb = sqrtm_psd(&b.cov, f, "covariance b")?;
    // M = C_b^{1/2} C_a C_b^{1/2}, symmetrized against rounding.
    let mut m = matmul_sq(&matmul_sq(&sb, &a.cov, f), &sb, f);
    for i in 0..f {
        for j in (i + 1)..f {
            let s = 0.5 * (m[i * f + j] + m[j * f + i]);
            m[i * f + j] = s;
            m[j * f + i] = s;
        }
    }
    let (eig, _) = sym_eigen(&m, f);
    let mut tr_sqrt = 0.0;
    for &l in &eig {
        if l < -PSD_TOLERANCE {
            return Err(Error::Numerical(format!(
                "product matrix not PSD: eigenvalue {l} below -{PSD_TOLERANCE} \
                 (covariance a is likely not PSD)"
            )));
        }
        tr_sqrt += l.max(0.0).sqrt();
    }
    let dist = mean_sq + a.trace() + b.trace() - 2.0 * tr_sqrt;
    // Exact-zero distances come out as tiny negatives; clamp.
    Ok(dist.max(0.0))
}
