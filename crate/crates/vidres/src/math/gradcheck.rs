//! Central finite differences, the gradient oracle for all trainable modules.

use crate::error::{Error, Result};

/// Central difference of `loss` along one coordinate of `params`.
/// The loss must be deterministic (freeze any noise before calling).
pub fn central_difference(
    params: &mut [f64],
    index: usize,
    epsilon: f64,
    loss: &mut dyn FnMut(&[f64]) -> Result<f64>,
) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::Contract(format!("epsilon must be positive, got {epsilon}")));
    }
    let x0 = params[index];
    params[index] = x0 + epsilon;
    let lp = loss(params)?;
    params[index] = x0 - epsilon;
    let lm = loss(params)?;
    params[index] = x0;
    if !lp.is_finite() || !lm.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite loss during finite differences: f(+eps)={lp}, f(-eps)={lm}"
        )));
    }
    Ok((lp - lm) / (2.0 * epsilon))
}

/// Central-difference gradient estimate for a selection of coordinates.
pub fn finite_difference_gradient(
    params: &mut [f64],
    indices: &[usize],
    epsilon: f64,
    loss: &mut dyn FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    indices
        .iter()
        .map(|&i| central_difference(params, i, epsilon, loss))
        .collect()
}

/// Relative error used by gradient checks: |a - b| / max(|a|, |b|, floor).
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        // d/dθ (0.5 θ²) at θ = 3 is 3; central differences are exact for
        // quadratics up to rounding.
        let mut p = vec![3.0];
        let g = central_difference(&mut p, 0, 1e-4, &mut |x| Ok(0.5 * x[0] * x[0])).unwrap();
        assert!((g - 3.0).abs() < 1e-8, "g = {g}");
        assert_eq!(p[0], 3.0, "parameter restored");
    }

    #[test]
    fn constant_loss_gives_zero() {
        let mut p = vec![1.0, 2.0];
        let g = finite_difference_gradient(&mut p, &[0, 1], 1e-4, &mut |_| Ok(7.25)).unwrap();
        assert!(g.iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let mut p = vec![-1.0];
        let r = central_difference(&mut p, 0, 1e-4, &mut |x| Ok(x[0].sqrt()));
        assert!(r.is_err());
    }

    #[test]
    fn epsilon_must_be_positive() {
        let mut p = vec![0.0];
        assert!(central_difference(&mut p, 0, 0.0, &mut |_| Ok(0.0)).is_err());
    }
}
