//! Draws from the distributions the Gibbs sweep needs.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::linalg::Cholesky;
use super::normal::{cdf, quantile};
use super::rng::RngStream;
use crate::error::{Error, Result};

/// Standardized bound beyond which the one-sided tail sampler replaces
/// inversion.
const TAIL_SWITCH: f64 = 4.0;

#[inline]
pub(crate) fn std_normal(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw from Normal(mu, sigma²) restricted to `[lower, upper]`.
/// Either bound may be infinite.
pub fn sample_truncated_normal(
    mu: f64,
    sigma: f64,
    lower: f64,
    upper: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be positive and finite, got {sigma}")));
    }
    if !mu.is_finite() {
        return Err(Error::domain(format!("mu must be finite, got {mu}")));
    }
    if lower.is_nan() || upper.is_nan() || !(lower < upper) {
        return Err(Error::domain(format!(
            "truncation bounds must satisfy lower < upper, got [{lower}, {upper}]"
        )));
    }
    Ok(truncated_normal(mu, sigma, lower, upper, rng))
}

/// Unchecked variant used inside the sampler.
#[inline]
pub(crate) fn truncated_normal(mu: f64, sigma: f64, lower: f64, upper: f64, rng: &mut RngStream) -> f64 {
    let a = (lower - mu) / sigma;
    let b = (upper - mu) / sigma;
    let x = standard_truncated(a, b, rng);
    (mu + sigma * x).clamp(lower, upper)
}

/// Standard normal restricted to `[a, b]`.
fn standard_truncated(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    if a >= TAIL_SWITCH {
        right_tail(a, b, rng)
    } else if b <= -TAIL_SWITCH {
        -right_tail(-b, -a, rng)
    } else if a > 0.0 {
        // invert on the mirrored interval so both CDF values stay below 1/2
        -inverse_cdf(-b, -a, rng)
    } else {
        inverse_cdf(a, b, rng)
    }
}

fn inverse_cdf(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    let pa = if a == f64::NEG_INFINITY { 0.0 } else { cdf(a) };
    let pb = if b == f64::INFINITY { 1.0 } else { cdf(b) };
    loop {
        let p = pa + (pb - pa) * rng.uniform_open();
        if p > 0.0 && p < 1.0 {
            return quantile(p).clamp(a, b);
        }
    }
}

/// Standard normal on `[a, b]` with `a` far in the right tail: uniform
/// proposal for narrow intervals, otherwise the optimal translated
/// exponential proposal (Robert, 1995).
fn right_tail(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    if b.is_finite() && 0.5 * (b * b - a * a) < 1.0 {
        loop {
            let z = a + (b - a) * rng.uniform_open();
            if rng.uniform_open().ln() <= -0.5 * (z * z - a * a) {
                return z;
            }
        }
    }
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a - rng.uniform_open().ln() / rate;
        if z > b {
            continue;
        }
        let d = z - rate;
        if rng.uniform_open().ln() <= -0.5 * d * d {
            return z;
        }
    }
}

/// Draw from the inverse-gamma law with density ∝ x^(-shape-1) exp(-scale/x).
pub fn sample_inverse_gamma(shape: f64, scale: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::domain(format!(
            "inverse-gamma parameters must be positive and finite, got shape={shape}, scale={scale}"
        )));
    }
    Ok(inverse_gamma(shape, scale, rng))
}

#[inline]
pub(crate) fn inverse_gamma(shape: f64, scale: f64, rng: &mut RngStream) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0)
        .expect("validated gamma shape")
        .sample(rng);
    (scale / g).min(f64::MAX)
}

/// Draw from Normal(mean, covariance) through the Cholesky factor of the
/// covariance.
pub fn sample_gaussian_vector(
    mean: &DVector<f64>,
    covariance: &DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
        return Err(Error::domain(format!(
            "covariance is {}x{} but mean has length {}",
            covariance.nrows(),
            covariance.ncols(),
            mean.len()
        )));
    }
    let chol = Cholesky::factor(covariance)?;
    let noise: Vec<f64> = (0..mean.len()).map(|_| std_normal(rng)).collect();
    let shift = chol.mul_lower(&noise);
    Ok(DVector::from_iterator(
        mean.len(),
        mean.iter().zip(shift).map(|(m, s)| m + s),
    ))
}
