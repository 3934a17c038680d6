//! The left-censored (Tobit) data model: data set, log-likelihood, the
//! tempered posterior kernel and censored prediction.
//!
//! The response is `y_i = max(y*_i, c)` with `y*_i ~ Normal(x_iᵀβ, σ²)`.
//! An observation sitting exactly on the threshold counts as censored.
//! No intercept column is added; include a constant column in `X` if one is
//! wanted (it will be shrunk like every other coefficient).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::HorseshoeState;
use crate::rng_stats::{log_cdf, LN_SQRT_2PI};

/// Observed censored-regression data.
#[derive(Clone, Debug)]
pub struct TobitDataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    c: f64,
    uncensored: Vec<bool>,
}

impl TobitDataset {
    /// Validates shapes and finiteness and derives the censoring indicators.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, c: f64) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::domain(format!("data set must have n >= 1 and p >= 1, got {n}x{p}")));
        }
        if y.len() != n {
            return Err(Error::domain(format!("X has {n} rows but y has length {}", y.len())));
        }
        if !c.is_finite() {
            return Err(Error::domain(format!("censoring threshold must be finite, got {c}")));
        }
        if let Some(idx) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "X has a non-finite entry at row {}, column {}",
                idx % n,
                idx / n
            )));
        }
        if let Some(i) = y.iter().position(|&v| !v.is_finite() || v < c) {
            return Err(Error::domain(format!(
                "y[{i}] = {} must be finite and not below the threshold {c}",
                y[i]
            )));
        }
        let uncensored = censoring_indicators(y.as_slice(), c)?;
        Ok(Self { x, y, c, uncensored })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn threshold(&self) -> f64 {
        self.c
    }

    /// `d_i = 1{y_i > c}`.
    pub fn uncensored(&self) -> &[bool] {
        &self.uncensored
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_censored(&self) -> usize {
        self.uncensored.iter().filter(|&&d| !d).count()
    }

    pub fn censored_fraction(&self) -> f64 {
        self.n_censored() as f64 / self.n() as f64
    }
}

/// Tempering exponent and error-variance prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Power applied to the likelihood, in (0, 1].
    pub alpha: f64,
    /// Shape of the Inv-Gamma prior on σ².
    pub a0: f64,
    /// Scale of the Inv-Gamma prior on σ².
    pub b0: f64,
    /// Hold σ² at this value instead of sampling it.
    pub sigma2_fixed: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            alpha: 0.99,
            a0: 1.0,
            b0: 1.0,
            sigma2_fixed: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.a0 > 0.0 && self.a0.is_finite()) || !(self.b0 > 0.0 && self.b0.is_finite()) {
            return Err(Error::Config(format!(
                "a0 and b0 must be positive, got a0={}, b0={}",
                self.a0, self.b0
            )));
        }
        if let Some(s) = self.sigma2_fixed {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("fixed sigma2 must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// `d_i = 1{y_i > c}`; a value equal to the threshold is censored.
pub fn censoring_indicators(y: &[f64], c: f64) -> Result<Vec<bool>> {
    if !c.is_finite() {
        return Err(Error::domain(format!("censoring threshold must be finite, got {c}")));
    }
    y.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.is_finite() {
                Ok(v > c)
            } else {
                Err(Error::domain(format!("y[{i}] is not finite")))
            }
        })
        .collect()
}

fn check_beta(beta: &DVector<f64>, p: usize) -> Result<()> {
    if beta.len() != p {
        return Err(Error::domain(format!("beta has length {} but X has {p} columns", beta.len())));
    }
    Ok(())
}

/// Log-likelihood of the censored-normal model: Gaussian log-densities for
/// uncensored responses, `log Φ((c - x_iᵀβ)/σ)` for censored ones.
pub fn tobit_log_likelihood(beta: &DVector<f64>, sigma2: f64, data: &TobitDataset) -> Result<f64> {
    check_beta(beta, data.p())?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let mean = data.x() * beta;
    let sigma = sigma2.sqrt();
    let log_norm = LN_SQRT_2PI + 0.5 * sigma2.ln();
    let c = data.threshold();
    Ok(data
        .uncensored()
        .iter()
        .zip(data.y().iter().zip(mean.iter()))
        .map(|(&d, (&y, &m))| {
            if d {
                -log_norm - 0.5 * (y - m) * (y - m) / sigma2
            } else {
                log_cdf((c - m) / sigma)
            }
        })
        .sum())
}

/// log of the Inv-Gamma(shape, scale) density at `x`.
pub(crate) fn log_inverse_gamma_density(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - libm::lgamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Log prior density of the full Horseshoe hierarchy plus the σ² prior
/// (omitted when σ² is fixed).
pub fn log_prior(state: &HorseshoeState, cfg: &ModelConfig) -> f64 {
    let mut lp = 0.0;
    for j in 0..state.beta.len() {
        let var = state.tau2 * state.lambda2[j];
        lp += -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * state.beta[j] * state.beta[j] / var;
        lp += log_inverse_gamma_density(state.lambda2[j], 0.5, 1.0 / state.nu[j]);
        lp += log_inverse_gamma_density(state.nu[j], 0.5, 1.0);
    }
    lp += log_inverse_gamma_density(state.tau2, 0.5, 1.0 / state.xi);
    lp += log_inverse_gamma_density(state.xi, 0.5, 1.0);
    if cfg.sigma2_fixed.is_none() {
        lp += log_inverse_gamma_density(state.sigma2, cfg.a0, cfg.b0);
    }
    lp
}

/// `α · log L(β, σ²) + log prior`, the observed-data tempered posterior
/// up to an additive constant. The latent `z` in `state` is ignored.
pub fn fractional_log_posterior_kernel(
    state: &HorseshoeState,
    data: &TobitDataset,
    cfg: &ModelConfig,
) -> Result<f64> {
    let ll = tobit_log_likelihood(&state.beta, state.sigma2, data)?;
    Ok(cfg.alpha * ll + log_prior(state, cfg))
}

/// Observed-data log-likelihood implied by tempering the complete-data
/// likelihood, `∫ Normal(z | x_iᵀβ, σ²)^α dz` over the censored region, as
/// the sampler does. Equals [`tobit_log_likelihood`] times `α` only when
/// `α = 1` or nothing is censored.
pub fn tempered_augmented_log_likelihood(
    beta: &DVector<f64>,
    sigma2: f64,
    data: &TobitDataset,
    alpha: f64,
) -> Result<f64> {
    check_beta(beta, data.p())?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let mean = data.x() * beta;
    let sigma = sigma2.sqrt();
    let c = data.threshold();
    let log_norm = LN_SQRT_2PI + 0.5 * sigma2.ln();
    let censored_const = (1.0 - alpha) * log_norm - 0.5 * alpha.ln();
    Ok(data
        .uncensored()
        .iter()
        .zip(data.y().iter().zip(mean.iter()))
        .map(|(&d, (&y, &m))| {
            if d {
                alpha * (-log_norm - 0.5 * (y - m) * (y - m) / sigma2)
            } else {
                censored_const + log_cdf(alpha.sqrt() * (c - m) / sigma)
            }
        })
        .sum())
}

/// Per-column scale factors for fitting on a rescaled design.
///
/// Columns are divided by their root mean square (no centering: the model
/// has no implicit intercept). All-zero columns keep scale 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnScaling {
    scales: Vec<f64>,
}

impl ColumnScaling {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let scales = x
            .column_iter()
            .map(|col| {
                let rms = (col.norm_squared() / n).sqrt();
                if rms > 0.0 && rms.is_finite() {
                    rms
                } else {
                    1.0
                }
            })
            .collect();
        Self { scales }
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (mut col, s) in out.column_iter_mut().zip(&self.scales) {
            col /= *s;
        }
        out
    }

    /// Maps a coefficient on the scaled design back to the original one.
    pub fn unscale_coefficients(&self, beta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(beta.len(), beta.iter().zip(&self.scales).map(|(b, s)| b / s))
    }
}

/// Censored prediction `max(x_iᵀβ, c)`.
pub fn predict(x_new: &DMatrix<f64>, beta: &DVector<f64>, c: f64) -> Result<DVector<f64>> {
    check_beta(beta, x_new.ncols())?;
    Ok((x_new * beta).map(|m| m.max(c)))
}
