//! Data-augmentation Gibbs sampler for the Horseshoe Tobit posterior and
//! chain management.

mod samples;
mod steps;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, TobitDataset};
use crate::rng_stats::RngStream;

pub use samples::{posterior_summary, CoefficientSummary, PosteriorSamples};
#[cfg(test)]
pub(crate) use samples::from_columns as samples_for_tests;
pub use steps::{
    lambda2_scale, nu_scale, sigma2_params, tau2_scale, tau2_shape, update_beta, update_lambda2,
    update_latent_z, update_nu, update_sigma2, update_tau2, update_xi, xi_scale, BetaAlgorithm,
    FloorWarnings, GibbsKernel, Mutation, AUXILIARY_SWITCH_RATIO, SCALE_FLOOR,
};

/// One full Gibbs state.
#[derive(Clone, Debug, PartialEq)]
pub struct HorseshoeState {
    /// Latent uncensored responses.
    pub z: DVector<f64>,
    pub beta: DVector<f64>,
    /// Local scales λ_j².
    pub lambda2: DVector<f64>,
    /// Auxiliaries of the local scales.
    pub nu: DVector<f64>,
    /// Global scale τ².
    pub tau2: f64,
    /// Auxiliary of the global scale.
    pub xi: f64,
    pub sigma2: f64,
}

impl HorseshoeState {
    /// Checks the support constraints against `data`: latents equal the
    /// response where uncensored and sit at or below `c` where censored,
    /// and every scale is positive and finite.
    pub fn check(&self, data: &TobitDataset) -> Result<()> {
        let c = data.threshold();
        for (i, &d) in data.uncensored().iter().enumerate() {
            let ok = if d { self.z[i] == data.y()[i] } else { self.z[i] <= c };
            if !ok {
                return Err(Error::domain(format!("latent z[{i}] = {} violates its support", self.z[i])));
            }
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !self.lambda2.iter().chain(self.nu.iter()).all(|&v| positive(v))
            || !positive(self.tau2)
            || !positive(self.xi)
            || !positive(self.sigma2)
        {
            return Err(Error::domain("a scale parameter is not positive and finite"));
        }
        if !self.beta.iter().all(|b| b.is_finite()) {
            return Err(Error::domain("beta has a non-finite entry"));
        }
        Ok(())
    }
}

/// Chain length, thinning, model settings and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub model: ModelConfig,
    pub seed: u64,
    /// Keep the λ² draws as well as β, σ² and τ².
    pub store_hyperparams: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_iter: 1200,
            burn_in: 500,
            thin: 1,
            model: ModelConfig::default(),
            seed: 0,
            store_hyperparams: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::Config("n_iter must be positive".into()));
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        self.model.validate()
    }

    /// ⌊(n_iter − burn_in) / thin⌋
    pub fn kept_iterations(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }
}

/// Runs a chain seeded from `cfg.seed`.
pub fn run_chain(data: &TobitDataset, cfg: &ChainConfig) -> Result<PosteriorSamples> {
    let mut rng = RngStream::new(cfg.seed);
    run_chain_with_rng(data, cfg, &mut rng)
}

/// Runs a chain on a caller-supplied stream (e.g. a per-replicate substream).
pub fn run_chain_with_rng(
    data: &TobitDataset,
    cfg: &ChainConfig,
    rng: &mut RngStream,
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let mut kernel = GibbsKernel::new(data, cfg.model);
    let mut state = kernel.initial_state();
    let mut out = samples::Recorder::new(data.p(), cfg);
    for iter in 1..=cfg.n_iter {
        kernel.sweep(&mut state, rng).map_err(|e| Error::Chain {
            iteration: iter,
            source: Box::new(e),
        })?;
        if iter > cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0 {
            out.push(iter, &state);
        }
    }
    Ok(out.finish(kernel.warnings(), kernel.algorithm()))
}
