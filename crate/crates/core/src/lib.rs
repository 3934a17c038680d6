//! Sparse Bayesian Tobit regression with a Horseshoe prior.
//!
//! The response is observed as `y = max(y*, c)` for a latent linear response
//! `y* = Xβ + ε`. Coefficients get a Horseshoe prior written as a chain of
//! inverse-gamma variables, and the likelihood may be tempered by a power
//! `α ∈ (0, 1]`. Posterior draws come from a data-augmentation Gibbs sampler
//! ([`gibbs::run_chain`]).
//!
//! Modules:
//! - [`rng_stats`]: seeded streams and distribution primitives
//! - [`model`]: the censored data set, likelihood and prediction
//! - [`gibbs`]: the sampler and posterior summaries
//! - [`diagnostics`]: autocorrelation, ESS, trace export, joint-distribution tests
//! - [`simulation`]: synthetic scenarios and error metrics
//! - [`cli`]: the `tobit-hs` command-line surface

pub mod error;
pub mod rng_stats;

pub mod cli;
pub mod diagnostics;
pub mod gibbs;
pub mod model;
pub mod simulation;

pub use error::{Error, Result};
