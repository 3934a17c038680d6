//! The seven full-conditional updates of the data-augmentation sampler.
//!
//! Tempering is applied to the augmented likelihood,
//! `Normal(z | Xβ, σ²)^α ∝ Normal(z | Xβ, σ²/α)`, which keeps every
//! conditional in closed form:
//!
//! 1. `z_i ~ Normal(x_iᵀβ, σ²/α)` truncated to `(-∞, c]` when censored, else `z_i = y_i`
//! 2. `β ~ Normal(μ, Σ)`, `Σ = (αXᵀX/σ² + D⁻¹)⁻¹`, `μ = Σ (α/σ²) Xᵀz`, `D = τ² diag(λ²)`
//! 3. `λ_j² ~ IG(1, 1/ν_j + β_j²/(2τ²))`
//! 4. `ν_j ~ IG(1, 1 + 1/λ_j²)`
//! 5. `τ² ~ IG((p+1)/2, 1/ξ + ½ Σ β_j²/λ_j²)`
//! 6. `ξ ~ IG(1, 1 + 1/τ²)`
//! 7. `σ² ~ IG(a₀ + αn/2, b₀ + (α/2) Σ (z_i - x_iᵀβ)²)`

use std::cell::OnceCell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::HorseshoeState;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, TobitDataset};
use crate::rng_stats::{inverse_gamma, std_normal, truncated_normal, Cholesky, RngStream};

/// Lower clamp for λ², τ², σ² and the prior variances `τ²λ_j²`.
pub const SCALE_FLOOR: f64 = 1e-300;

/// Ratio `p / n` above which the β update switches to the `n × n` solver.
pub const AUXILIARY_SWITCH_RATIO: usize = 2;

/// How the Gaussian β conditional is sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaAlgorithm {
    /// Cholesky factorization of the `p × p` precision.
    Direct,
    /// The `O(n²p)` auxiliary-variable sampler of Bhattacharya, Chakraborty
    /// and Mallick (2016), factorizing an `n × n` system.
    Auxiliary,
}

impl BetaAlgorithm {
    pub fn for_shape(n: usize, p: usize) -> Self {
        if p > AUXILIARY_SWITCH_RATIO * n {
            BetaAlgorithm::Auxiliary
        } else {
            BetaAlgorithm::Direct
        }
    }
}

/// Deliberately wrong conditionals, used only to check that the
/// joint-distribution test detects sampler bugs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// Step 5 with shape `p/2` instead of `(p+1)/2`.
    TauShapeHalfP,
    /// Step 1 truncating censored latents to `[c, ∞)`.
    WrongTruncationSide,
    /// Step 7 with rate `b₀ + α·RSS` (the ½ dropped).
    SigmaRateNoHalf,
}

/// How often a scale hit [`SCALE_FLOOR`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloorWarnings {
    pub lambda2: u64,
    pub tau2: u64,
    pub sigma2: u64,
    pub prior_variance: u64,
}

impl FloorWarnings {
    pub fn total(&self) -> u64 {
        self.lambda2 + self.tau2 + self.sigma2 + self.prior_variance
    }

    pub fn merge(&mut self, other: &FloorWarnings) {
        self.lambda2 += other.lambda2;
        self.tau2 += other.tau2;
        self.sigma2 += other.sigma2;
        self.prior_variance += other.prior_variance;
    }
}

#[inline]
fn floor(value: f64, counter: &mut u64) -> f64 {
    if value < SCALE_FLOOR {
        *counter += 1;
        SCALE_FLOOR
    } else {
        value
    }
}

/// Scale of the ν_j conditional.
#[inline]
pub fn nu_scale(lambda2: f64) -> f64 {
    1.0 + 1.0 / lambda2
}

/// Scale of the ξ conditional.
#[inline]
pub fn xi_scale(tau2: f64) -> f64 {
    1.0 + 1.0 / tau2
}

/// Scale of the λ_j² conditional.
#[inline]
pub fn lambda2_scale(beta_j: f64, nu_j: f64, tau2: f64) -> f64 {
    1.0 / nu_j + beta_j * beta_j / (2.0 * tau2)
}

/// Shape of the τ² conditional.
#[inline]
pub fn tau2_shape(p: usize) -> f64 {
    (p as f64 + 1.0) / 2.0
}

/// Scale of the τ² conditional.
pub fn tau2_scale(beta: &DVector<f64>, lambda2: &DVector<f64>, xi: f64) -> f64 {
    1.0 / xi
        + 0.5
            * beta
                .iter()
                .zip(lambda2.iter())
                .map(|(b, l)| b * b / l)
                .sum::<f64>()
}

/// Shape and scale of the σ² conditional given the residual sum of squares.
pub fn sigma2_params(n: usize, rss: f64, cfg: &ModelConfig) -> (f64, f64) {
    (cfg.a0 + 0.5 * cfg.alpha * n as f64, cfg.b0 + 0.5 * cfg.alpha * rss)
}

/// Full-conditional updates bound to one data set and model configuration.
///
/// `XᵀX` is computed on first use by the direct β sampler and cached.
pub struct GibbsKernel<'a> {
    data: &'a TobitDataset,
    cfg: ModelConfig,
    algorithm: BetaAlgorithm,
    mutation: Option<Mutation>,
    xtx: OnceCell<DMatrix<f64>>,
    warnings: FloorWarnings,
}

impl<'a> GibbsKernel<'a> {
    pub fn new(data: &'a TobitDataset, cfg: ModelConfig) -> Self {
        Self {
            algorithm: BetaAlgorithm::for_shape(data.n(), data.p()),
            data,
            cfg,
            mutation: None,
            xtx: OnceCell::new(),
            warnings: FloorWarnings::default(),
        }
    }

    pub fn with_algorithm(mut self, algorithm: BetaAlgorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_mutation(mut self, mutation: Option<Mutation>) -> Self {
        self.mutation = mutation;
        self
    }

    pub fn algorithm(&self) -> BetaAlgorithm {
        self.algorithm
    }

    pub fn warnings(&self) -> FloorWarnings {
        self.warnings
    }

    pub fn data(&self) -> &TobitDataset {
        self.data
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Initial state: β = 0, all scales 1, σ² = 1 (or its fixed value),
    /// censored latents at `c - 0.5`.
    pub fn initial_state(&self) -> HorseshoeState {
        let p = self.data.p();
        let c = self.data.threshold();
        let z = DVector::from_iterator(
            self.data.n(),
            self.data
                .y()
                .iter()
                .zip(self.data.uncensored())
                .map(|(&y, &d)| if d { y } else { c - 0.5 }),
        );
        HorseshoeState {
            z,
            beta: DVector::zeros(p),
            lambda2: DVector::from_element(p, 1.0),
            nu: DVector::from_element(p, 1.0),
            tau2: 1.0,
            xi: 1.0,
            sigma2: self.cfg.sigma2_fixed.unwrap_or(1.0),
        }
    }

    /// One full sweep, steps 1 through 7 in order.
    pub fn sweep(&mut self, state: &mut HorseshoeState, rng: &mut RngStream) -> Result<()> {
        self.update_latent_z(state, rng);
        self.update_beta(state, rng)?;
        self.update_lambda2(state, rng);
        self.update_nu(state, rng);
        self.update_tau2(state, rng);
        self.update_xi(state, rng);
        self.update_sigma2(state, rng);
        Ok(())
    }

    /// Step 1.
    pub fn update_latent_z(&mut self, state: &mut HorseshoeState, rng: &mut RngStream) {
        let data = self.data;
        let c = data.threshold();
        let sd = (state.sigma2 / self.cfg.alpha).sqrt();
        let mean = data.x() * &state.beta;
        let (lower, upper) = if self.mutation == Some(Mutation::WrongTruncationSide) {
            (c, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, c)
        };
        for (i, &d) in data.uncensored().iter().enumerate() {
            state.z[i] = if d {
                data.y()[i]
            } else {
                truncated_normal(mean[i], sd, lower, upper, rng)
            };
        }
    }

    /// Step 2, using the configured [`BetaAlgorithm`].
    pub fn update_beta(&mut self, state: &mut HorseshoeState, rng: &mut RngStream) -> Result<()> {
        let p = self.data.p();
        let n = self.data.n();
        let mut prior_var = Vec::with_capacity(p);
        for j in 0..p {
            prior_var.push(floor(state.tau2 * state.lambda2[j], &mut self.warnings.prior_variance));
        }
        // Shared randomness: u ~ N(0, D) then δ ~ N(0, I_n). Both algorithms
        // map (u, δ) to the same β, so they agree draw for draw.
        let u: Vec<f64> = prior_var.iter().map(|d| d.sqrt() * std_normal(rng)).collect();
        let delta: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
        let beta = match self.algorithm {
            BetaAlgorithm::Direct => self.beta_direct(state, &prior_var, &u, &delta),
            BetaAlgorithm::Auxiliary => self.beta_auxiliary(state, &prior_var, &u, &delta),
        };
        match beta {
            Ok(b) => {
                state.beta = b;
                Ok(())
            }
            Err(Error::Factorization { pivot, value, .. }) => Err(Error::Factorization {
                pivot,
                value,
                context: format!(
                    " in beta update (tau2 = {:e}, min lambda2 = {:e}, sigma2 = {:e})",
                    state.tau2,
                    state.lambda2.min(),
                    state.sigma2
                ),
            }),
            Err(e) => Err(e),
        }
    }

    /// β = Q⁻¹ (√s Xᵀ(√s z − δ) + D⁻¹u) with Q = s XᵀX + D⁻¹, s = α/σ².
    fn beta_direct(
        &self,
        state: &HorseshoeState,
        prior_var: &[f64],
        u: &[f64],
        delta: &[f64],
    ) -> Result<DVector<f64>> {
        let x = self.data.x();
        let s = self.cfg.alpha / state.sigma2;
        let rs = s.sqrt();
        let xtx = self.xtx.get_or_init(|| x.tr_mul(x));
        let mut q = xtx * s;
        for (j, d) in prior_var.iter().enumerate() {
            q[(j, j)] += 1.0 / d;
        }
        let chol = Cholesky::factor(&q)?;
        let resid = DVector::from_iterator(
            delta.len(),
            state.z.iter().zip(delta).map(|(z, e)| rs * z - e),
        );
        let mut rhs: Vec<f64> = x.tr_mul(&resid).iter().map(|v| rs * v).collect();
        for j in 0..rhs.len() {
            rhs[j] += u[j] / prior_var[j];
        }
        chol.solve_in_place(&mut rhs);
        Ok(DVector::from_vec(rhs))
    }

    /// β = u + D Φᵀ (Φ D Φᵀ + I)⁻¹ (√s z − Φu − δ) with Φ = √s X.
    fn beta_auxiliary(
        &self,
        state: &HorseshoeState,
        prior_var: &[f64],
        u: &[f64],
        delta: &[f64],
    ) -> Result<DVector<f64>> {
        let x = self.data.x();
        let n = x.nrows();
        let s = self.cfg.alpha / state.sigma2;
        let rs = s.sqrt();
        let mut scaled = x.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= prior_var[j].sqrt();
        }
        let mut m = &scaled * scaled.transpose() * s;
        for i in 0..n {
            m[(i, i)] += 1.0;
        }
        let chol = Cholesky::factor(&m)?;
        let u_vec = DVector::from_column_slice(u);
        let xu = x * &u_vec;
        let mut w: Vec<f64> = (0..n)
            .map(|i| rs * state.z[i] - rs * xu[i] - delta[i])
            .collect();
        chol.solve_in_place(&mut w);
        let xtw = x.tr_mul(&DVector::from_vec(w));
        Ok(DVector::from_iterator(
            u.len(),
            (0..u.len()).map(|j| u[j] + prior_var[j] * rs * xtw[j]),
        ))
    }

    /// Step 3.
    pub fn update_lambda2(&mut self, state: &mut HorseshoeState, rng: &mut RngStream) {
        for j in 0..state.beta.len() {
            let scale = lambda2_scale(state.beta[j], state.nu[j], state.tau2);
            state.lambda2[j] = floor(inverse_gamma(1.0, scale, rng), &mut self.warnings.lambda2);
        }
    }

    /// Step 4.
    pub fn update_nu(&mut self, state: &mut HorseshoeState, rng: &mut RngStream) {
        for j in 0..state.nu.len() {
            state.nu[j] = inverse_gamma(1.0, nu_scale(state.lambda2[j]), rng);
        }
    }

    /// Step 5.
    pub fn update_tau2(&mut self, state: &mut HorseshoeState, rng: &mut RngStream) {
        let p = state.beta.len();
        let shape = if self.mutation == Some(Mutation::TauShapeHalfP) {
            p as f64 / 2.0
        } else {
            tau2_shape(p)
        };
        let scale = tau2_scale(&state.beta, &state.lambda2, state.xi);
        state.tau2 = floor(inverse_gamma(shape, scale, rng), &mut self.warnings.tau2);
    }

    /// Step 6.
    pub fn update_xi(&mut self, state: &mut HorseshoeState, rng: &mut RngStream) {
        state.xi = inverse_gamma(1.0, xi_scale(state.tau2), rng);
    }

    /// Step 7; a no-op when σ² is fixed.
    pub fn update_sigma2(&mut self, state: &mut HorseshoeState, rng: &mut RngStream) {
        if let Some(fixed) = self.cfg.sigma2_fixed {
            state.sigma2 = fixed;
            return;
        }
        let fitted = self.data.x() * &state.beta;
        let rss: f64 = state.z.iter().zip(fitted.iter()).map(|(z, f)| (z - f) * (z - f)).sum();
        let (shape, mut scale) = sigma2_params(self.data.n(), rss, &self.cfg);
        if self.mutation == Some(Mutation::SigmaRateNoHalf) {
            scale = self.cfg.b0 + self.cfg.alpha * rss;
        }
        state.sigma2 = floor(inverse_gamma(shape, scale, rng), &mut self.warnings.sigma2);
    }
}

/// Step 1 as a free function.
pub fn update_latent_z(state: &mut HorseshoeState, data: &TobitDataset, cfg: &ModelConfig, rng: &mut RngStream) {
    GibbsKernel::new(data, *cfg).update_latent_z(state, rng)
}

/// Step 2 as a free function; picks the algorithm from the data shape.
pub fn update_beta(
    state: &mut HorseshoeState,
    data: &TobitDataset,
    cfg: &ModelConfig,
    rng: &mut RngStream,
) -> Result<()> {
    GibbsKernel::new(data, *cfg).update_beta(state, rng)
}

/// Step 3 as a free function.
pub fn update_lambda2(state: &mut HorseshoeState, rng: &mut RngStream) {
    for j in 0..state.beta.len() {
        let scale = lambda2_scale(state.beta[j], state.nu[j], state.tau2);
        state.lambda2[j] = inverse_gamma(1.0, scale, rng).max(SCALE_FLOOR);
    }
}

/// Step 4 as a free function.
pub fn update_nu(state: &mut HorseshoeState, rng: &mut RngStream) {
    for j in 0..state.nu.len() {
        state.nu[j] = inverse_gamma(1.0, nu_scale(state.lambda2[j]), rng);
    }
}

/// Step 5 as a free function.
pub fn update_tau2(state: &mut HorseshoeState, rng: &mut RngStream) {
    let scale = tau2_scale(&state.beta, &state.lambda2, state.xi);
    state.tau2 = inverse_gamma(tau2_shape(state.beta.len()), scale, rng).max(SCALE_FLOOR);
}

/// Step 6 as a free function.
pub fn update_xi(state: &mut HorseshoeState, rng: &mut RngStream) {
    state.xi = inverse_gamma(1.0, xi_scale(state.tau2), rng);
}

/// Step 7 as a free function.
pub fn update_sigma2(state: &mut HorseshoeState, data: &TobitDataset, cfg: &ModelConfig, rng: &mut RngStream) {
    GibbsKernel::new(data, *cfg).update_sigma2(state, rng)
}
