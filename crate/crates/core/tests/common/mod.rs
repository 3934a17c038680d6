//! Full-conditional checks shared by the conditional test suite and the
//! acceptance target. Oracles come from `statrs` and dense `nalgebra`
//! inverses, never from the crate's own samplers or factorizations.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use statrs::function::gamma::gamma_ur;
use tobit_horseshoe::gibbs::{update_lambda2, update_nu, update_tau2, update_xi, BetaAlgorithm, GibbsKernel, HorseshoeState};
use tobit_horseshoe::model::{ModelConfig, TobitDataset};
use tobit_horseshoe::rng_stats::RngStream;

pub const KS_DRAWS: usize = 100_000;
/// Asymptotic Kolmogorov critical value at significance 0.001.
pub fn ks_critical(n: usize) -> f64 {
    (-(0.001f64 / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[derive(Debug)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// CDF of Inv-Gamma(shape, scale): `Q(shape, scale / x)`.
pub fn inverse_gamma_cdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_ur(shape, scale / x)
    }
}

pub fn ks_statistic(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn ks_check(name: String, draws: Vec<f64>, shape: f64, scale: f64) -> Check {
    let n = draws.len();
    let d = ks_statistic(draws, |x| inverse_gamma_cdf(x, shape, scale));
    let crit = ks_critical(n);
    Check {
        pass: d < crit,
        detail: format!("D = {d:.5} (critical {crit:.5}) vs Inv-Gamma({shape}, {scale})"),
        name,
    }
}

pub fn state(beta: &[f64], lambda2: &[f64], nu: &[f64], tau2: f64, xi: f64, sigma2: f64, n: usize) -> HorseshoeState {
    HorseshoeState {
        z: DVector::zeros(n),
        beta: DVector::from_row_slice(beta),
        lambda2: DVector::from_row_slice(lambda2),
        nu: DVector::from_row_slice(nu),
        tau2,
        xi,
        sigma2,
    }
}

/// KS tests for Steps 3–7 at three conditioning points each.
pub fn inverse_gamma_conditionals(seed: u64) -> Vec<Check> {
    let mut rng = RngStream::new(seed);
    let mut out = Vec::new();

    // Step 3: λ_j² ~ IG(1, 1/ν_j + β_j²/(2τ²)).
    for (b, nu, tau2) in [(1.0, 1.0, 1.0), (0.0, 2.0, 1.0), (0.3, 0.5, 0.01)] {
        let scale = 1.0 / nu + b * b / (2.0 * tau2);
        let mut s = state(&[b], &[1.0], &[nu], tau2, 1.0, 1.0, 1);
        let draws = (0..KS_DRAWS)
            .map(|_| {
                update_lambda2(&mut s, &mut rng);
                s.lambda2[0]
            })
            .collect();
        out.push(ks_check(format!("step 3 lambda2 (beta={b}, nu={nu}, tau2={tau2})"), draws, 1.0, scale));
    }

    // Step 4: ν_j ~ IG(1, 1 + 1/λ_j²).
    for l2 in [1.0, 0.1, 50.0] {
        let mut s = state(&[0.0], &[l2], &[1.0], 1.0, 1.0, 1.0, 1);
        let draws = (0..KS_DRAWS)
            .map(|_| {
                update_nu(&mut s, &mut rng);
                s.nu[0]
            })
            .collect();
        out.push(ks_check(format!("step 4 nu (lambda2={l2})"), draws, 1.0, 1.0 + 1.0 / l2));
    }

    // Step 5: τ² ~ IG((p+1)/2, 1/ξ + ½ Σ β_j²/λ_j²).
    let cases: [(Vec<f64>, Vec<f64>, f64); 3] = [
        (vec![1.0, -0.5, 0.0], vec![1.0, 2.0, 0.5], 1.0),
        (vec![0.0], vec![1.0], 0.5),
        ((0..10).map(|j| 0.1 * j as f64).collect(), vec![0.3; 10], 4.0),
    ];
    for (beta, lambda2, xi) in cases {
        let p = beta.len();
        let shape = (p as f64 + 1.0) / 2.0;
        let scale = 1.0 / xi + 0.5 * beta.iter().zip(&lambda2).map(|(b, l)| b * b / l).sum::<f64>();
        let mut s = state(&beta, &lambda2, &vec![1.0; p], 1.0, xi, 1.0, 1);
        let draws = (0..KS_DRAWS)
            .map(|_| {
                update_tau2(&mut s, &mut rng);
                s.tau2
            })
            .collect();
        out.push(ks_check(format!("step 5 tau2 (p={p}, xi={xi})"), draws, shape, scale));
    }

    // Step 6: ξ ~ IG(1, 1 + 1/τ²).
    for tau2 in [1.0, 0.01, 100.0] {
        let mut s = state(&[0.0], &[1.0], &[1.0], tau2, 1.0, 1.0, 1);
        let draws = (0..KS_DRAWS)
            .map(|_| {
                update_xi(&mut s, &mut rng);
                s.xi
            })
            .collect();
        out.push(ks_check(format!("step 6 xi (tau2={tau2})"), draws, 1.0, 1.0 + 1.0 / tau2));
    }

    // Step 7: σ² ~ IG(a₀ + αn/2, b₀ + (α/2) RSS).
    let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0]);
    let beta = [0.5, -0.5];
    let fitted = &x * DVector::from_row_slice(&beta);
    let configs = [
        // Residuals (1, -1, 0, 0): RSS = 2.
        (ModelConfig { alpha: 1.0, a0: 1.0, b0: 1.0, sigma2_fixed: None }, [1.0, -1.0, 0.0, 0.0]),
        (ModelConfig { alpha: 0.99, a0: 2.0, b0: 0.5, sigma2_fixed: None }, [0.3, 2.0, -1.0, 0.1]),
        (ModelConfig { alpha: 0.5, a0: 1.0, b0: 3.0, sigma2_fixed: None }, [0.0; 4]),
    ];
    for (cfg, resid) in configs {
        let z = &fitted + DVector::from_row_slice(&resid);
        let y = z.map(|v: f64| v.max(-100.0));
        let data = TobitDataset::new(x.clone(), y, -100.0).unwrap();
        let rss: f64 = resid.iter().map(|r| r * r).sum();
        let shape = cfg.a0 + cfg.alpha * 4.0 / 2.0;
        let scale = cfg.b0 + cfg.alpha / 2.0 * rss;
        let mut kernel = GibbsKernel::new(&data, cfg);
        let mut s = state(&beta, &[1.0; 2], &[1.0; 2], 1.0, 1.0, 1.0, 4);
        s.z = z;
        let draws = (0..KS_DRAWS)
            .map(|_| {
                kernel.update_sigma2(&mut s, &mut rng);
                s.sigma2
            })
            .collect();
        out.push(ks_check(format!("step 7 sigma2 (alpha={}, RSS={rss})", cfg.alpha), draws, shape, scale));
    }
    out
}

fn mean_and_se(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    // Mean, its SE, variance, and the large-sample SE of the variance.
    (m, (var / n).sqrt(), var, ((m4 - var * var) / n).sqrt())
}

/// Step 1 empirical mean and variance versus truncated-normal closed forms.
pub fn latent_moments(seed: u64) -> Vec<Check> {
    let mut rng = RngStream::new(seed);
    let std = Normal::new(0.0, 1.0).unwrap();
    let mut out = Vec::new();
    for (m, sigma2, alpha, c) in [(0.0, 1.0, 1.0, 0.0), (3.0, 2.0, 0.99, 0.0), (-1.0, 0.5, 1.0, 1.0)] {
        // One censored row with x = 1 and β = m.
        let data = TobitDataset::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, c), c).unwrap();
        let cfg = ModelConfig { alpha, a0: 1.0, b0: 1.0, sigma2_fixed: None };
        let mut kernel = GibbsKernel::new(&data, cfg);
        let mut s = state(&[m], &[1.0], &[1.0], 1.0, 1.0, sigma2, 1);
        let draws: Vec<f64> = (0..KS_DRAWS)
            .map(|_| {
                kernel.update_latent_z(&mut s, &mut rng);
                s.z[0]
            })
            .collect();
        let sd = (sigma2 / alpha).sqrt();
        let b = (c - m) / sd;
        let ratio = std.pdf(b) / std.cdf(b);
        let want_mean = m - sd * ratio;
        let want_var = sd * sd * (1.0 - b * ratio - ratio * ratio);
        let (mean, se_mean, var, se_var) = mean_and_se(&draws);
        let support = draws.iter().all(|&z| z <= c);
        let pass = support && (mean - want_mean).abs() < 5.0 * se_mean && (var - want_var).abs() < 5.0 * se_var;
        out.push(Check {
            name: format!("step 1 latent z (mean {m}, sigma2 {sigma2}, alpha {alpha}, c {c})"),
            pass,
            detail: format!(
                "mean {mean:.5} vs {want_mean:.5} (5 SE = {:.5}); var {var:.5} vs {want_var:.5} (5 SE = {:.5})",
                5.0 * se_mean,
                5.0 * se_var
            ),
        });
    }
    out
}

/// Analytic conditional of β: precision `αXᵀX/σ² + D⁻¹`, mean
/// `Q⁻¹ αXᵀz/σ²`, computed with a dense inverse.
pub fn beta_conditional(x: &DMatrix<f64>, z: &DVector<f64>, d: &[f64], sigma2: f64, alpha: f64) -> (DVector<f64>, DMatrix<f64>) {
    let mut q = x.transpose() * x * (alpha / sigma2);
    for (j, v) in d.iter().enumerate() {
        q[(j, j)] += 1.0 / v;
    }
    let cov = q.try_inverse().expect("invertible precision");
    let mean = &cov * (x.transpose() * z) * (alpha / sigma2);
    (mean, cov)
}

/// Step 2 empirical means and covariances on an (n=5, p=2) instance, for
/// both β algorithms.
pub fn beta_moments(seed: u64) -> Vec<Check> {
    let mut rng = RngStream::new(seed);
    let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.5, -0.3, 1.2, 0.8, -1.0, 2.0, 0.1, -1.5, 0.7]);
    let z = DVector::from_row_slice(&[1.0, 0.4, -0.2, 2.2, -0.9]);
    let (lambda2, tau2, sigma2, alpha) = ([0.8, 2.5], 0.6, 0.7, 0.99);
    let d: Vec<f64> = lambda2.iter().map(|l| l * tau2).collect();
    let (want_mean, want_cov) = beta_conditional(&x, &z, &d, sigma2, alpha);
    let data = TobitDataset::new(x.clone(), z.map(|v| v.max(-50.0)), -50.0).unwrap();
    let cfg = ModelConfig { alpha, a0: 1.0, b0: 1.0, sigma2_fixed: None };
    let mut out = Vec::new();
    for algorithm in [BetaAlgorithm::Direct, BetaAlgorithm::Auxiliary] {
        let mut kernel = GibbsKernel::new(&data, cfg).with_algorithm(algorithm);
        let mut s = state(&[0.0, 0.0], &lambda2, &[1.0; 2], tau2, 1.0, sigma2, 5);
        s.z = z.clone();
        let mut draws = [Vec::with_capacity(KS_DRAWS), Vec::with_capacity(KS_DRAWS)];
        for _ in 0..KS_DRAWS {
            kernel.update_beta(&mut s, &mut rng).unwrap();
            draws[0].push(s.beta[0]);
            draws[1].push(s.beta[1]);
        }
        let mut pass = true;
        let mut detail = Vec::new();
        for j in 0..2 {
            let (m, se, _, _) = mean_and_se(&draws[j]);
            pass &= (m - want_mean[j]).abs() < 5.0 * se;
            detail.push(format!("mean[{j}] {m:.5} vs {:.5}", want_mean[j]));
        }
        for (j, k) in [(0, 0), (1, 1), (0, 1)] {
            let mj = draws[j].iter().sum::<f64>() / KS_DRAWS as f64;
            let mk = draws[k].iter().sum::<f64>() / KS_DRAWS as f64;
            let prods: Vec<f64> = draws[j].iter().zip(&draws[k]).map(|(a, b)| (a - mj) * (b - mk)).collect();
            let (c, se, _, _) = mean_and_se(&prods);
            pass &= (c - want_cov[(j, k)]).abs() < 5.0 * se;
            detail.push(format!("cov[{j}{k}] {c:.5} vs {:.5}", want_cov[(j, k)]));
        }
        out.push(Check {
            name: format!("step 2 beta moments, n=5 p=2 ({algorithm:?})"),
            pass,
            detail: detail.join("; "),
        });
    }
    out
}

/// Steps 1–7 suite as run by the acceptance target.
pub fn conditional_suite(seed: u64) -> Vec<Check> {
    let mut all = inverse_gamma_conditionals(seed);
    all.extend(latent_moments(seed + 1));
    all.extend(beta_moments(seed + 2));
    all
}
