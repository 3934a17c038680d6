use nalgebra::{DMatrix, DVector};
use statrs::distribution::{Continuous, InverseGamma, Normal};
use tobit_horseshoe::diagnostics::{importance_ess_fraction, tempering_log_weights};
use tobit_horseshoe::gibbs::{run_chain, ChainConfig, HorseshoeState};
use tobit_horseshoe::model::{
    fractional_log_posterior_kernel, log_prior, tempered_augmented_log_likelihood, tobit_log_likelihood, ModelConfig,
    TobitDataset,
};
use tobit_horseshoe::rng_stats::{log_std_normal_cdf, RngStream};

/// Composite Simpson rule of `f` over [a, b].
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for k in 1..intervals {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn normal_density(z: f64, m: f64, s2: f64) -> f64 {
    (-(z - m) * (z - m) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt()
}

/// Observed-data log-likelihood with censored terms integrated numerically.
fn quadrature_log_likelihood(x: &[f64], y: &[f64], beta: f64, s2: f64, c: f64, alpha: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let m = xi * beta;
            if yi > c {
                alpha * normal_density(yi, m, s2).ln()
            } else {
                let lo = m.min(c) - 40.0 * s2.sqrt();
                simpson(|z| normal_density(z, m, s2).powf(alpha), lo, c, 200_000).ln()
            }
        })
        .sum()
}

#[test]
fn likelihood_matches_quadrature() {
    let x = [0.7, -1.3];
    for (y, c) in [([1.1, 0.0], 0.0), ([0.2, 0.2], 0.2), ([-0.5, 2.0], -0.5)] {
        let data = TobitDataset::new(DMatrix::from_column_slice(2, 1, &x), DVector::from_row_slice(&y), c).unwrap();
        for (beta, s2) in [(0.5, 1.0), (-1.2, 0.3), (2.0, 2.5)] {
            let b = DVector::from_element(1, beta);
            let ll = tobit_log_likelihood(&b, s2, &data).unwrap();
            let want = quadrature_log_likelihood(&x, &y, beta, s2, c, 1.0);
            assert!((ll - want).abs() < 1e-8, "{ll} vs {want}");
            for alpha in [0.99, 0.5] {
                let aug = tempered_augmented_log_likelihood(&b, s2, &data, alpha).unwrap();
                let want = quadrature_log_likelihood(&x, &y, beta, s2, c, alpha);
                assert!((aug - want).abs() < 1e-8, "alpha {alpha}: {aug} vs {want}");
            }
            let aug1 = tempered_augmented_log_likelihood(&b, s2, &data, 1.0).unwrap();
            assert!((aug1 - ll).abs() < 1e-12);
        }
    }
}

fn sample_state(p: usize) -> HorseshoeState {
    HorseshoeState {
        z: DVector::zeros(3),
        beta: DVector::from_fn(p, |j, _| 0.3 * j as f64 - 0.4),
        lambda2: DVector::from_fn(p, |j, _| 0.5 + j as f64),
        nu: DVector::from_fn(p, |j, _| 1.5 / (1.0 + j as f64)),
        tau2: 0.7,
        xi: 1.3,
        sigma2: 0.9,
    }
}

#[test]
fn prior_matches_statrs_densities() {
    let s = sample_state(3);
    let cfg = ModelConfig { a0: 2.0, b0: 1.5, ..ModelConfig::default() };
    let ig = |x: f64, a: f64, b: f64| InverseGamma::new(a, b).unwrap().ln_pdf(x);
    let mut want = 0.0;
    for j in 0..3 {
        want += Normal::new(0.0, (s.tau2 * s.lambda2[j]).sqrt()).unwrap().ln_pdf(s.beta[j]);
        want += ig(s.lambda2[j], 0.5, 1.0 / s.nu[j]) + ig(s.nu[j], 0.5, 1.0);
    }
    want += ig(s.tau2, 0.5, 1.0 / s.xi) + ig(s.xi, 0.5, 1.0);
    let without_sigma = want;
    want += ig(s.sigma2, 2.0, 1.5);
    assert!((log_prior(&s, &cfg) - want).abs() < 1e-10);
    let fixed = ModelConfig { sigma2_fixed: Some(0.9), ..cfg };
    assert!((log_prior(&s, &fixed) - without_sigma).abs() < 1e-10);
}

#[test]
fn kernel_is_linear_in_alpha() {
    let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.4, 0.3, -1.0, 0.8, -0.6, 0.5, 1.1]);
    let data = TobitDataset::new(x, DVector::from_row_slice(&[0.0, 1.2, 0.4]), 0.0).unwrap();
    let s = sample_state(3);
    let ll = tobit_log_likelihood(&s.beta, s.sigma2, &data).unwrap();
    let k = |alpha: f64| fractional_log_posterior_kernel(&s, &data, &ModelConfig { alpha, ..Default::default() }).unwrap();
    assert!((k(1.0) - (ll + log_prior(&s, &ModelConfig::default()))).abs() < 1e-12);
    // Halving α halves only the likelihood term.
    assert!((k(1.0) - k(0.5) - 0.5 * ll).abs() < 1e-10);
    assert!((k(0.99) - k(0.5) - 0.49 * ll).abs() < 1e-10);
}

#[test]
fn deep_censoring_stays_finite() {
    let n = 5;
    let data = TobitDataset::new(DMatrix::from_element(n, 1, 1.0), DVector::zeros(n), 0.0).unwrap();
    let ll = tobit_log_likelihood(&DVector::from_element(1, 40.0), 1.0, &data).unwrap();
    assert!(ll.is_finite());
    let single = log_std_normal_cdf(-40.0).unwrap();
    assert!((ll - n as f64 * single).abs() < 1e-9 * ll.abs());
}

#[test]
fn tempering_weights_vanish_without_tempering_or_censoring() {
    let mut rng = RngStream::new(3);
    let x = DMatrix::from_fn(30, 4, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
    let mean = &x * DVector::from_row_slice(&[1.0, -1.0, 0.0, 0.5]);
    let y = mean.map(|m| m + tobit_horseshoe::rng_stats::sample_truncated_normal(0.0, 1.0, -8.0, 8.0, &mut rng).unwrap());
    let censored = TobitDataset::new(x.clone(), y.map(|v| v.max(0.0)), 0.0).unwrap();
    let uncensored = TobitDataset::new(x, y.clone(), y.min() - 1.0).unwrap();

    let cfg = ChainConfig { n_iter: 300, burn_in: 100, ..ChainConfig::default() };
    let samples = run_chain(&censored, &cfg).unwrap();
    let w = tempering_log_weights(&samples, &censored, &cfg.model).unwrap();
    assert!(w.iter().all(|v| v.is_finite()));
    let frac = importance_ess_fraction(&w);
    // α = 0.99 barely moves the target: the weights are nearly uniform.
    assert!(frac > 0.9, "{frac}");

    let exact = ModelConfig { alpha: 1.0, ..cfg.model };
    assert!(tempering_log_weights(&samples, &censored, &exact).unwrap().iter().all(|v| v.abs() < 1e-9));
    let s2 = run_chain(&uncensored, &cfg).unwrap();
    assert!(tempering_log_weights(&s2, &uncensored, &cfg.model).unwrap().iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn chain_recovers_least_squares_fit() {
    let mut rng = RngStream::new(21);
    let (n, p) = (200, 3);
    let x = DMatrix::from_fn(n, p, |_, _| tobit_horseshoe::rng_stats::sample_truncated_normal(0.0, 1.0, -6.0, 6.0, &mut rng).unwrap());
    let truth = DVector::from_row_slice(&[3.0, -2.0, 1.5]);
    let y = &x * &truth + DVector::from_fn(n, |_, _| tobit_horseshoe::rng_stats::sample_truncated_normal(0.0, 1.0, -6.0, 6.0, &mut rng).unwrap());
    let data = TobitDataset::new(x.clone(), y.clone(), y.min() - 1.0).unwrap();
    assert_eq!(data.n_censored(), 0);
    let ols = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
    let cfg = ChainConfig { n_iter: 3000, burn_in: 500, model: ModelConfig { alpha: 1.0, ..Default::default() }, seed: 4, ..Default::default() };
    let samples = run_chain(&data, &cfg).unwrap();
    let mean = samples.posterior_mean();
    for j in 0..p {
        let draws = samples.coefficient_series(j);
        let sd = (draws.iter().map(|b| (b - mean[j]).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        assert!((mean[j] - ols[j]).abs() < 3.0 * sd, "coef {j}: {} vs {} (sd {sd})", mean[j], ols[j]);
    }
}
