use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{BetaAlgorithm, ChainConfig, FloorWarnings, HorseshoeState};
use crate::error::{Error, Result};

/// Retained post-burn-in draws of one chain.
#[derive(Clone, Debug)]
pub struct PosteriorSamples {
    iterations: Vec<usize>,
    /// kept × p
    beta: DMatrix<f64>,
    sigma2: Vec<f64>,
    tau2: Vec<f64>,
    lambda2: Option<DMatrix<f64>>,
    config: ChainConfig,
    warnings: FloorWarnings,
    algorithm: BetaAlgorithm,
}

pub(super) struct Recorder {
    p: usize,
    config: ChainConfig,
    iterations: Vec<usize>,
    beta: Vec<f64>,
    sigma2: Vec<f64>,
    tau2: Vec<f64>,
    lambda2: Option<Vec<f64>>,
}

impl Recorder {
    pub(super) fn new(p: usize, config: &ChainConfig) -> Self {
        let kept = config.kept_iterations();
        Self {
            p,
            config: config.clone(),
            iterations: Vec::with_capacity(kept),
            beta: Vec::with_capacity(kept * p),
            sigma2: Vec::with_capacity(kept),
            tau2: Vec::with_capacity(kept),
            lambda2: config.store_hyperparams.then(|| Vec::with_capacity(kept * p)),
        }
    }

    pub(super) fn push(&mut self, iteration: usize, state: &HorseshoeState) {
        self.iterations.push(iteration);
        self.beta.extend(state.beta.iter());
        self.sigma2.push(state.sigma2);
        self.tau2.push(state.tau2);
        if let Some(l) = self.lambda2.as_mut() {
            l.extend(state.lambda2.iter());
        }
    }

    pub(super) fn finish(self, warnings: FloorWarnings, algorithm: BetaAlgorithm) -> PosteriorSamples {
        let kept = self.iterations.len();
        PosteriorSamples {
            beta: DMatrix::from_row_slice(kept, self.p, &self.beta),
            lambda2: self.lambda2.map(|l| DMatrix::from_row_slice(kept, self.p, &l)),
            iterations: self.iterations,
            sigma2: self.sigma2,
            tau2: self.tau2,
            config: self.config,
            warnings,
            algorithm,
        }
    }
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn p(&self) -> usize {
        self.beta.ncols()
    }

    /// Sweep index (1-based) of each kept draw.
    pub fn iterations(&self) -> &[usize] {
        &self.iterations
    }

    /// kept × p matrix of β draws.
    pub fn beta_draws(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn sigma2_draws(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn tau2_draws(&self) -> &[f64] {
        &self.tau2
    }

    pub fn lambda2_draws(&self) -> Option<&DMatrix<f64>> {
        self.lambda2.as_ref()
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn warnings(&self) -> FloorWarnings {
        self.warnings
    }

    pub fn algorithm(&self) -> BetaAlgorithm {
        self.algorithm
    }

    /// Draws of coefficient `j` in iteration order.
    pub fn coefficient_series(&self, j: usize) -> Vec<f64> {
        self.beta.column(j).iter().copied().collect()
    }

    /// Posterior mean of β, the default point estimate.
    pub fn posterior_mean(&self) -> DVector<f64> {
        self.beta.row_mean().transpose()
    }

    /// Writes one row per kept iteration:
    /// `iteration, beta_<name>..., sigma2, tau2[, lambda2_<name>...]`.
    /// Coefficients are named `1..=p` when `names` is `None`.
    /// Divides coefficient column `j` by `scales[j]`, mapping draws taken on
    /// a column-rescaled design back to the original design. Hyperparameter
    /// draws are left on the rescaled problem.
    pub fn unscale_coefficients(&mut self, scales: &[f64]) -> Result<()> {
        if scales.len() != self.p() {
            return Err(Error::domain(format!("{} scales for {} coefficients", scales.len(), self.p())));
        }
        for (mut col, s) in self.beta.column_iter_mut().zip(scales) {
            col /= *s;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W, names: Option<&[String]>) -> Result<()> {
        let names = coefficient_names(names, self.p())?;
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["iteration".to_string()];
        header.extend(names.iter().map(|n| format!("beta_{n}")));
        header.push("sigma2".into());
        header.push("tau2".into());
        if self.lambda2.is_some() {
            header.extend(names.iter().map(|n| format!("lambda2_{n}")));
        }
        w.write_record(&header)?;
        for (k, it) in self.iterations.iter().enumerate() {
            let mut row = vec![it.to_string()];
            row.extend(self.beta.row(k).iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(self.sigma2[k]));
            row.push(fmt_f64(self.tau2[k]));
            if let Some(l) = &self.lambda2 {
                row.extend(l.row(k).iter().map(|v| fmt_f64(*v)));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("samples csv", e))?;
        Ok(())
    }

    /// Reads a file written by [`PosteriorSamples::write_csv`], returning
    /// coefficient names and the draws. The chain layout (`n_iter`,
    /// `burn_in`, `thin`) is inferred from the iteration column; the model
    /// settings and seed live in the run manifest, not in this file.
    pub fn read_csv<R: Read>(reader: R, label: &str) -> Result<(Vec<String>, PosteriorSamples)> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let col = |name: &str| header.iter().position(|h| h == name);
        let it_col = col("iteration").ok_or_else(|| Error::Schema(format!("{label}: missing `iteration` column")))?;
        let s_col = col("sigma2").ok_or_else(|| Error::Schema(format!("{label}: missing `sigma2` column")))?;
        let t_col = col("tau2").ok_or_else(|| Error::Schema(format!("{label}: missing `tau2` column")))?;
        let beta_cols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("beta_")).collect();
        let lambda_cols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("lambda2_")).collect();
        if beta_cols.is_empty() {
            return Err(Error::Schema(format!("{label}: no `beta_*` columns")));
        }
        if !lambda_cols.is_empty() && lambda_cols.len() != beta_cols.len() {
            return Err(Error::Schema(format!("{label}: lambda2 and beta column counts differ")));
        }
        let names: Vec<String> = beta_cols.iter().map(|&i| header[i]["beta_".len()..].to_string()).collect();
        let p = beta_cols.len();

        let (mut iterations, mut beta, mut sigma2, mut tau2, mut lambda2) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (row_idx, rec) in r.records().enumerate() {
            let rec = rec?;
            let cell = |i: usize| -> Result<f64> {
                let raw = rec.get(i).unwrap_or("");
                raw.trim().parse::<f64>().map_err(|_| Error::Ingestion {
                    path: label.to_string(),
                    row: row_idx + 1,
                    column: header[i].clone(),
                    message: format!("`{raw}` is not a number"),
                })
            };
            let it = cell(it_col)?;
            if it < 1.0 || it.fract() != 0.0 {
                return Err(Error::Ingestion {
                    path: label.to_string(),
                    row: row_idx + 1,
                    column: "iteration".into(),
                    message: format!("`{it}` is not a positive integer"),
                });
            }
            iterations.push(it as usize);
            for &i in &beta_cols {
                beta.push(cell(i)?);
            }
            sigma2.push(cell(s_col)?);
            tau2.push(cell(t_col)?);
            for &i in &lambda_cols {
                lambda2.push(cell(i)?);
            }
        }
        let kept = iterations.len();
        if kept == 0 {
            return Err(Error::domain(format!("{label}: no draws")));
        }
        if iterations.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Schema(format!("{label}: iterations must increase")));
        }
        let thin = if kept > 1 { iterations[1] - iterations[0] } else { 1 };
        let config = ChainConfig {
            n_iter: *iterations.last().unwrap(),
            burn_in: iterations[0].saturating_sub(thin),
            thin,
            store_hyperparams: !lambda_cols.is_empty(),
            ..ChainConfig::default()
        };
        let samples = PosteriorSamples {
            beta: DMatrix::from_row_slice(kept, p, &beta),
            lambda2: (!lambda_cols.is_empty()).then(|| DMatrix::from_row_slice(kept, p, &lambda2)),
            iterations,
            sigma2,
            tau2,
            config,
            warnings: FloorWarnings::default(),
            algorithm: BetaAlgorithm::Direct,
        };
        Ok((names, samples))
    }
}

pub(crate) fn coefficient_names(names: Option<&[String]>, p: usize) -> Result<Vec<String>> {
    match names {
        Some(n) if n.len() != p => Err(Error::domain(format!("{} names given for {p} coefficients", n.len()))),
        Some(n) => Ok(n.to_vec()),
        None => Ok((1..=p).map(|j| j.to_string()).collect()),
    }
}

/// Shortest round-trip decimal representation.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Per-coefficient posterior summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoefficientSummary {
    pub mean: f64,
    pub median: f64,
    /// Lower end of the equal-tailed credible interval.
    pub lower: f64,
    pub upper: f64,
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean, median and equal-tailed interval at `level` for every coefficient.
pub fn posterior_summary(samples: &PosteriorSamples, level: f64) -> Result<Vec<CoefficientSummary>> {
    if samples.len() < 2 {
        return Err(Error::domain(format!(
            "posterior summary needs at least 2 draws, got {}",
            samples.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("credible level must lie in (0, 1), got {level}")));
    }
    let tail = (1.0 - level) / 2.0;
    Ok((0..samples.p())
        .map(|j| {
            let mut col = samples.coefficient_series(j);
            // shifted by the first draw so that constant columns are exact
            let first = col[0];
            let mean = first + col.iter().map(|v| v - first).sum::<f64>() / col.len() as f64;
            col.sort_by(f64::total_cmp);
            CoefficientSummary {
                mean,
                median: quantile_sorted(&col, 0.5),
                lower: quantile_sorted(&col, tail),
                upper: quantile_sorted(&col, 1.0 - tail),
            }
        })
        .collect())
}

#[cfg(test)]
pub(crate) fn from_columns(iterations: Vec<usize>, beta: DMatrix<f64>) -> PosteriorSamples {
    let kept = iterations.len();
    PosteriorSamples {
        iterations,
        beta,
        sigma2: vec![1.0; kept],
        tau2: vec![1.0; kept],
        lambda2: None,
        config: ChainConfig::default(),
        warnings: FloorWarnings::default(),
        algorithm: BetaAlgorithm::Direct,
    }
}
