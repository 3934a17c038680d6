//! Synthetic censored-regression scenarios and their error metrics.
//!
//! Per replicate `r` with `M` methods, the data stream is substream
//! `r·STREAM_STRIDE` of `base_seed` and method `m` runs its chain on
//! substream `r·STREAM_STRIDE + 1 + m`. Results therefore do not depend on
//! how replicates are scheduled across threads.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{run_chain_with_rng, ChainConfig};
use crate::model::{predict, ColumnScaling, ModelConfig, TobitDataset};
use crate::rng_stats::{std_normal, RngStream};

/// Distance between the substream indices of consecutive replicates.
pub const STREAM_STRIDE: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Student t with 3 degrees of freedom (variance 3).
    StudentT3,
}

/// Chain length settings of a scenario; the seed comes from the replicate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSettings {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        let d = ChainConfig::default();
        Self {
            n_iter: d.n_iter,
            burn_in: d.burn_in,
            thin: d.thin,
        }
    }
}

/// An externally fitted method scored alongside the sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportedMethod {
    pub label: String,
    /// CSV with columns `replicate,beta_1,...,beta_p`.
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationScenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub s_star: usize,
    #[serde(default)]
    pub rho_x: f64,
    #[serde(default)]
    pub noise: NoiseKind,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_n_reps")]
    pub n_reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Fit on a column-rescaled design and map coefficients back.
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub chain: ChainSettings,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub imported: Vec<ImportedMethod>,
}

fn default_name() -> String {
    "scenario".into()
}
fn default_n_test() -> usize {
    30
}
fn default_n_reps() -> usize {
    100
}

const TOP_KEYS: &[&str] = &[
    "name",
    "n",
    "p",
    "s_star",
    "rho_x",
    "noise",
    "c",
    "n_test",
    "n_reps",
    "base_seed",
    "standardize",
    "chain",
    "model",
    "imported",
];
const CHAIN_KEYS: &[&str] = &["n_iter", "burn_in", "thin"];
const MODEL_KEYS: &[&str] = &["alpha", "a0", "b0", "sigma2_fixed"];
const IMPORTED_KEYS: &[&str] = &["label", "path"];

impl SimulationScenario {
    /// Scenario with the default chain, model and replicate settings.
    pub fn new(n: usize, p: usize, s_star: usize) -> Self {
        Self {
            name: default_name(),
            n,
            p,
            s_star,
            rho_x: 0.0,
            noise: NoiseKind::Gaussian,
            c: 0.0,
            n_test: default_n_test(),
            n_reps: default_n_reps(),
            base_seed: 0,
            standardize: false,
            chain: ChainSettings::default(),
            model: ModelConfig::default(),
            imported: Vec::new(),
        }
    }

    /// Parses TOML, reporting every unrecognized key at once.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut unknown = Vec::new();
        collect_unknown(&table, TOP_KEYS, "", &mut unknown);
        if let Some(toml::Value::Table(t)) = table.get("chain") {
            collect_unknown(t, CHAIN_KEYS, "chain.", &mut unknown);
        }
        if let Some(toml::Value::Table(t)) = table.get("model") {
            collect_unknown(t, MODEL_KEYS, "model.", &mut unknown);
        }
        if let Some(toml::Value::Array(items)) = table.get("imported") {
            for (i, item) in items.iter().enumerate() {
                if let toml::Value::Table(t) = item {
                    collect_unknown(t, IMPORTED_KEYS, &format!("imported[{i}]."), &mut unknown);
                }
            }
        }
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown scenario keys: {}", unknown.join(", "))));
        }
        let scn: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.n_test == 0 || self.n_reps == 0 {
            return Err(Error::Config("n, p, n_test and n_reps must be positive".into()));
        }
        if self.s_star > self.p {
            return Err(Error::Config(format!("s_star ({}) exceeds p ({})", self.s_star, self.p)));
        }
        if !(0.0..1.0).contains(&self.rho_x) {
            return Err(Error::Config(format!("rho_x must lie in [0, 1), got {}", self.rho_x)));
        }
        if !self.c.is_finite() {
            return Err(Error::Config("censoring threshold must be finite".into()));
        }
        self.chain_config(0).validate()
    }

    /// Chain configuration for one replicate's fit.
    pub fn chain_config(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            n_iter: self.chain.n_iter,
            burn_in: self.chain.burn_in,
            thin: self.chain.thin,
            model: self.model,
            seed,
            store_hyperparams: false,
        }
    }
}

fn collect_unknown(table: &toml::Table, known: &[&str], prefix: &str, out: &mut Vec<String>) {
    out.extend(
        table
            .keys()
            .filter(|k| !known.contains(&k.as_str()))
            .map(|k| format!("{prefix}{k}")),
    );
}

/// Closed-form lower Cholesky factor of `Σ_ij = ρ^|i−j|`:
/// `L_i0 = ρ^i`, `L_ij = ρ^(i−j) √(1−ρ²)` for `1 ≤ j ≤ i`.
pub fn ar1_covariance_factor(p: usize, rho: f64) -> Result<DMatrix<f64>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::domain(format!("AR(1) correlation must satisfy |rho| < 1, got {rho}")));
    }
    let s = (1.0 - rho * rho).sqrt();
    Ok(DMatrix::from_fn(p, p, |i, j| match (i, j) {
        (i, 0) => rho.powi(i as i32),
        (i, j) if j <= i => rho.powi((i - j) as i32) * s,
        _ => 0.0,
    }))
}

/// `⌈s*/2⌉` leading entries +1, the next `⌊s*/2⌋` entries −1, rest 0.
pub fn make_beta0(p: usize, s_star: usize) -> Result<DVector<f64>> {
    if s_star > p {
        return Err(Error::domain(format!("s_star ({s_star}) exceeds p ({p})")));
    }
    let positive = s_star.div_ceil(2);
    Ok(DVector::from_fn(p, |j, _| {
        if j < positive {
            1.0
        } else if j < s_star {
            -1.0
        } else {
            0.0
        }
    }))
}

/// One replicate's training data, held-out test data and true coefficients.
#[derive(Clone, Debug)]
pub struct ReplicateData {
    pub train: TobitDataset,
    pub test: TobitDataset,
    pub beta0: DVector<f64>,
}

/// Generates replicate `rep_index` on its own data substream.
pub fn generate_dataset(scn: &SimulationScenario, rep_index: usize) -> Result<ReplicateData> {
    let mut rng = RngStream::substream(scn.base_seed, rep_index as u64 * STREAM_STRIDE);
    generate_dataset_with_rng(scn, &mut rng)
}

/// Draws `X_train`, `ε_train`, `X_test`, `ε_test` in that order from `rng`.
pub fn generate_dataset_with_rng(scn: &SimulationScenario, rng: &mut RngStream) -> Result<ReplicateData> {
    scn.validate()?;
    let factor = if scn.rho_x == 0.0 {
        None
    } else {
        Some(ar1_covariance_factor(scn.p, scn.rho_x)?)
    };
    let beta0 = make_beta0(scn.p, scn.s_star)?;
    let t3 = StudentT::new(3.0).expect("valid degrees of freedom");
    let mut draw = |rows: usize| -> Result<TobitDataset> {
        let g = DMatrix::from_fn(rows, scn.p, |_, _| std_normal(rng));
        let x = match &factor {
            Some(l) => g * l.transpose(),
            None => g,
        };
        let mean = &x * &beta0;
        let y = mean.map(|m| {
            let eps = match scn.noise {
                NoiseKind::Gaussian => std_normal(rng),
                NoiseKind::StudentT3 => t3.sample(rng),
            };
            (m + eps).max(scn.c)
        });
        TobitDataset::new(x, y, scn.c)
    };
    let train = draw(scn.n)?;
    let test = draw(scn.n_test)?;
    Ok(ReplicateData { train, test, beta0 })
}

/// The four squared-error summaries of a point estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    /// `p⁻¹ ‖β̂ − β₀‖²`
    pub l2_beta: f64,
    /// `n⁻¹ ‖X(β̂ − β₀)‖²`
    pub l2_xbeta: f64,
    /// `n⁻¹ Σ (y_i − max(x_iᵀβ̂, c))²` on the training data.
    pub l2_y: f64,
    /// Same on the held-out test data.
    pub l2_ytest: f64,
}

pub const METRIC_NAMES: [&str; 4] = ["l2_beta", "l2_xbeta", "l2_y", "l2_ytest"];

impl Metrics {
    pub fn values(&self) -> [f64; 4] {
        [self.l2_beta, self.l2_xbeta, self.l2_y, self.l2_ytest]
    }

    fn from_values(v: [f64; 4]) -> Self {
        Self {
            l2_beta: v[0],
            l2_xbeta: v[1],
            l2_y: v[2],
            l2_ytest: v[3],
        }
    }
}

pub fn evaluation_metrics(
    beta_hat: &DVector<f64>,
    beta0: &DVector<f64>,
    x_train: &DMatrix<f64>,
    y_train: &DVector<f64>,
    x_test: &DMatrix<f64>,
    y_test: &DVector<f64>,
    c: f64,
) -> Result<Metrics> {
    let p = beta0.len();
    if beta_hat.len() != p || x_train.ncols() != p || x_test.ncols() != p {
        return Err(Error::domain(format!(
            "dimension mismatch: beta_hat {}, beta0 {p}, X_train cols {}, X_test cols {}",
            beta_hat.len(),
            x_train.ncols(),
            x_test.ncols()
        )));
    }
    if x_train.nrows() != y_train.len() || x_test.nrows() != y_test.len() {
        return Err(Error::domain("design rows and response length differ"));
    }
    let diff = beta_hat - beta0;
    let mse = |y: &DVector<f64>, yhat: &DVector<f64>| (y - yhat).norm_squared() / y.len() as f64;
    Ok(Metrics {
        l2_beta: diff.norm_squared() / p as f64,
        l2_xbeta: (x_train * &diff).norm_squared() / x_train.nrows() as f64,
        l2_y: mse(y_train, &predict(x_train, beta_hat, c)?),
        l2_ytest: mse(y_test, &predict(x_test, beta_hat, c)?),
    })
}

/// Per-replicate coefficient vectors produced outside this crate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImportedCoefficients {
    pub by_replicate: BTreeMap<usize, DVector<f64>>,
}

impl ImportedCoefficients {
    /// Reads `replicate,beta_1,...,beta_p`; `replicate` is 0-based.
    pub fn read_csv<R: Read>(reader: R, p: usize, label: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected: Vec<String> = std::iter::once("replicate".to_string())
            .chain((1..=p).map(|j| format!("beta_{j}")))
            .collect();
        if headers.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Schema(format!(
                "{label}: expected header replicate,beta_1..beta_{p}, found {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut by_replicate = BTreeMap::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |column: &str, message: String| Error::Ingestion {
                path: label.to_string(),
                row: row + 1,
                column: column.to_string(),
                message,
            };
            let rep: usize = rec[0]
                .parse()
                .map_err(|_| bad("replicate", format!("not a replicate index: {:?}", &rec[0])))?;
            let mut beta = DVector::zeros(p);
            for j in 0..p {
                let cell = &rec[j + 1];
                beta[j] = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(&expected[j + 1], format!("not a finite number: {cell:?}")))?;
            }
            if by_replicate.insert(rep, beta).is_some() {
                return Err(bad("replicate", format!("replicate {rep} appears twice")));
            }
        }
        Ok(Self { by_replicate })
    }
}

/// A procedure scored in every replicate.
#[derive(Clone, Debug)]
pub enum Method {
    /// Posterior mean of the Horseshoe Gibbs sampler.
    Horseshoe {
        label: String,
        chain: ChainConfig,
        standardize: bool,
    },
    Imported {
        label: String,
        coefficients: ImportedCoefficients,
    },
}

impl Method {
    pub fn label(&self) -> &str {
        match self {
            Method::Horseshoe { label, .. } | Method::Imported { label, .. } => label,
        }
    }

    /// The sampler configured as in the scenario, labelled `Horseshoe`.
    pub fn horseshoe_from(scn: &SimulationScenario) -> Self {
        Method::Horseshoe {
            label: "Horseshoe".into(),
            chain: scn.chain_config(0),
            standardize: scn.standardize,
        }
    }

    fn estimate(&self, data: &TobitDataset, rep: usize, rng: &mut RngStream) -> Result<(DVector<f64>, u64)> {
        match self {
            Method::Horseshoe {
                chain, standardize, ..
            } => {
                if *standardize {
                    let scaling = ColumnScaling::fit(data.x());
                    let scaled = TobitDataset::new(scaling.apply(data.x()), data.y().clone(), data.threshold())?;
                    let s = run_chain_with_rng(&scaled, chain, rng)?;
                    Ok((scaling.unscale_coefficients(&s.posterior_mean()), s.warnings().total()))
                } else {
                    let s = run_chain_with_rng(data, chain, rng)?;
                    Ok((s.posterior_mean(), s.warnings().total()))
                }
            }
            Method::Imported { coefficients, .. } => coefficients
                .by_replicate
                .get(&rep)
                .cloned()
                .map(|b| (b, 0))
                .ok_or_else(|| Error::domain(format!("no imported coefficients for replicate {rep}"))),
        }
    }
}

/// One method on one replicate. Failed fits keep their error message.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub method: String,
    pub censored_fraction: f64,
    pub metrics: Option<Metrics>,
    pub floor_warnings: u64,
    pub error: Option<String>,
}

/// Mean and sample standard deviation of each metric over successful
/// replicates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean: Metrics,
    pub sd: Metrics,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioResult {
    pub scenario: SimulationScenario,
    /// Replicate-major, method-minor.
    pub records: Vec<ReplicateRecord>,
    pub summaries: Vec<MethodSummary>,
    pub warnings: Vec<String>,
}

impl ScenarioResult {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// Columns `replicate,method,censored_fraction,l2_beta,l2_xbeta,l2_y,
    /// l2_ytest,floor_warnings,status`; failed rows leave metrics empty.
    pub fn write_replicates_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["replicate", "method", "censored_fraction"];
        header.extend(METRIC_NAMES);
        header.extend(["floor_warnings", "status"]);
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.replicate.to_string(), r.method.clone(), format!("{:?}", r.censored_fraction)];
            match &r.metrics {
                Some(m) => row.extend(m.values().iter().map(|v| format!("{v:?}"))),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            row.push(r.floor_warnings.to_string());
            row.push(r.error.clone().unwrap_or_else(|| "ok".into()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("replicates csv", e))?;
        Ok(())
    }

    /// One row per metric, a `mean` and `sd` column per method, followed by
    /// `n_ok` and `n_failed` rows.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["metric".to_string()];
        for s in &self.summaries {
            header.push(format!("{}_mean", s.method));
            header.push(format!("{}_sd", s.method));
        }
        w.write_record(&header)?;
        for (k, name) in METRIC_NAMES.iter().enumerate() {
            let mut row = vec![name.to_string()];
            for s in &self.summaries {
                row.push(format!("{:?}", s.mean.values()[k]));
                row.push(format!("{:?}", s.sd.values()[k]));
            }
            w.write_record(&row)?;
        }
        for (name, pick) in [("n_ok", 0), ("n_failed", 1)] {
            let mut row = vec![name.to_string()];
            for s in &self.summaries {
                row.push(if pick == 0 { s.n_ok } else { s.n_failed }.to_string());
                row.push(String::new());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("summary csv", e))?;
        Ok(())
    }
}

fn score(method: &Method, d: &ReplicateData, c: f64, rep: usize, rng: &mut RngStream) -> Result<(Metrics, u64, f64)> {
    let (beta_hat, warnings) = method.estimate(&d.train, rep, rng)?;
    let metrics = evaluation_metrics(&beta_hat, &d.beta0, d.train.x(), d.train.y(), d.test.x(), d.test.y(), c)?;
    Ok((metrics, warnings, d.train.censored_fraction()))
}

fn run_replicate(scn: &SimulationScenario, methods: &[Method], rep: usize) -> Vec<ReplicateRecord> {
    let base = rep as u64 * STREAM_STRIDE;
    let data = generate_dataset(scn, rep);
    methods
        .iter()
        .enumerate()
        .map(|(m, method)| {
            let mut rng = RngStream::substream(scn.base_seed, base + 1 + m as u64);
            let outcome = match &data {
                Ok(d) => score(method, d, scn.c, rep, &mut rng).map_err(|e| e.to_string()),
                Err(e) => Err(format!("data generation failed: {e}")),
            };
            match outcome {
                Ok((metrics, floor_warnings, frac)) => ReplicateRecord {
                    replicate: rep,
                    method: method.label().to_string(),
                    censored_fraction: frac,
                    metrics: Some(metrics),
                    floor_warnings,
                    error: None,
                },
                Err(e) => ReplicateRecord {
                    replicate: rep,
                    method: method.label().to_string(),
                    censored_fraction: data.as_ref().map_or(f64::NAN, |d| d.train.censored_fraction()),
                    metrics: None,
                    floor_warnings: 0,
                    error: Some(e),
                },
            }
        })
        .collect()
}

fn summarize(method: &str, records: &[ReplicateRecord]) -> MethodSummary {
    let ok: Vec<[f64; 4]> = records
        .iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.metrics.map(|m| m.values()))
        .collect();
    let total = records.iter().filter(|r| r.method == method).count();
    let n = ok.len() as f64;
    let mut mean = [f64::NAN; 4];
    let mut sd = [f64::NAN; 4];
    if !ok.is_empty() {
        for k in 0..4 {
            let m = ok.iter().map(|v| v[k]).sum::<f64>() / n;
            mean[k] = m;
            sd[k] = if ok.len() > 1 {
                (ok.iter().map(|v| (v[k] - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
        }
    }
    MethodSummary {
        method: method.to_string(),
        mean: Metrics::from_values(mean),
        sd: Metrics::from_values(sd),
        n_ok: ok.len(),
        n_failed: total - ok.len(),
    }
}

/// Runs every replicate for every method. `threads = None` uses rayon's
/// global pool; the result is identical for any thread count.
pub fn run_scenario(scn: &SimulationScenario, methods: &[Method], threads: Option<usize>) -> Result<ScenarioResult> {
    scn.validate()?;
    if methods.is_empty() {
        return Err(Error::Config("no methods to run".into()));
    }
    let mut labels: Vec<&str> = methods.iter().map(Method::label).collect();
    labels.sort_unstable();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("method labels must be distinct".into()));
    }
    let work = || -> Vec<ReplicateRecord> {
        (0..scn.n_reps)
            .into_par_iter()
            .map(|rep| run_replicate(scn, methods, rep))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    };
    let records = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let warnings = records
        .iter()
        .filter_map(|r| {
            r.error
                .as_ref()
                .map(|e| format!("replicate {} ({}) excluded: {e}", r.replicate, r.method))
        })
        .collect();
    let summaries = methods.iter().map(|m| summarize(m.label(), &records)).collect();
    Ok(ScenarioResult {
        scenario: scn.clone(),
        records,
        summaries,
        warnings,
    })
}
