//! The `tobit-hs` command-line surface.
//!
//! Every command writes its outputs plus a `manifest.json` into an output
//! directory. A manifest records the fully resolved configuration and input
//! paths, so `tobit-hs replay` can regenerate the outputs bit for bit.
//! Column layouts are documented in `docs/formats.md`.

mod ingest;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{acf_export, effective_sample_size, trace_export, write_series_csv};
use crate::error::{Error, Result};
use crate::gibbs::{posterior_summary, run_chain, ChainConfig, FloorWarnings, PosteriorSamples};
use crate::model::{predict, ColumnScaling, ModelConfig, TobitDataset};
use crate::rng_stats::PRNG_ALGORITHM;
use crate::simulation::{run_scenario, ChainSettings, ImportedCoefficients, Method, SimulationScenario};

use ingest::{load_dataset, read_numeric_csv};

/// Environment variable giving the default worker-thread count of `simulate`.
pub const THREADS_ENV: &str = "TOBIT_HS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "tobit-hs", version, about = "Sparse Bayesian Tobit regression with a Horseshoe prior")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the sampler to a CSV data set.
    Fit {
        /// CSV with a header; the response column plus numeric covariates.
        #[arg(long)]
        data: PathBuf,
        /// TOML fit configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Response column name (default `y`).
        #[arg(long)]
        response: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a simulation scenario.
    Simulate {
        /// TOML scenario file.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to $TOBIT_HS_THREADS, then all cores.
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Censored predictions from a fitted summary's posterior means.
    Predict {
        /// `summary.csv` written by `fit`.
        #[arg(long)]
        summary: PathBuf,
        /// CSV containing a column for every fitted coefficient.
        #[arg(long)]
        newdata: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        censor_at: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trace, autocorrelation and ESS tables from a samples file.
    Diagnose {
        /// `samples.csv` written by `fit`.
        #[arg(long)]
        samples: PathBuf,
        /// 0-based coefficient indices, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        indices: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        max_lag: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flags that override configuration-file values.
#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub censor_at: Option<f64>,
    /// Hold σ² at this value.
    #[arg(long)]
    pub fix_sigma2: Option<f64>,
    /// Rescale covariate columns before fitting.
    #[arg(long)]
    pub standardize: bool,
}

impl Overrides {
    fn apply_chain(&self, chain: &mut ChainSettings, model: &mut ModelConfig) {
        if let Some(v) = self.iters {
            chain.n_iter = v;
        }
        if let Some(v) = self.burnin {
            chain.burn_in = v;
        }
        if let Some(v) = self.thin {
            chain.thin = v;
        }
        if let Some(v) = self.alpha {
            model.alpha = v;
        }
        if let Some(v) = self.fix_sigma2 {
            model.sigma2_fixed = Some(v);
        }
    }

    pub fn apply_fit(&self, cfg: &mut FitConfig) {
        self.apply_chain(&mut cfg.chain, &mut cfg.model);
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(c) = self.censor_at {
            cfg.censor_at = c;
        }
        cfg.standardize |= self.standardize;
    }

    pub fn apply_scenario(&self, scn: &mut SimulationScenario) {
        self.apply_chain(&mut scn.chain, &mut scn.model);
        if let Some(s) = self.seed {
            scn.base_seed = s;
        }
        if let Some(c) = self.censor_at {
            scn.c = c;
        }
        scn.standardize |= self.standardize;
    }
}

/// Settings of a single fit, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub response: String,
    pub censor_at: f64,
    pub standardize: bool,
    pub seed: u64,
    pub chain: ChainSettings,
    pub model: ModelConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            response: "y".into(),
            censor_at: 0.0,
            standardize: false,
            seed: 0,
            chain: ChainSettings::default(),
            model: ModelConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            n_iter: self.chain.n_iter,
            burn_in: self.chain.burn_in,
            thin: self.chain.thin,
            model: self.model,
            seed: self.seed,
            store_hyperparams: false,
        }
    }
}

/// Record of one run, sufficient to repeat it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved configuration of the command.
    pub config: serde_json::Value,
    /// Absolute paths of the input files by role.
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub prng: String,
    pub elapsed_seconds: f64,
    pub warnings: FloorWarnings,
    pub messages: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            prng: PRNG_ALGORITHM.into(),
            elapsed_seconds: 0.0,
            warnings: FloorWarnings::default(),
            messages: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_reader(ingest::open(path)?)?;
        if m.version != env!("CARGO_PKG_VERSION") {
            eprintln!(
                "warning: manifest written by version {}, replaying with {}",
                m.version,
                env!("CARGO_PKG_VERSION")
            );
        }
        Ok(m)
    }

    fn finish(mut self, out: &Path, started: Instant) -> Result<Self> {
        self.elapsed_seconds = started.elapsed().as_secs_f64();
        let path = out.join("manifest.json");
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &self)?;
        Ok(self)
    }

    fn input(&self, role: &str) -> Result<&Path> {
        self.inputs
            .get(role)
            .map(PathBuf::as_path)
            .ok_or_else(|| Error::Schema(format!("manifest lacks input {role:?}")))
    }
}

fn create_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = out.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| Error::io(&path, e))
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Fits the sampler and writes `summary.csv`, `samples.csv`, `manifest.json`.
pub fn cmd_fit(data: &Path, config: Option<&Path>, out: &Path, overrides: &Overrides) -> Result<RunManifest> {
    let mut cfg = match config {
        Some(p) => FitConfig::from_toml(&read_text(p)?)?,
        None => FitConfig::default(),
    };
    overrides.apply_fit(&mut cfg);
    fit_resolved(&cfg, data, out)
}

/// Fits with an already resolved configuration.
pub fn fit_resolved(cfg: &FitConfig, data: &Path, out: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    let chain = cfg.chain_config();
    chain.validate()?;
    let (names, dataset) = load_dataset(data, &cfg.response, cfg.censor_at)?;
    create_out_dir(out)?;
    let samples = if cfg.standardize {
        let scaling = ColumnScaling::fit(dataset.x());
        let scaled = TobitDataset::new(scaling.apply(dataset.x()), dataset.y().clone(), dataset.threshold())?;
        let mut s = run_chain(&scaled, &chain)?;
        s.unscale_coefficients(scaling.scales())?;
        s
    } else {
        run_chain(&dataset, &chain)?
    };
    write_fit_summary(&samples, &names, create(out, "summary.csv")?)?;
    samples.write_csv(create(out, "samples.csv")?, Some(&names))?;

    let mut m = RunManifest::new("fit", serde_json::to_value(cfg)?, Some(cfg.seed));
    m.inputs.insert("data".into(), absolute(data)?);
    m.outputs = vec!["summary.csv".into(), "samples.csv".into()];
    m.warnings = samples.warnings();
    m.messages.push(format!(
        "n = {}, p = {}, censored = {}, beta sampler = {:?}, kept draws = {}",
        dataset.n(),
        dataset.p(),
        dataset.n_censored(),
        samples.algorithm(),
        samples.len()
    ));
    m.finish(out, started)
}

/// Columns `coefficient,mean,median,q2.5,q97.5`.
pub fn write_fit_summary<W: std::io::Write>(samples: &PosteriorSamples, names: &[String], writer: W) -> Result<()> {
    let summary = posterior_summary(samples, 0.95)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["coefficient", "mean", "median", "q2.5", "q97.5"])?;
    for (name, s) in names.iter().zip(&summary) {
        w.write_record([
            name.clone(),
            format!("{:?}", s.mean),
            format!("{:?}", s.median),
            format!("{:?}", s.lower),
            format!("{:?}", s.upper),
        ])?;
    }
    w.flush().map_err(|e| Error::io("summary.csv", e))?;
    Ok(())
}

/// Thread count from the flag, else `$TOBIT_HS_THREADS`, else rayon's default.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Runs a scenario and writes `replicates.csv`, `summary.csv`, `manifest.json`.
pub fn cmd_simulate(scenario: &Path, out: &Path, overrides: &Overrides, threads: Option<usize>) -> Result<RunManifest> {
    let mut scn = SimulationScenario::from_toml(&read_text(scenario)?)?;
    overrides.apply_scenario(&mut scn);
    let base = scenario.parent().unwrap_or(Path::new("."));
    for imp in &mut scn.imported {
        if imp.path.is_relative() {
            imp.path = base.join(&imp.path);
        }
        imp.path = absolute(&imp.path)?;
    }
    simulate_resolved(&scn, out, resolve_threads(threads)?)
}

/// Runs a scenario whose imported paths are already absolute.
pub fn simulate_resolved(scn: &SimulationScenario, out: &Path, threads: Option<usize>) -> Result<RunManifest> {
    let started = Instant::now();
    scn.validate()?;
    let mut methods = vec![Method::horseshoe_from(scn)];
    for imp in &scn.imported {
        let label = imp.path.display().to_string();
        methods.push(Method::Imported {
            label: imp.label.clone(),
            coefficients: ImportedCoefficients::read_csv(ingest::open(&imp.path)?, scn.p, &label)?,
        });
    }
    create_out_dir(out)?;
    let result = run_scenario(scn, &methods, threads)?;
    result.write_replicates_csv(create(out, "replicates.csv")?)?;
    result.write_summary_csv(create(out, "summary.csv")?)?;

    let mut m = RunManifest::new("simulate", serde_json::to_value(scn)?, Some(scn.base_seed));
    for imp in &scn.imported {
        m.inputs.insert(format!("imported:{}", imp.label), imp.path.clone());
    }
    m.outputs = vec!["replicates.csv".into(), "summary.csv".into()];
    m.warnings.lambda2 = result.records.iter().map(|r| r.floor_warnings).sum();
    m.messages = result.warnings.clone();
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    m.finish(out, started)
}

/// Reads `coefficient,mean,...` and returns names with posterior means.
pub fn read_fit_summary(path: &Path) -> Result<(Vec<String>, DVector<f64>)> {
    let label = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(ingest::open(path)?);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{label}: missing column {name:?}")))
    };
    let (ci, mi) = (col("coefficient")?, col("mean")?);
    let mut names = Vec::new();
    let mut means = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        names.push(rec[ci].to_string());
        means.push(rec[mi].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
            Error::Ingestion {
                path: label.clone(),
                row: row + 1,
                column: "mean".into(),
                message: format!("not a finite number: {:?}", &rec[mi]),
            }
        })?);
    }
    if names.is_empty() {
        return Err(Error::domain(format!("{label}: no coefficients")));
    }
    Ok((names, DVector::from_vec(means)))
}

/// Writes `predictions.csv` (`row,prediction`) with `max(x_iᵀβ̂, c)` for
/// every row of `newdata`. Columns are matched to coefficients by name;
/// extra columns are ignored, missing ones are a schema error.
pub fn cmd_predict(summary: &Path, newdata: &Path, c: f64, out: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    let (names, beta) = read_fit_summary(summary)?;
    let label = newdata.display().to_string();
    let table = read_numeric_csv(ingest::open(newdata)?, &label)?;
    let missing: Vec<&str> = names
        .iter()
        .filter(|n| table.column_index(n).is_none())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!("{label}: missing columns {}", missing.join(", "))));
    }
    let cols: Vec<usize> = names.iter().filter_map(|n| table.column_index(n)).collect();
    let x = nalgebra::DMatrix::from_fn(table.rows, cols.len(), |i, k| table.get(i, cols[k]));
    let yhat = predict(&x, &beta, c)?;
    create_out_dir(out)?;
    let mut w = csv::Writer::from_writer(create(out, "predictions.csv")?);
    w.write_record(["row", "prediction"])?;
    for (i, v) in yhat.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{v:?}")])?;
    }
    w.flush().map_err(|e| Error::io("predictions.csv", e))?;

    let mut m = RunManifest::new("predict", serde_json::json!({ "censor_at": c }), None);
    m.inputs.insert("summary".into(), absolute(summary)?);
    m.inputs.insert("newdata".into(), absolute(newdata)?);
    m.outputs = vec!["predictions.csv".into()];
    m.finish(out, started)
}

/// Writes `trace.csv`, `acf.csv` and `ess.csv` (`param_index,ess`).
pub fn cmd_diagnose(samples: &Path, indices: &[usize], max_lag: usize, out: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    let (_, draws) = PosteriorSamples::read_csv(ingest::open(samples)?, &samples.display().to_string())?;
    let trace = trace_export(&draws, indices)?;
    let acf = acf_export(&draws, indices, max_lag)?;
    create_out_dir(out)?;
    write_series_csv(&trace, create(out, "trace.csv")?)?;
    write_series_csv(&acf, create(out, "acf.csv")?)?;
    let mut w = csv::Writer::from_writer(create(out, "ess.csv")?);
    w.write_record(["param_index", "ess"])?;
    for &j in indices {
        let ess = effective_sample_size(&draws.coefficient_series(j))?;
        w.write_record([j.to_string(), format!("{ess:?}")])?;
    }
    w.flush().map_err(|e| Error::io("ess.csv", e))?;

    let mut m = RunManifest::new(
        "diagnose",
        serde_json::json!({ "indices": indices, "max_lag": max_lag }),
        None,
    );
    m.inputs.insert("samples".into(), absolute(samples)?);
    m.outputs = vec!["trace.csv".into(), "acf.csv".into(), "ess.csv".into()];
    m.finish(out, started)
}

/// Repeats the run recorded in `manifest`, writing into `out`.
pub fn cmd_replay(manifest: &Path, out: &Path) -> Result<RunManifest> {
    let m = RunManifest::read(manifest)?;
    let field = |name: &str| {
        m.config
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Schema(format!("manifest config lacks {name:?}")))
    };
    match m.command.as_str() {
        "fit" => {
            let cfg: FitConfig = serde_json::from_value(m.config.clone())?;
            fit_resolved(&cfg, m.input("data")?, out)
        }
        "simulate" => {
            let scn: SimulationScenario = serde_json::from_value(m.config.clone())?;
            simulate_resolved(&scn, out, resolve_threads(None)?)
        }
        "predict" => {
            let c: f64 = serde_json::from_value(field("censor_at")?)?;
            cmd_predict(m.input("summary")?, m.input("newdata")?, c, out)
        }
        "diagnose" => {
            let indices: Vec<usize> = serde_json::from_value(field("indices")?)?;
            let max_lag: usize = serde_json::from_value(field("max_lag")?)?;
            cmd_diagnose(m.input("samples")?, &indices, max_lag, out)
        }
        other => Err(Error::Schema(format!("unknown manifest command {other:?}"))),
    }
}

/// Executes parsed arguments.
pub fn run(cli: Cli) -> Result<RunManifest> {
    match cli.command {
        Command::Fit {
            data,
            config,
            response,
            out,
            overrides,
        } => {
            let mut cfg = match &config {
                Some(p) => FitConfig::from_toml(&read_text(p)?)?,
                None => FitConfig::default(),
            };
            overrides.apply_fit(&mut cfg);
            if let Some(r) = response {
                cfg.response = r;
            }
            fit_resolved(&cfg, &data, &out)
        }
        Command::Simulate {
            scenario,
            out,
            threads,
            overrides,
        } => cmd_simulate(&scenario, &out, &overrides, threads),
        Command::Predict {
            summary,
            newdata,
            censor_at,
            out,
        } => cmd_predict(&summary, &newdata, censor_at, &out),
        Command::Diagnose {
            samples,
            indices,
            max_lag,
            out,
        } => cmd_diagnose(&samples, &indices, max_lag, &out),
        Command::Replay { manifest, out } => cmd_replay(&manifest, &out),
    }
}
