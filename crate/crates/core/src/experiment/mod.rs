//! Monte Carlo driver: sample replicates, compute statistics, compare with the
//! limiting theory and persist the results.

pub mod stats;

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::les::{les_deltas, spectral_norm, TestFunction};
use crate::matgen::{sample, BandSpec, EntryLaw, Topology, DEFAULT_DENSE_LIMIT};
use crate::profiles::{PeriodizedProfile, VarianceProfile};
use crate::theory::{limiting_covariance, series_covariance, KernelParams, TheoryVariance};

pub use stats::{normality_diagnostics, Diagnostics};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BANDCLT_THREADS";

/// How `b_n` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// `b_n` given directly.
    Half(usize),
    /// `b_n = ⌊n^e⌋`.
    Exponent(f64),
    /// `b_n = ⌊(n − 1)/2⌋`.
    Full,
}

impl Bandwidth {
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            Bandwidth::Half(b) => Ok(b),
            Bandwidth::Full => Ok(n.saturating_sub(1) / 2),
            Bandwidth::Exponent(e) => {
                if !(0.0..1.0).contains(&e) {
                    return Err(Error::Config(format!("bandwidth exponent {e} outside [0, 1)")));
                }
                // Guard against n^e landing a hair below an integer.
                Ok(((n as f64).powf(e) * (1.0 + 1e-12)).floor() as usize)
            }
        }
    }
}

fn default_law() -> EntryLaw {
    EntryLaw::ComplexGaussian
}
fn default_workers() -> usize {
    1
}
fn default_rho() -> f64 {
    3.0
}
fn default_norm_iters() -> usize {
    50
}
fn default_dense_limit() -> usize {
    DEFAULT_DENSE_LIMIT
}
fn default_profile() -> VarianceProfile {
    VarianceProfile::uniform()
}

/// Experiment description; also the JSON config file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub bandwidth: Bandwidth,
    pub topology: Topology,
    /// Band fraction for `periodic-nu`; defaults to `c_n/n`. Ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default = "default_profile")]
    pub profile: VarianceProfile,
    #[serde(default = "default_law")]
    pub law: EntryLaw,
    pub functions: Vec<TestFunction>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_rho")]
    pub rho_check: f64,
    /// Estimate `‖M‖` for every replicate.
    #[serde(default)]
    pub norm_check: bool,
    #[serde(default = "default_norm_iters")]
    pub norm_iters: usize,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Band fraction used both for the ensemble and for the theory.
    pub fn theory_nu(&self) -> Result<f64> {
        match self.topology {
            Topology::PeriodicNu => {
                let b = self.bandwidth.resolve(self.n)?;
                Ok(self.nu.unwrap_or((2 * b + 1) as f64 / self.n as f64))
            }
            _ => Ok(0.0),
        }
    }

    pub fn band_spec(&self) -> Result<BandSpec> {
        let b = self.bandwidth.resolve(self.n)?;
        let profile = PeriodizedProfile::new(self.profile.clone(), self.theory_nu()?)
            .map_err(|e| Error::Config(e.to_string()))?;
        BandSpec::new(self.n, b, self.topology, profile).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<BandSpec> {
        let spec = self.band_spec()?;
        if self.replicates < 2 {
            return Err(Error::Config("at least two replicates are needed".into()));
        }
        if self.functions.is_empty() {
            return Err(Error::Config("no test functions given".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.rho_check > 0.0) {
            return Err(Error::Config("rho_check must be positive".into()));
        }
        if self.norm_check && self.norm_iters < 10 {
            return Err(Error::Config("norm_iters must be at least 10".into()));
        }
        if self.functions.iter().any(|f| f.degree().is_none()) && self.n > self.dense_limit {
            return Err(Error::Config(format!(
                "analytic test functions need n <= dense_limit = {}; use a polynomial truncation",
                self.dense_limit
            )));
        }
        Ok(spec)
    }
}

/// Per-function results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionReport {
    pub function: String,
    pub mean: Complex64,
    pub variance: f64,
    pub pseudo_variance: Complex64,
    /// `E|X − X̄|⁴ / (E|X − X̄|²)²`.
    pub kurtosis: f64,
    pub theory: Option<TheoryVariance>,
    pub z_score: Option<f64>,
    pub diagnostics: Option<Diagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics_error: Option<String>,
    pub quantiles_re: Vec<f64>,
    pub quantiles_im: Vec<f64>,
}

/// Cross-covariance of two functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossReport {
    pub functions: (String, String),
    pub estimate: Complex64,
    pub theory: Option<Complex64>,
    /// `4 √(Var_i Var_j / N)`.
    pub tolerance: f64,
}

/// Spectral-norm check results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub rho_check: f64,
    pub iterations: usize,
    pub exceedances: usize,
    pub max: f64,
    pub mean: f64,
}

/// Run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
    pub b_n: usize,
    pub c_n: usize,
    pub nu: f64,
    pub timestamp_unix: u64,
}

/// Everything a run produces besides the raw samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub replicates: usize,
    pub functions: Vec<FunctionReport>,
    pub cross_covariances: Vec<CrossReport>,
    pub norm: Option<NormReport>,
}

/// One row of the sample table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub replicate: u64,
    pub function: String,
    pub re: f64,
    pub im: f64,
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: ExperimentReport,
    /// `samples[r][f]`: replicate `r`, function `f`.
    pub samples: Vec<Vec<Complex64>>,
}

impl Outcome {
    pub fn rows(&self) -> Vec<SampleRow> {
        let names: Vec<String> = self.report.config.functions.iter().map(|f| f.to_string()).collect();
        self.samples
            .iter()
            .enumerate()
            .flat_map(|(r, vals)| {
                vals.iter().zip(&names).map(move |(v, name)| SampleRow {
                    replicate: r as u64,
                    function: name.clone(),
                    re: v.re,
                    im: v.im,
                })
            })
            .collect()
    }
}

struct Replicate {
    values: Vec<Complex64>,
    norm: Option<f64>,
}

fn norm_seed(seed: u64, replicate: u64) -> u64 {
    seed ^ replicate.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Workers actually used: the request capped by `BANDCLT_THREADS`.
pub fn effective_workers(requested: usize) -> usize {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&c| c > 0);
    cap.map_or(requested, |c| requested.min(c)).max(1)
}

fn simulate(config: &ExperimentConfig, spec: &BandSpec) -> Result<Vec<Replicate>> {
    let one = |r: u64| -> Result<Replicate> {
        let m = sample(spec, config.law, config.seed, r);
        let values = les_deltas(&m, &config.functions, config.dense_limit)?
            .into_iter()
            .map(|s| s.value)
            .collect();
        let norm = if config.norm_check {
            Some(spectral_norm(&m, config.norm_iters, norm_seed(config.seed, r))?)
        } else {
            None
        };
        Ok(Replicate { values, norm })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(effective_workers(config.workers))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Replicate>> =
        pool.install(|| (0..config.replicates as u64).into_par_iter().map(one).collect());
    let completed = results.iter().filter(|r| r.is_ok()).count();
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                return Err(Error::Partial {
                    completed,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}

fn theory_for(
    f: &TestFunction,
    g: &TestFunction,
    params: &KernelParams,
) -> Option<TheoryVariance> {
    if f.degree().is_some() && g.degree().is_some() {
        series_covariance(f, g, params).ok()
    } else {
        limiting_covariance(f, g, params).ok()
    }
}

/// Runs the experiment. Replicates are independent and seeded by index, and
/// all reductions run in replicate order, so the result does not depend on the
/// number of workers.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let spec = config.validate()?;
    let replicates = simulate(config, &spec)?;
    let nu = config.theory_nu()?;
    let params = KernelParams::new(PeriodizedProfile::new(config.profile.clone(), nu)?);
    let n_rep = replicates.len();
    let columns: Vec<Vec<Complex64>> = (0..config.functions.len())
        .map(|j| replicates.iter().map(|r| r.values[j]).collect())
        .collect();

    let mut functions = Vec::with_capacity(config.functions.len());
    for (f, xs) in config.functions.iter().zip(&columns) {
        let m = stats::moments(xs)?;
        let theory = theory_for(f, f, &params);
        let z_score = theory
            .as_ref()
            .and_then(|t| stats::variance_z_score(m.variance, m.kurtosis, t.value.re, n_rep));
        let (diagnostics, diagnostics_error) = match stats::normality_diagnostics(xs) {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let re: Vec<f64> = xs.iter().map(|x| x.re).collect();
        let im: Vec<f64> = xs.iter().map(|x| x.im).collect();
        functions.push(FunctionReport {
            function: f.to_string(),
            mean: m.mean,
            variance: m.variance,
            pseudo_variance: m.pseudo_variance,
            kurtosis: m.kurtosis,
            theory,
            z_score,
            diagnostics,
            diagnostics_error,
            quantiles_re: stats::quantiles(&re),
            quantiles_im: stats::quantiles(&im),
        });
    }

    let mut cross_covariances = Vec::new();
    for i in 0..config.functions.len() {
        for j in i + 1..config.functions.len() {
            let estimate = stats::cross_covariance(&columns[i], &columns[j])?;
            let theory = theory_for(&config.functions[i], &config.functions[j], &params).map(|t| t.value);
            cross_covariances.push(CrossReport {
                functions: (config.functions[i].to_string(), config.functions[j].to_string()),
                estimate,
                theory,
                tolerance: 4.0 * (functions[i].variance * functions[j].variance / n_rep as f64).sqrt(),
            });
        }
    }

    let norm = config.norm_check.then(|| {
        let norms: Vec<f64> = replicates.iter().filter_map(|r| r.norm).collect();
        NormReport {
            rho_check: config.rho_check,
            iterations: config.norm_iters,
            exceedances: norms.iter().filter(|&&x| x > config.rho_check).count(),
            max: norms.iter().copied().fold(0.0, f64::max),
            mean: norms.iter().sum::<f64>() / norms.len() as f64,
        }
    });

    let report = ExperimentReport {
        config: config.clone(),
        provenance: Provenance {
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            b_n: spec.half_bandwidth(),
            c_n: spec.c_n(),
            nu,
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        },
        replicates: n_rep,
        functions,
        cross_covariances,
        norm,
    };
    Ok(Outcome {
        report,
        samples: replicates.into_iter().map(|r| r.values).collect(),
    })
}

/// Raw samples of every replicate and function, one row each.
pub fn heatmap_data(config: &ExperimentConfig) -> Result<Vec<SampleRow>> {
    Ok(run(config)?.rows())
}

fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes `samples.csv` (`replicate,function,re,im`) atomically.
pub fn write_samples_csv(rows: &[SampleRow], path: &Path) -> Result<()> {
    write_atomic(path, |out| {
        let mut w = csv::Writer::from_writer(out);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    })
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<SampleRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes `report.json` atomically.
pub fn write_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    write_atomic(path, |out| {
        serde_json::to_writer_pretty(&mut *out, report)?;
        out.write_all(b"\n")?;
        Ok(())
    })
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Writes `report.json` and `samples.csv` into `dir`.
pub fn write_outputs(outcome: &Outcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_samples_csv(&outcome.rows(), &dir.join("samples.csv"))?;
    write_report(&outcome.report, &dir.join("report.json"))
}
