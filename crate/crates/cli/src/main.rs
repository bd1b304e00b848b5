use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use bandclt::experiment::{self, Bandwidth, ExperimentConfig};
use bandclt::matgen::{self, Topology};
use bandclt::profiles::{PeriodizedProfile, VarianceProfile};
use bandclt::theory::{self, KernelParams};
use bandclt::{Error, TestFunction};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

mod table;

/// Exit code for unusable input: bad flags, configs or reports that never reach compute.
const EXIT_CONFIG: u8 = 2;
/// Exit code for failures after input was accepted.
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "bandclt", version, about = "Eigenvalue statistics of non-Hermitian random band matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write report.json and samples.csv.
    Simulate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a closed-form or limiting quantity.
    Theory(TheoryArgs),
    /// Check a report (or a fresh run) against the limiting theory.
    Compare {
        /// Existing report.json; without it the experiment is run in memory.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        json: bool,
    },
    /// Print the variance table of a report.
    Table {
        /// Existing report.json; without it the experiment is run in memory.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        json: bool,
    },
    /// Write one sampled matrix in the `bandmat v1` binary format.
    Dump {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Replicate index to sample.
        #[arg(long, default_value_t = 0)]
        replicate: u64,
        /// Output file; a JSON sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

/// Experiment description: a JSON config file, flags, or both (flags win).
#[derive(Args, Debug, Default)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// `b_n = ⌊n^e⌋`.
    #[arg(long, conflicts_with_all = ["half", "b"])]
    bandwidth_exponent: Option<f64>,
    /// Full band, `b_n = ⌊(n − 1)/2⌋`.
    #[arg(long, conflicts_with = "b")]
    half: bool,
    /// Explicit half-bandwidth `b_n`.
    #[arg(long)]
    b: Option<usize>,
    #[arg(long, value_parser = ["periodic-nu", "periodic-zero", "nonperiodic-zero"])]
    topology: Option<String>,
    /// Band fraction for periodic-nu; defaults to `c_n/n`.
    #[arg(long)]
    nu: Option<f64>,
    /// `uniform`, inline profile JSON, or `@file.json`.
    #[arg(long)]
    profile: Option<String>,
    /// Comma-separated test functions, e.g. `z,z2,exp`.
    #[arg(long)]
    functions: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Estimate the spectral norm of every replicate.
    #[arg(long)]
    norm_check: bool,
    #[arg(long)]
    rho_check: Option<f64>,
}

#[derive(Args, Debug)]
struct TheoryArgs {
    /// kernel, monomial_variance, sinc_integral, irwin_hall, eulerian or covariance.
    quantity: String,
    #[arg(long)]
    l: Option<u32>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    nu: f64,
    #[arg(long, default_value = "uniform")]
    profile: String,
    /// Complex `z` for the kernel, e.g. `1.5+0.2i`.
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    /// Test functions for `covariance`.
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    json: bool,
}

/// Input that was rejected before any computation started.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<ConfigError>() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidProfile(_) | Error::InvalidSpec(_)) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate { exp, out, json } => simulate(&exp, &out, json),
        Command::Theory(args) => theory_query(&args),
        Command::Compare { report, exp, json } => {
            let report = load_or_run(report.as_deref(), &exp)?;
            print_out(&table::comparison(&report), json, table::render_comparison)
        }
        Command::Table { report, exp, json } => {
            let report = load_or_run(report.as_deref(), &exp)?;
            print_out(&table::variance_rows(&report), json, table::render_variance)
        }
        Command::Dump {
            exp,
            replicate,
            out,
            json,
        } => dump(&exp, replicate, &out, json),
    }
}

fn print_out<T: serde::Serialize>(value: &T, json: bool, render: fn(&T) -> String) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        print!("{}", render(value));
    }
    Ok(())
}

fn parse_profile(s: &str) -> Result<VarianceProfile> {
    let text = if s == "uniform" {
        return Ok(VarianceProfile::uniform());
    } else if let Some(path) = s.strip_prefix('@') {
        std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read profile {path}: {e}")))?
    } else {
        s.to_string()
    };
    serde_json::from_str(&text).map_err(|e| config_err(format!("invalid profile: {e}")))
}

fn parse_functions(s: &str) -> Result<Vec<TestFunction>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|e: Error| config_err(e.to_string())))
        .collect()
}

fn parse_topology(s: &str) -> Result<Topology> {
    serde_json::from_value(json!(s)).map_err(|_| config_err(format!("unknown topology {s}")))
}

impl ExperimentArgs {
    fn bandwidth(&self) -> Option<Bandwidth> {
        if let Some(e) = self.bandwidth_exponent {
            Some(Bandwidth::Exponent(e))
        } else if self.half {
            Some(Bandwidth::Full)
        } else {
            self.b.map(Bandwidth::Half)
        }
    }

    /// The config file with flag overrides applied, or a config built from
    /// flags alone. Validated before returning.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
                ExperimentConfig::from_json(&text).map_err(|e| config_err(e.to_string()))?
            }
            None => {
                let n = self.n.ok_or_else(|| config_err("--n is required without --config"))?;
                let bandwidth = self.bandwidth().ok_or_else(|| {
                    config_err("one of --bandwidth-exponent, --half or --b is required without --config")
                })?;
                let topology = if matches!(bandwidth, Bandwidth::Full) { "periodic-nu" } else { "periodic-zero" };
                let functions = self.functions.as_deref().unwrap_or("z");
                ExperimentConfig::from_json(
                    &json!({
                        "n": n,
                        "bandwidth": bandwidth,
                        "topology": topology,
                        "functions": functions.split(',').map(str::trim).collect::<Vec<_>>(),
                        "replicates": 100,
                        "seed": 0,
                    })
                    .to_string(),
                )
                .map_err(|e| config_err(e.to_string()))?
            }
        };
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(b) = self.bandwidth() {
            cfg.bandwidth = b;
        }
        if let Some(t) = &self.topology {
            cfg.topology = parse_topology(t)?;
        }
        if self.nu.is_some() {
            cfg.nu = self.nu;
        }
        if let Some(p) = &self.profile {
            cfg.profile = parse_profile(p)?;
        }
        if let Some(f) = &self.functions {
            cfg.functions = parse_functions(f)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if self.norm_check {
            cfg.norm_check = true;
        }
        if let Some(r) = self.rho_check {
            cfg.rho_check = r;
        }
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }
}

fn simulate(exp: &ExperimentArgs, out: &Path, json: bool) -> Result<()> {
    let cfg = exp.resolve()?;
    let outcome = experiment::run(&cfg)?;
    experiment::write_outputs(&outcome, out)
        .with_context(|| format!("writing results to {}", out.display()))?;
    eprintln!(
        "wrote {} and {}",
        out.join("report.json").display(),
        out.join("samples.csv").display()
    );
    print_out(&table::variance_rows(&outcome.report), json, table::render_variance)
}

fn load_or_run(report: Option<&Path>, exp: &ExperimentArgs) -> Result<experiment::ExperimentReport> {
    let report = match report {
        Some(path) => experiment::read_report(path).map_err(|e| anyhow!(e))?,
        None => experiment::run(&exp.resolve()?)?.report,
    };
    if report.functions.is_empty() {
        bail!("report contains no test functions");
    }
    Ok(report)
}

fn dump(exp: &ExperimentArgs, replicate: u64, out: &Path, json: bool) -> Result<()> {
    let cfg = exp.resolve()?;
    let spec = cfg.band_spec()?;
    let m = matgen::sample(&spec, cfg.law, cfg.seed, replicate);
    matgen::write_dump(out, &m)?;
    let summary = json!({
        "path": out,
        "sidecar": matgen::sidecar_path(out),
        "n": spec.n(),
        "b_n": spec.half_bandwidth(),
        "seed": cfg.seed,
        "replicate": replicate,
    });
    if json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!("wrote {} (n = {}, b_n = {})", out.display(), spec.n(), spec.half_bandwidth());
    }
    Ok(())
}

fn required<T: Copy>(v: Option<T>, flag: &str, quantity: &str) -> Result<T> {
    v.ok_or_else(|| config_err(format!("{quantity} needs --{flag}")))
}

fn parse_point(s: Option<&str>, flag: &str) -> Result<Complex64> {
    let s = s.ok_or_else(|| config_err(format!("kernel needs --{flag}")))?;
    bandclt::les::parse_complex(s).map_err(|e| config_err(e.to_string()))
}

fn theory_query(a: &TheoryArgs) -> Result<()> {
    let q = a.quantity.as_str();
    let periodized = || -> Result<PeriodizedProfile> {
        PeriodizedProfile::new(parse_profile(&a.profile)?, a.nu).map_err(|e| config_err(e.to_string()))
    };
    let (params, value, method, err) = match q {
        "sinc_integral" => {
            let l = required(a.l, "l", q)?;
            let exact = theory::sinc_power_integral_exact(l).map_err(|e| config_err(e.to_string()))?;
            let v = theory::sinc_power_integral(l)?;
            (json!({ "l": l, "exact": exact.to_string() }), json!(v), json!("closed_form"), 0.0)
        }
        "irwin_hall" => {
            let m = required(a.m, "m", q)?;
            let x = required(a.x, "x", q)?;
            let v = theory::irwin_hall_pdf(m, x).map_err(|e| config_err(e.to_string()))?;
            (json!({ "m": m, "x": x }), json!(v), json!("closed_form"), 0.0)
        }
        "eulerian" => {
            let n = required(a.n, "n", q)?;
            let m = required(a.m, "m", q)?;
            let v = theory::eulerian(n, m).map_err(|e| config_err(e.to_string()))?;
            (json!({ "n": n, "m": m }), json!(v), json!("closed_form"), 0.0)
        }
        "monomial_variance" => {
            let l = required(a.l, "l", q)?;
            let p = periodized()?;
            let v = theory::monomial_variance(p.base(), a.nu, l)?;
            (
                json!({ "l": l, "nu": a.nu, "profile": p.base() }),
                json!(v.value.re),
                json!(v.method),
                v.trunc_error,
            )
        }
        "kernel" => {
            let z = parse_point(a.z.as_deref(), "z")?;
            let eta = parse_point(a.eta.as_deref(), "eta")?;
            let v = theory::kernel(&KernelParams::new(periodized()?), z, eta)?;
            (
                json!({ "z": [z.re, z.im], "eta": [eta.re, eta.im], "nu": a.nu, "profile": a.profile }),
                json!([v.value.re, v.value.im]),
                json!(v.method),
                v.trunc_error,
            )
        }
        "covariance" => {
            let f = a.f.as_deref().ok_or_else(|| config_err("covariance needs --f"))?;
            let g = a.g.as_deref().unwrap_or(f);
            let f: TestFunction = f.parse().map_err(|e: Error| config_err(e.to_string()))?;
            let g: TestFunction = g.parse().map_err(|e: Error| config_err(e.to_string()))?;
            let v = theory::limiting_covariance(&f, &g, &KernelParams::new(periodized()?))?;
            (
                json!({ "f": f.to_string(), "g": g.to_string(), "nu": a.nu, "profile": a.profile }),
                json!([v.value.re, v.value.im]),
                json!(v.method),
                v.trunc_error,
            )
        }
        other => return Err(config_err(format!(
            "unknown quantity {other}; expected one of kernel, monomial_variance, sinc_integral, irwin_hall, eulerian, covariance"
        ))),
    };
    let answer = json!({
        "quantity": q,
        "params": params,
        "value": value,
        "method": method,
        "trunc_error": err,
    });
    if a.json {
        println!("{}", serde_json::to_string_pretty(&answer)?);
    } else {
        println!("{q} = {value}  ({}, error <= {err:.3e})", method.as_str().unwrap_or_default());
    }
    Ok(())
}
