use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use ruinsim_core::engine::{ak_estimate, crude_barrier, crude_mc, estimate_with, estimate_with_paths, RunOptions, STEP_CAP};
use ruinsim_core::limits::{conditional_diagnostics, coupling_experiment, CouplingReport, DiagnosticsReport};
use ruinsim_core::tuning::{default_s_grid, select_variance_params, verify_drift, verify_lyapunov, VerificationReport};
use ruinsim_core::{EstimateSummary, IncrementModel, Mode, Overrides, TuningParams};

use crate::config::ExperimentConfig;
use crate::output::{csv_bytes, summary_json, write_file, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyLevel {
    Off,
    Report,
    Strict,
}

/// Command-line settings that apply on top of the config file.
#[derive(Debug, Clone)]
pub struct Flags {
    pub seed: Option<u64>,
    pub shards: Option<usize>,
    pub out: PathBuf,
    pub verify: VerifyLevel,
    pub timing: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Verification(Vec<String>),
    Censoring { b: f64, estimator: &'static str, fraction: f64, limit: f64 },
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Censoring { .. } => 4,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e:#}"),
            CliError::Verification(failed) => write!(f, "verification failed: {}", failed.join("; ")),
            CliError::Censoring { b, estimator, fraction, limit } => {
                write!(f, "censored fraction {fraction} > {limit} for {estimator} at b = {b}")
            }
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

/// Config with flags applied, model built and parameters selected.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub model: IncrementModel,
    pub params: TuningParams,
}

pub fn prepare(mut config: ExperimentConfig, flags: &Flags) -> Result<Prepared, CliError> {
    if let Some(s) = flags.seed {
        config.seed = s;
    }
    if let Some(s) = flags.shards {
        config.shards = s;
    }
    config.validate().map_err(CliError::Config)?;
    let model = config.model.build().context("building the model").map_err(CliError::Config)?;
    let params =
        select_variance_params(&model, config.mode.into(), &config.overrides).context("selecting parameters").map_err(CliError::Config)?;
    Ok(Prepared { config, model, params })
}

fn run_options(c: &ExperimentConfig) -> RunOptions {
    RunOptions { step_cap: c.step_cap.unwrap_or(STEP_CAP) }
}

fn model_json(model: &IncrementModel) -> Value {
    json!({
        "spec": model.spec(),
        "mean_drift": model.mean_drift(),
        "variance": model.variance(),
        "tail_class": model.tail_class(),
    })
}

fn header(p: &Prepared, command: &str, flags: &Flags) -> Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": p.config,
        "flags": { "verify": flags.verify, "timing": flags.timing },
        "step_cap": run_options(&p.config).step_cap,
        "model": model_json(&p.model),
        "params": p.params,
    })
}

/// Lyapunov reports for every barrier, plus drift reports in termination mode.
pub fn verification(p: &Prepared) -> Vec<VerificationReport> {
    let mut out = Vec::new();
    for &b in &p.config.b {
        let grid = default_s_grid(b, p.config.diagnostics.verify_points);
        out.push(verify_lyapunov(&p.model, &p.params, b, &grid));
        if p.params.mode == Mode::TerminationControlled {
            out.push(verify_drift(&p.model, &p.params, b, &grid));
        }
    }
    out
}

fn failures(reports: &[VerificationReport]) -> Vec<String> {
    reports.iter().filter(|r| !r.pass).map(|r| format!("{} at b = {} (worst {})", r.kind, r.b, r.worst)).collect()
}

/// Artifacts written by a command.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub csv: Option<PathBuf>,
    pub json: PathBuf,
    pub rows: Vec<EstimateSummary>,
}

pub fn estimate_rows(p: &Prepared) -> Result<Vec<EstimateSummary>, CliError> {
    let c = &p.config;
    let opts = run_options(c);
    let mut rows = Vec::new();
    for &b in &c.b {
        let is = estimate_with(&p.model, &p.params, b, c.n, c.seed, c.shards, &opts).map_err(runtime)?;
        eprintln!("b = {b:e}  is     mean {:.4e}  se {:.2e}  cv {:.2}  tau {:.1}", is.mean, is.std_error, is.cv, is.mean_tau);
        rows.push(is);
        if c.baselines.crude {
            let barrier = crude_barrier(&p.model, b).map_err(runtime)?;
            let n = c.baselines.crude_n.unwrap_or(c.n);
            let r = crude_mc(&p.model, b, n, barrier, c.seed, c.shards).map_err(runtime)?;
            eprintln!("b = {b:e}  crude  mean {:.4e}  se {:.2e}  hits {}", r.mean, r.std_error, r.hits);
            rows.push(r);
        }
        if c.baselines.ak {
            let r = ak_estimate(&p.model, b, c.n, c.seed, c.shards).map_err(runtime)?;
            eprintln!("b = {b:e}  ak     mean {:.4e}  se {:.2e}", r.mean, r.std_error);
            rows.push(r);
        }
    }
    Ok(rows)
}

fn check_censoring(c: &ExperimentConfig, rows: &[EstimateSummary]) -> Result<(), CliError> {
    match rows.iter().find(|r| r.censored_frac > c.max_censored_frac) {
        Some(r) => {
            Err(CliError::Censoring { b: r.b, estimator: r.estimator.label(), fraction: r.censored_frac, limit: c.max_censored_frac })
        }
        None => Ok(()),
    }
}

pub fn run_estimate(p: &Prepared, flags: &Flags, command: &str) -> Result<Artifacts, CliError> {
    let rows = estimate_rows(p)?;
    let reports = if flags.verify == VerifyLevel::Off { Vec::new() } else { verification(p) };
    let csv = p.config.artifact(&flags.out, ".csv");
    let json_path = p.config.artifact(&flags.out, ".json");
    write_file(&csv, &csv_bytes(&rows, flags.timing).map_err(runtime)?).map_err(runtime)?;
    let mut doc = header(p, command, flags);
    doc["rows"] = rows.iter().map(|r| summary_json(r, flags.timing)).collect::<anyhow::Result<Vec<_>>>().map_err(runtime)?.into();
    doc["verification"] = serde_json::to_value(&reports).map_err(runtime)?;
    write_json(&json_path, &doc).map_err(runtime)?;
    eprintln!("wrote {} and {}", csv.display(), json_path.display());
    let failed = failures(&reports);
    if flags.verify == VerifyLevel::Strict && !failed.is_empty() {
        return Err(CliError::Verification(failed));
    }
    check_censoring(&p.config, &rows)?;
    Ok(Artifacts { csv: Some(csv), json: json_path, rows })
}

pub fn run_verify(p: &Prepared, flags: &Flags) -> Result<Artifacts, CliError> {
    let reports = verification(p);
    for r in &reports {
        eprintln!("{} b = {:e}: worst {:.6e} -> {}", r.kind, r.b, r.worst, if r.pass { "PASS" } else { "FAIL" });
    }
    let json_path = p.config.artifact(&flags.out, ".verify.json");
    let mut doc = header(p, "verify", flags);
    doc["verification"] = serde_json::to_value(&reports).map_err(runtime)?;
    write_json(&json_path, &doc).map_err(runtime)?;
    let failed = failures(&reports);
    if flags.verify == VerifyLevel::Strict && !failed.is_empty() {
        return Err(CliError::Verification(failed));
    }
    Ok(Artifacts { csv: None, json: json_path, rows: Vec::new() })
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsEntry {
    pub b: f64,
    pub conditional: Option<DiagnosticsReport>,
    pub coupling: Option<CouplingReport>,
}

pub fn coupling_params(p: &Prepared, epsilon: f64, a_star_star: f64) -> Result<TuningParams, CliError> {
    let o = Overrides { a_star_star: Some(a_star_star), ..p.config.overrides.clone() };
    select_variance_params(&p.model, Mode::TotalVariation { epsilon }, &o)
        .context("selecting total-variation parameters")
        .map_err(CliError::Config)
}

pub fn run_diagnose(p: &Prepared, flags: &Flags) -> Result<Artifacts, CliError> {
    let c = &p.config;
    let opts = run_options(c);
    let tv = match &c.diagnostics.coupling {
        Some(cp) => Some((coupling_params(p, cp.epsilon, cp.a_star_star)?, cp.n.unwrap_or(c.n))),
        None => None,
    };
    let conditional_on = c.diagnostics.conditional || tv.is_none();
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    for &b in &c.b {
        let conditional = if conditional_on {
            let (summary, paths) = estimate_with_paths(&p.model, &p.params, b, c.n, c.seed, c.shards, &opts).map_err(runtime)?;
            let d = conditional_diagnostics(&paths, &p.model, b, c.seed).map_err(runtime)?;
            eprintln!(
                "b = {b:e}  KS tau {:.4}  overshoot {:.4}  midpoint {}  ess {:.0}",
                d.tau.ks,
                d.overshoot.ks,
                d.midpoint.as_ref().map_or("n/a".into(), |m| format!("{:.4}", m.ks)),
                d.effective_sample_size
            );
            rows.push(summary);
            Some(d)
        } else {
            None
        };
        let coupling = match &tv {
            Some((params, n)) => {
                let r = coupling_experiment(&p.model, params, b, *n, c.seed, c.shards, opts.step_cap).map_err(runtime)?;
                eprintln!("b = {b:e}  Q(tau = N_b) {:.4}  KS N_b {:.4}", r.equal_fraction, r.ks_n_b);
                Some(r)
            }
            None => None,
        };
        entries.push(DiagnosticsEntry { b, conditional, coupling });
    }
    let json_path = p.config.artifact(&flags.out, ".diagnostics.json");
    let mut doc = header(p, "diagnose", flags);
    if let Some((params, n)) = &tv {
        doc["coupling_params"] = json!({ "params": params, "n": n });
    }
    doc["rows"] = rows.iter().map(|r| summary_json(r, flags.timing)).collect::<anyhow::Result<Vec<_>>>().map_err(runtime)?.into();
    doc["diagnostics"] = serde_json::to_value(&entries).map_err(runtime)?;
    write_json(&json_path, &doc).map_err(runtime)?;
    check_censoring(c, &rows)?;
    Ok(Artifacts { csv: None, json: json_path, rows })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::load(path).map_err(CliError::Config)
}
