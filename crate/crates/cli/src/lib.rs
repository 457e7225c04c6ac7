//! Command implementations behind the `qbcharge` binary.

pub mod config;
pub mod output;
pub mod selftest;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qbcharge::analytic::{ho_energy_form, tls_energy_form};
use qbcharge::metrics::{charging_time_closed, ChargingReport};
use qbcharge::models::{ModelKind, Params};
use qbcharge::scenarios::{figure, reduced_charging_time, run_scenario, sweep_detuning, Scenario, Solver, Table};

use config::{canonical_config, parse_config, Config, ConfigError, SweepTarget};
use output::{manifest_path, write_table, RunManifest};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    /// Bad input that is not part of a scenario file (paths, flags, environment).
    Usage(String),
    Solver(qbcharge::Error),
    Io { path: PathBuf, source: io::Error },
    SelftestFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Solver(_) | CliError::Io { .. } | CliError::SelftestFailed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Usage(m) => write!(f, "config error: {m}"),
            CliError::Solver(e) => write!(f, "solver error: {e}"),
            CliError::Io { path, source } => write!(f, "cannot write {}: {source}", path.display()),
            CliError::SelftestFailed(n) => write!(f, "selftest: {n} check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<qbcharge::Error> for CliError {
    fn from(e: qbcharge::Error) -> Self {
        CliError::Solver(e)
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Rejects a malformed `QB_THREADS` before any work starts.
pub fn check_thread_env() -> Result<(), CliError> {
    match std::env::var("QB_THREADS") {
        Ok(v) if !matches!(v.trim().parse::<usize>(), Ok(n) if n > 0) => {
            Err(CliError::Usage(format!("QB_THREADS must be a positive integer, found '{v}'")))
        }
        _ => Ok(()),
    }
}

pub fn load_config(path: &Path) -> Result<Config, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

/// Writes a table and its manifest; returns the CSV path.
fn emit(path: &Path, table: &Table, mut manifest: RunManifest, started: Instant) -> Result<PathBuf, CliError> {
    write_table(path, table).map_err(io_err(path))?;
    manifest.outputs.push(path.to_path_buf());
    manifest.warnings.extend(table.warnings.iter().cloned());
    manifest.wall_time = started.elapsed();
    let mp = manifest_path(path);
    manifest.write(&mp).map_err(io_err(&mp))?;
    Ok(path.to_path_buf())
}

fn output_path(cfg: &Config, config_path: &Path, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.scenario.output.clone())
        .unwrap_or_else(|| config_path.with_extension("csv"))
}

fn manifest_for(command: &str, cfg: &Config) -> RunManifest {
    RunManifest {
        command: command.into(),
        canonical_config: canonical_config(cfg),
        seed: (cfg.scenario.solver == Solver::Stochastic).then_some(cfg.scenario.stochastic.seed),
        ..RunManifest::default()
    }
}

/// `simulate`: one time series from a scenario without a sweep.
pub fn simulate(config_path: &Path, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let cfg = load_config(config_path)?;
    if cfg.scenario.sweep.is_some() {
        return Err(CliError::Usage("the scenario has a [sweep] section; use the sweep command".into()));
    }
    let table = run_scenario(&cfg.scenario)?.to_table(&cfg.scenario.observables)?;
    emit(&output_path(&cfg, config_path, out), &table, manifest_for("simulate", &cfg), started)
}

/// `sweep`: one row per grid point.
pub fn sweep(config_path: &Path, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let cfg = load_config(config_path)?;
    if cfg.scenario.sweep.is_none() {
        return Err(CliError::Usage("the scenario has no [sweep] section".into()));
    }
    let table = match cfg.target {
        SweepTarget::Final => run_scenario(&cfg.scenario)?.to_table(&[])?,
        SweepTarget::DetuningMax => sweep_detuning(&cfg.scenario)?,
    };
    emit(&output_path(&cfg, config_path, out), &table, manifest_for("sweep", &cfg), started)
}

#[derive(Clone, Debug)]
pub struct ChargingTimeArgs {
    pub kind: ModelKind,
    pub params: Params,
    pub n: u32,
    pub cutoff: Option<usize>,
}

/// How a charging time was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TauMethod {
    ClosedForm,
    BlockReduction,
}

/// Closed form where one exists, otherwise the exact block reduction.
pub fn charging_time(a: &ChargingTimeArgs) -> Result<(ChargingReport, TauMethod), CliError> {
    a.params.validate()?;
    let closed = match a.kind {
        ModelKind::TwoTls if a.params.is_resonant() => Some(tls_energy_form(&a.params)?),
        ModelKind::TwoHo if a.params.is_resonant() => Some(ho_energy_form(&a.params)?),
        _ => None,
    };
    Ok(match closed {
        Some(form) => (charging_time_closed(&form, a.n)?, TauMethod::ClosedForm),
        None => (reduced_charging_time(a.kind, a.params, a.cutoff, a.n)?.report, TauMethod::BlockReduction),
    })
}

pub fn format_report(r: &ChargingReport, method: TauMethod) -> String {
    let method = match method {
        TauMethod::ClosedForm => "closed_form",
        TauMethod::BlockReduction => "block_reduction",
    };
    format!(
        "tau = {:.10}\nn = {}\ne_ss = {:.10}\ne_max_transient = {:.10}\ngamma_C = {}\nconverged = {}\nhorizon = {:.6}\nmethod = {method}\n",
        r.tau, r.n, r.e_ss, r.e_max_transient, r.gamma_c, r.converged, r.horizon
    )
}

/// `figure`: every table of a named figure, as `DIR/<name>_<table>.csv`.
pub fn figure_command(name: &str, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    if !qbcharge::scenarios::FIGURES.contains(&name) {
        return Err(CliError::Usage(format!(
            "unknown figure '{name}' (known: {})",
            qbcharge::scenarios::FIGURES.join(", ")
        )));
    }
    let data = figure(name)?;
    let mut written = Vec::new();
    for (table_name, table) in &data.tables {
        let path = dir.join(format!("{name}_{table_name}.csv"));
        let manifest = RunManifest {
            command: "figure".into(),
            canonical_config: format!("figure = {name}\ntable = {table_name}\n"),
            ..RunManifest::default()
        };
        written.push(emit(&path, table, manifest, started)?);
    }
    Ok(written)
}

/// A scenario with every default spelled out, for use as a template.
pub fn default_config_text() -> String {
    canonical_config(&Config {
        scenario: Scenario::default(),
        target: SweepTarget::Final,
    })
}
