//! Experiment definitions: a model, a solver and a time grid or parameter
//! sweep, plus the canned figure runs.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use indexmap::IndexMap;
use rayon::prelude::*;

use crate::analytic::{
    self, branch_constants, charging_time_asymptotic, ho_closed_detuned, ho_detuned_drive_max, ho_energy_form,
    tls_energy_form, tls_ergotropy_closed, tls_ergotropy_from_moments, tls_sigma_minus_closed, DetunedCase, Regime,
};
use crate::blocks;
use crate::error::{invalid, Error, Result};
use crate::lindblad::{battery_observables, integrate_with, steady_state, IntegrateOptions};
use crate::metrics::{self, charging_time, charging_time_closed, ChargingReport};
use crate::models::{self, build, escalate_cutoff, ModelKind, ModelSpec, Params, FOCK_TAIL_TOL};
use crate::moments::{evolve_moments, ho_detuned_moment_system, ho_resonant_moment_system, tls_moment_systems};
use crate::opalg::C64;
use crate::series::{self, linspace, logspace, TimeSeries};
use crate::stochastic::{ensemble_run, Scheme, TrajectoryConfig, STABILITY_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Lindblad,
    Moments,
    Analytic,
    Stochastic,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Lindblad => "lindblad",
            Solver::Moments => "moments",
            Solver::Analytic => "analytic",
            Solver::Stochastic => "stochastic",
        }
    }
}

impl FromStr for Solver {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lindblad" => Ok(Solver::Lindblad),
            "moments" => Ok(Solver::Moments),
            "analytic" => Ok(Solver::Analytic),
            "stochastic" => Ok(Solver::Stochastic),
            _ => Err(format!("unknown solver '{s}' (lindblad, moments, analytic, stochastic)")),
        }
    }
}

/// Sweep grid specification.
#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    Linspace { a: f64, b: f64, n: usize },
    /// Endpoints are values, not exponents.
    Logspace { a: f64, b: f64, n: usize },
    List(Vec<f64>),
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Linspace { a, b, n } => linspace(*a, *b, *n),
            GridSpec::Logspace { a, b, n } => logspace(*a, *b, *n),
            GridSpec::List(v) => v.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let GridSpec::Logspace { a, b, .. } = self {
            if !(*a > 0.0 && *b > 0.0) {
                return Err(invalid("sweep", "logspace endpoints must be positive"));
            }
        }
        let v = self.values();
        if v.is_empty() {
            return Err(invalid("sweep", "grid is empty"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid("sweep", "grid has non-finite values"));
        }
        let up = v.windows(2).all(|w| w[1] > w[0]);
        let down = v.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(invalid("sweep", "grid must be strictly monotone"));
        }
        Ok(())
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Linspace { a, b, n } => write!(f, "linspace({a:?}, {b:?}, {n})"),
            GridSpec::Logspace { a, b, n } => write!(f, "logspace({a:?}, {b:?}, {n})"),
            GridSpec::List(v) => {
                let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "list({})", items.join(", "))
            }
        }
    }
}

/// Swept parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVar {
    GammaC,
    F,
    G,
    DeltaCd,
    DeltaBd,
    /// Charger detuned, drive resonant with the battery.
    DeltaCb,
    /// Charger and battery resonant, both detuned from the drive.
    DeltaDrive,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::GammaC => "gamma_C",
            SweepVar::F => "F",
            SweepVar::G => "g",
            SweepVar::DeltaCd => "delta_Cd",
            SweepVar::DeltaBd => "delta_Bd",
            SweepVar::DeltaCb => "delta_CB",
            SweepVar::DeltaDrive => "delta_drive",
        }
    }

    pub fn apply(self, mut p: Params, v: f64) -> Params {
        match self {
            SweepVar::GammaC => p.gamma_c = v,
            SweepVar::F => p.f = v,
            SweepVar::G => p.g = v,
            SweepVar::DeltaCd => p.delta_cd = v,
            SweepVar::DeltaBd => p.delta_bd = v,
            SweepVar::DeltaCb => {
                p.delta_cd = v;
                p.delta_bd = 0.0;
            }
            SweepVar::DeltaDrive => {
                p.delta_cd = v;
                p.delta_bd = v;
            }
        }
        p
    }
}

impl FromStr for SweepVar {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            SweepVar::GammaC,
            SweepVar::F,
            SweepVar::G,
            SweepVar::DeltaCd,
            SweepVar::DeltaBd,
            SweepVar::DeltaCb,
            SweepVar::DeltaDrive,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| format!("unknown sweep variable '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub grid: GridSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticSettings {
    /// `None` selects the step automatically.
    pub dt: Option<f64>,
    pub n_traj: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for StochasticSettings {
    fn default() -> Self {
        Self {
            dt: None,
            n_traj: 1000,
            seed: 1,
            scheme: Scheme::MeasurementNonlinear,
        }
    }
}

/// Largest step of the automatic stochastic step policy.
pub const STOCHASTIC_DT_MAX: f64 = 2.5e-4;

pub const KNOWN_OBSERVABLES: [&str; 7] = [
    series::ENERGY,
    series::ERGOTROPY,
    series::ENTROPY,
    series::SZ_B,
    series::N_B,
    series::RE_LOWER_B,
    series::IM_LOWER_B,
];

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub kind: ModelKind,
    pub params: Params,
    /// Fock cutoff; chosen and validated automatically when `None`.
    pub cutoff: Option<usize>,
    pub solver: Solver,
    pub observables: Vec<String>,
    pub t_max: f64,
    pub n_t: usize,
    /// Exponent of the charging-time threshold.
    pub n: u32,
    pub sweep: Option<Sweep>,
    pub stochastic: StochasticSettings,
    pub output: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            kind: ModelKind::TwoTls,
            params: Params::default(),
            cutoff: None,
            solver: Solver::Lindblad,
            observables: vec![series::ENERGY.into(), series::ERGOTROPY.into()],
            t_max: 30.0,
            n_t: 301,
            n: 1,
            sweep: None,
            stochastic: StochasticSettings::default(),
            output: None,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(invalid("t_max", "must be positive"));
        }
        if self.n_t < 2 {
            return Err(invalid("n_t", "need at least two time points"));
        }
        if self.n < 1 {
            return Err(invalid("n", "must be a positive integer"));
        }
        if let ModelKind::StarTls(k) = self.kind {
            if k == 0 || k > models::MAX_STAR_BATTERIES {
                return Err(Error::TooManyBatteries(k));
            }
        }
        if let Some(c) = self.cutoff {
            if c < 2 {
                return Err(Error::CutoffTooSmall {
                    cutoff: c,
                    reason: "at least two Fock levels are required".into(),
                });
            }
        }
        if let Some(s) = &self.sweep {
            s.grid.validate()?;
        }
        for o in &self.observables {
            if !KNOWN_OBSERVABLES.contains(&o.as_str()) {
                return Err(invalid("observables", format!("unknown observable '{o}'")));
            }
        }
        match (self.solver, self.kind) {
            (Solver::Moments, ModelKind::TlsHo | ModelKind::StarTls(_)) => Err(Error::Incompatible(format!(
                "moments solver is unavailable for {}",
                self.kind.name()
            ))),
            (Solver::Analytic, ModelKind::TlsHo | ModelKind::StarTls(_)) => Err(Error::Incompatible(format!(
                "no closed form exists for {}",
                self.kind.name()
            ))),
            _ => Ok(()),
        }
    }

    pub fn t_grid(&self) -> Vec<f64> {
        linspace(0.0, self.t_max, self.n_t)
    }
}

/// Column-oriented table; the first column is the abscissa.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: IndexMap<String, Vec<f64>>,
    /// Standard errors keyed like `columns`.
    pub errors: IndexMap<String, Vec<f64>>,
    pub meta: IndexMap<String, String>,
    pub warnings: Vec<String>,
}

impl Table {
    pub fn with_abscissa(name: &str, values: Vec<f64>) -> Self {
        let mut t = Self::default();
        t.columns.insert(name.into(), values);
        t
    }

    pub fn rows(&self) -> usize {
        self.columns.values().next().map_or(0, |c| c.len())
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.rows() {
            return Err(Error::DimMismatch {
                expected: self.rows(),
                found: values.len(),
            });
        }
        self.columns.insert(name.into(), values);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(|v| v.as_slice())
    }

    /// Table view of a time series, keeping the named columns (all when empty).
    pub fn from_series(s: &TimeSeries, keep: &[String]) -> Result<Self> {
        let mut t = Self::with_abscissa("t", s.times.clone());
        for (name, col) in &s.columns {
            if keep.is_empty() || keep.iter().any(|k| k == name) {
                t.columns.insert(name.clone(), col.clone());
                if let Some(e) = s.errors.get(name) {
                    t.errors.insert(name.clone(), e.clone());
                }
            }
        }
        for k in keep {
            if !s.columns.contains_key(k) {
                return Err(Error::Incompatible(format!(
                    "observable '{k}' is not available from solver '{}'",
                    s.meta.get("solver").map(String::as_str).unwrap_or("?")
                )));
            }
        }
        t.meta = s.meta.clone();
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioOutput {
    Series(TimeSeries),
    Sweep(Table),
}

impl ScenarioOutput {
    pub fn to_table(&self, keep: &[String]) -> Result<Table> {
        match self {
            ScenarioOutput::Series(s) => Table::from_series(s, keep),
            ScenarioOutput::Sweep(t) => Ok(t.clone()),
        }
    }
}

/// Runs `work` on a pool capped by `QB_THREADS`, or on the global pool.
pub fn with_thread_limit<T: Send>(work: impl FnOnce() -> T + Send) -> Result<T> {
    let limit = std::env::var("QB_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    match limit {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Incompatible(format!("thread pool: {e}")))?
            .install(work)),
        None => Ok(work()),
    }
}

fn context(e: Error, what: &str) -> Error {
    match e {
        Error::Incompatible(msg) => Error::Incompatible(format!("{what}: {msg}")),
        other => other,
    }
}

/// Runs a scenario: a time series for a single point, a table for a sweep.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutput> {
    s.validate()?;
    match &s.sweep {
        None => simulate(s.kind, s.params, s.cutoff, s.solver, &s.t_grid(), &s.stochastic)
            .map(ScenarioOutput::Series)
            .map_err(|e| context(e, &format!("{} with {}", s.kind.name(), s.solver.name()))),
        Some(sw) => run_sweep(s, sw).map(ScenarioOutput::Sweep),
    }
}

fn run_sweep(s: &Scenario, sw: &Sweep) -> Result<Table> {
    let values = sw.grid.values();
    let t_grid = s.t_grid();
    let points: Vec<Result<SweepRow>> = with_thread_limit(|| {
        values
            .par_iter()
            .map(|&v| sweep_point(s, sw.var.apply(s.params, v), &t_grid))
            .collect()
    })?;
    let mut table = Table::with_abscissa(sw.var.name(), values.clone());
    let mut cols: IndexMap<String, Vec<f64>> = IndexMap::new();
    for (k, p) in points.into_iter().enumerate() {
        let (row, warning) = p.map_err(|e| context(e, &format!("{} = {}", sw.var.name(), values[k])))?;
        for (name, v) in row {
            cols.entry(name).or_default().push(v);
        }
        if let Some(w) = warning {
            table.warnings.push(format!("{} = {}: {w}", sw.var.name(), values[k]));
        }
    }
    for (name, col) in cols {
        table.push_column(name, col)?;
    }
    table.meta.insert("model".into(), s.kind.name());
    table.meta.insert("solver".into(), s.solver.name().into());
    table.meta.insert("n".into(), s.n.to_string());
    table.meta.insert("t_max".into(), s.t_max.to_string());
    Ok(table)
}

/// One sweep row and an optional warning.
type SweepRow = (Vec<(String, f64)>, Option<String>);

/// Per sweep point: the final value of each observable and the charging time.
fn sweep_point(s: &Scenario, p: Params, t_grid: &[f64]) -> Result<SweepRow> {
    let series = simulate(s.kind, p, s.cutoff, s.solver, t_grid, &s.stochastic)?;
    let mut row = Vec::new();
    for o in &s.observables {
        let v = series
            .last(o)
            .ok_or_else(|| Error::Incompatible(format!("observable '{o}' is not available")))?;
        row.push((format!("{o}_final"), v));
    }
    let (tau, warning) = match sweep_charging_time(s, p, &series) {
        Ok(r) => (r.tau, None),
        Err(e @ (Error::NotConverged { .. } | Error::InvalidParameter { .. } | Error::RequiresResonance { .. })) => {
            (f64::NAN, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    row.push(("tau".into(), tau));
    Ok((row, warning))
}

fn sweep_charging_time(s: &Scenario, p: Params, series: &TimeSeries) -> Result<ChargingReport> {
    if s.solver == Solver::Analytic {
        return match s.kind {
            ModelKind::TwoTls => charging_time_closed(&tls_energy_form(&p)?, s.n),
            ModelKind::TwoHo => charging_time_closed(&ho_energy_form(&p)?, s.n),
            _ => Err(Error::Incompatible("no closed form".into())),
        };
    }
    if s.kind == ModelKind::TlsHo {
        match reduced_charging_time(s.kind, p, s.cutoff, s.n) {
            Ok(r) => return Ok(r.report),
            Err(Error::Incompatible(_)) => {
                return plateau_charging_time(s.kind, p, s.cutoff, s.n, &PlateauOptions::for_params(&p, s.n))
                    .map(|r| r.report)
            }
            Err(e) => return Err(e),
        }
    }
    let e_ss = steady_energy(s.kind, p, s.cutoff)?;
    charging_time(series, e_ss, s.n)
}

/// Couplings below this (relative to max(g, F)) count as dark.
pub const DARK_COUPLING_TOL: f64 = 1e-12;
/// Cutoff escalations allowed on the reduced route.
pub const MAX_REDUCED_ESCALATIONS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedReport {
    pub report: ChargingReport,
    pub cutoff: Option<usize>,
}

/// Charging time on the exact block reduction of a two-level-charger
/// model. For an oscillator battery the cutoff is raised until the
/// stationary state passes the Fock-tail check and the would-be dark mode
/// of the charger coupling is decoupled to `DARK_COUPLING_TOL`; a smaller
/// cutoff lets the truncated model relax to an unphysical state.
///
/// A resonant two-oscillator model is handled in the displaced frame, where
/// the total excitation number is conserved and the truncation is set by the
/// Poisson tail of the initial coherent state; `cutoff` is then ignored.
pub fn reduced_charging_time(kind: ModelKind, p: Params, cutoff: Option<usize>, n: u32) -> Result<ReducedReport> {
    if kind == ModelKind::TwoHo && p.is_resonant() {
        let (report, _) = blocks::displaced_charging_time(&p, n)?;
        return Ok(ReducedReport { report, cutoff: None });
    }
    let osc = kind.battery_is_oscillator();
    let mut c = if osc {
        Some(cutoff.unwrap_or_else(|| models::default_cutoff(&p)))
    } else {
        None
    };
    let scale = p.g.max(p.f);
    let mut last = None;
    for _ in 0..=MAX_REDUCED_ESCALATIONS {
        let model = build(kind, p, c)?;
        if !osc {
            let (report, _) = blocks::block_charging_time(&model, n)?;
            return Ok(ReducedReport { report, cutoff: None });
        }
        let cut = c.expect("oscillator cutoff");
        let leak = blocks::BlockDecomposition::new(&model)?.min_coupling();
        let err = if leak > DARK_COUPLING_TOL * scale {
            Error::CutoffTooSmall {
                cutoff: cut,
                reason: format!("charger coupling leaves a residual dark-mode coupling {leak:.3e}"),
            }
        } else {
            let (report, ev) = blocks::block_charging_time(&model, n)?;
            let tail = model.fock_tail(&ev.steady_state(&model.ground_state())?)?.unwrap_or(0.0);
            if tail < FOCK_TAIL_TOL {
                return Ok(ReducedReport { report, cutoff: c });
            }
            tail_error(cut, tail)
        };
        last = Some(err);
        if cutoff.is_some() {
            break;
        }
        c = Some(escalate_cutoff(cut));
    }
    Err(last.expect("at least one attempt"))
}

/// Steady battery energy: closed forms where they exist, otherwise the
/// stationary state reached from the ground state.
pub fn steady_energy(kind: ModelKind, p: Params, cutoff: Option<usize>) -> Result<f64> {
    if !(p.gamma_c > 0.0) {
        return Err(invalid("gamma_C", "no steady state without dephasing"));
    }
    match kind {
        ModelKind::TwoTls if p.delta_bd == 0.0 => Ok(analytic::tls_steady(&p)?.0),
        ModelKind::TwoHo if p.is_resonant() => Ok(ho_energy_form(&p)?.e_ss),
        _ => {
            let (model, rho) = steady_state_auto(kind, p, cutoff)?;
            Ok(battery_observables(&model, &rho)?.energy)
        }
    }
}

/// Maximum cutoff escalations before giving up.
pub const MAX_ESCALATIONS: usize = 4;

fn cutoff_candidates(kind: ModelKind, p: &Params, cutoff: Option<usize>) -> Vec<Option<usize>> {
    let osc = kind.charger_is_oscillator() || kind.battery_is_oscillator();
    match (osc, cutoff) {
        (false, _) => vec![None],
        (true, Some(c)) => vec![Some(c)],
        (true, None) => {
            let mut c = models::default_cutoff(p);
            let mut out = vec![Some(c)];
            for _ in 0..MAX_ESCALATIONS {
                c = escalate_cutoff(c);
                out.push(Some(c));
            }
            out
        }
    }
}

fn tail_error(cutoff: usize, tail: f64) -> Error {
    Error::CutoffTooSmall {
        cutoff,
        reason: format!("top-two Fock population {tail:.3e} exceeds {FOCK_TAIL_TOL:e}"),
    }
}

/// Stationary state, escalating the Fock cutoff until the truncation check passes.
pub fn steady_state_auto(kind: ModelKind, p: Params, cutoff: Option<usize>) -> Result<(ModelSpec, ComplexState)> {
    let mut last = None;
    for c in cutoff_candidates(kind, &p, cutoff) {
        let model = build(kind, p, c)?;
        let rho = steady_state(&model)?;
        match model.fock_tail(&rho)? {
            Some(tail) if tail >= FOCK_TAIL_TOL => last = Some(tail_error(model.cutoff().unwrap(), tail)),
            _ => return Ok((model, rho)),
        }
    }
    Err(last.expect("at least one candidate"))
}

type ComplexState = crate::opalg::ComplexMatrix;

/// Lindblad integration from the ground state with automatic cutoff escalation.
pub fn integrate_auto(
    kind: ModelKind,
    p: Params,
    cutoff: Option<usize>,
    t_grid: &[f64],
    opts: &IntegrateOptions,
) -> Result<(TimeSeries, ModelSpec)> {
    let mut last = None;
    for c in cutoff_candidates(kind, &p, cutoff) {
        let model = build(kind, p, c)?;
        let (mut s, diag) = integrate_with(&model, &model.ground_state(), t_grid, opts)?;
        match diag.max_fock_tail {
            Some(tail) if tail >= FOCK_TAIL_TOL => last = Some(tail_error(model.cutoff().unwrap(), tail)),
            _ => {
                if let Some(c) = model.cutoff() {
                    s.meta.insert("cutoff".into(), c.to_string());
                }
                return Ok((s, model));
            }
        }
    }
    Err(last.expect("at least one candidate"))
}

/// Battery observables on `t_grid` from the chosen solver.
pub fn simulate(
    kind: ModelKind,
    p: Params,
    cutoff: Option<usize>,
    solver: Solver,
    t_grid: &[f64],
    stoch: &StochasticSettings,
) -> Result<TimeSeries> {
    series::check_grid(t_grid)?;
    if t_grid[0] != 0.0 {
        return Err(invalid("t_grid", "runs start at t = 0"));
    }
    let mut out = match solver {
        Solver::Lindblad => integrate_auto(kind, p, cutoff, t_grid, &IntegrateOptions::default())?.0,
        Solver::Moments => simulate_moments(kind, &p, t_grid)?,
        Solver::Analytic => simulate_analytic(kind, &p, t_grid)?,
        Solver::Stochastic => {
            let model = build(kind, p, cutoff.or_else(|| {
                (kind.charger_is_oscillator() || kind.battery_is_oscillator()).then(|| models::default_cutoff(&p))
            }))?;
            let cfg = stochastic_config(&model, t_grid, stoch)?;
            ensemble_run(&model, &cfg, t_grid)?
        }
    };
    out.meta.insert("model".into(), kind.name());
    out.meta.insert("gamma_C".into(), p.gamma_c.to_string());
    Ok(out)
}

/// Step on the output lattice: the largest dt <= the policy bound that
/// divides every output interval.
fn stochastic_config(model: &ModelSpec, t_grid: &[f64], s: &StochasticSettings) -> Result<TrajectoryConfig> {
    let t_end = *t_grid.last().unwrap();
    let target = match s.dt {
        Some(dt) => dt,
        None => {
            let h = crate::opalg::herm_eigvals(&model.hamiltonian)?
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()));
            let rate = model.params.gamma_c.max(h).max(1e-300);
            STOCHASTIC_DT_MAX.min(0.5 * STABILITY_LIMIT / rate)
        }
    };
    // a uniform grid is stepped exactly; otherwise the grid must sit on the lattice
    let dt = if t_grid.len() > 1 {
        let d_out = t_grid[1] - t_grid[0];
        let uniform = t_grid
            .windows(2)
            .all(|w| ((w[1] - w[0]) - d_out).abs() <= 1e-9 * d_out.max(1.0));
        if uniform {
            d_out / (d_out / target).ceil()
        } else {
            target
        }
    } else {
        target
    };
    Ok(TrajectoryConfig::covering(t_end, dt, s.n_traj, s.seed, s.scheme))
}

fn simulate_moments(kind: ModelKind, p: &Params, t: &[f64]) -> Result<TimeSeries> {
    match kind {
        ModelKind::TwoTls => {
            let (s1, s2) = tls_moment_systems(p)?;
            let v1 = evolve_moments(&s1, t)?;
            let v2 = evolve_moments(&s2, t)?;
            let mut out = TimeSeries::new(t.to_vec())?;
            let e = v1.energy()?.to_vec();
            let sz = v1.require("sz_b")?.to_vec();
            let re = v2.require("re_smb")?.to_vec();
            let im = v2.require("im_smb")?.to_vec();
            let ergo: Vec<f64> = (0..t.len())
                .map(|k| tls_ergotropy_from_moments(sz[k], C64::new(re[k], im[k]), p.omega_b))
                .collect();
            let ent = (0..t.len())
                .map(|k| metrics::tls_entropy_from_energy_ergotropy(e[k], ergo[k], p.omega_b))
                .collect();
            out.insert(series::ENERGY, e)?;
            out.insert(series::ERGOTROPY, ergo)?;
            out.insert(series::ENTROPY, ent)?;
            out.insert(series::SZ_B, sz)?;
            out.insert(series::RE_LOWER_B, re)?;
            out.insert(series::IM_LOWER_B, im)?;
            out.meta.insert("solver".into(), "moments".into());
            Ok(out)
        }
        ModelKind::TwoHo => {
            let mut out = TimeSeries::new(t.to_vec())?;
            if p.is_resonant() && p.g > 0.0 {
                let v = evolve_moments(&ho_resonant_moment_system(p)?, t)?;
                let alpha = p.f / p.g;
                out.insert(series::ENERGY, v.energy()?.to_vec())?;
                // n_B = <(b - alpha)^dag (b - alpha)> in the displaced frame
                let nb = v.energy()?.iter().map(|e| e / p.omega_b).collect();
                out.insert(series::N_B, nb)?;
                out.insert(series::RE_LOWER_B, v.require("re_ab")?.iter().map(|b| b - alpha).collect())?;
                out.insert(series::IM_LOWER_B, v.require("im_ab")?.to_vec())?;
            } else {
                let v = evolve_moments(&ho_detuned_moment_system(p)?, t)?;
                out.insert(series::ENERGY, v.energy()?.to_vec())?;
                out.insert(series::N_B, v.require("n_b")?.to_vec())?;
                out.insert(series::RE_LOWER_B, v.require("re_ab")?.to_vec())?;
                out.insert(series::IM_LOWER_B, v.require("im_ab")?.to_vec())?;
            }
            out.meta.insert("solver".into(), "moments".into());
            Ok(out)
        }
        _ => Err(Error::Incompatible(format!("no moment system for {}", kind.name()))),
    }
}

fn simulate_analytic(kind: ModelKind, p: &Params, t: &[f64]) -> Result<TimeSeries> {
    let mut out = TimeSeries::new(t.to_vec())?;
    match kind {
        ModelKind::TwoTls => {
            let form = tls_energy_form(p)?;
            let e: Vec<f64> = t.iter().map(|&x| form.eval(x)).collect();
            let sm: Vec<f64> = t
                .iter()
                .map(|&x| tls_sigma_minus_closed(p, x).map(|z| z.re))
                .collect::<Result<_>>()?;
            let ergo: Vec<f64> = t.iter().map(|&x| tls_ergotropy_closed(p, x)).collect::<Result<_>>()?;
            let ent = (0..t.len())
                .map(|k| metrics::tls_entropy_from_energy_ergotropy(e[k], ergo[k], p.omega_b))
                .collect();
            out.insert(series::SZ_B, e.iter().map(|x| 2.0 * x / p.omega_b - 1.0).collect())?;
            out.insert(series::ENERGY, e)?;
            out.insert(series::ERGOTROPY, ergo)?;
            out.insert(series::ENTROPY, ent)?;
            out.insert(series::RE_LOWER_B, sm)?;
            out.insert(series::IM_LOWER_B, vec![0.0; t.len()])?;
        }
        ModelKind::TwoHo => {
            let e: Vec<f64> = if p.is_resonant() {
                let form = ho_energy_form(p)?;
                t.iter().map(|&x| form.eval(x)).collect()
            } else {
                let case = if p.delta_bd == 0.0 {
                    DetunedCase::DetunedCB
                } else {
                    DetunedCase::DetunedDrive
                };
                t.iter().map(|&x| ho_closed_detuned(p, x, case)).collect::<Result<_>>()?
            };
            out.insert(series::ENERGY, e)?;
        }
        _ => return Err(Error::Incompatible(format!("no closed form for {}", kind.name()))),
    }
    out.meta.insert("solver".into(), "analytic".into());
    Ok(out)
}

// ---------------------------------------------------------------------------
// transient maxima, plateaus and detuning sweeps

/// Golden-section refinement of a local maximum bracketed by [a, b].
pub fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// Maximum of sampled values `vals` on the uniform grid `k*step`, refined
/// around the best sample with `f`.
pub fn refine_grid_max(vals: &[f64], step: f64, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let k = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    let lo = k.saturating_sub(1) as f64 * step;
    let hi = ((k + 1).min(vals.len() - 1)) as f64 * step;
    let (t, v) = golden_max(f, lo, hi, 1e-10 * hi.max(1.0));
    if v >= vals[k] {
        (t, v)
    } else {
        (k as f64 * step, vals[k])
    }
}

/// Grid step of the closed-case maximum search, in units of 1/g.
pub const TRANSIENT_STEP: f64 = 0.01;

/// Closed-case search window: 40/g, extended to two periods of the slow
/// two-TLS mode when that is longer.
pub fn transient_window(kind: ModelKind, p: &Params) -> f64 {
    let base = 40.0 / p.g;
    match kind {
        ModelKind::TwoTls => {
            let f1 = branch_constants(p.ratio())[1];
            if f1 > 0.0 {
                base.max(4.0 * std::f64::consts::PI / ((2.0 * f1).sqrt() * p.g))
            } else {
                base
            }
        }
        _ => base,
    }
}

/// Largest battery energy and ergotropy of the closed (gamma_C = 0)
/// evolution over the search window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransientMax {
    pub energy: f64,
    pub t_energy: f64,
    pub ergotropy: f64,
    pub t_ergotropy: f64,
}

pub fn closed_transient_max(kind: ModelKind, p: Params) -> Result<TransientMax> {
    let p = p.with_gamma(0.0);
    let window = transient_window(kind, &p);
    let step = TRANSIENT_STEP / p.g;
    let n = (window / step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
    match kind {
        ModelKind::TwoTls => {
            let (s1, s2) = tls_moment_systems(&p)?;
            let v1 = evolve_moments(&s1, &grid)?;
            let v2 = evolve_moments(&s2, &grid)?;
            let ergo_of = |sz: f64, re: f64, im: f64| tls_ergotropy_from_moments(sz, C64::new(re, im), p.omega_b);
            let e = v1.energy()?.to_vec();
            let sz = v1.require("sz_b")?;
            let (re, im) = (v2.require("re_smb")?, v2.require("im_smb")?);
            let w: Vec<f64> = (0..n).map(|k| ergo_of(sz[k], re[k], im[k])).collect();
            let at = |t: f64| -> (f64, f64) {
                let a = evolve_moments(&s1, &[0.0, t]).ok();
                let b = evolve_moments(&s2, &[0.0, t]).ok();
                match (a, b) {
                    (Some(a), Some(b)) => {
                        let e = a.energy().map(|c| c[1]).unwrap_or(f64::NAN);
                        let sz = a.column("sz_b").map(|c| c[1]).unwrap_or(f64::NAN);
                        let re = b.column("re_smb").map(|c| c[1]).unwrap_or(f64::NAN);
                        let im = b.column("im_smb").map(|c| c[1]).unwrap_or(f64::NAN);
                        (e, ergo_of(sz, re, im))
                    }
                    _ => (f64::NAN, f64::NAN),
                }
            };
            let (te, me) = refine_grid_max(&e, step, &|t| if t <= 0.0 { e[0] } else { at(t).0 });
            let (tw, mw) = refine_grid_max(&w, step, &|t| if t <= 0.0 { w[0] } else { at(t).1 });
            Ok(TransientMax {
                energy: me,
                t_energy: te,
                ergotropy: mw,
                t_ergotropy: tw,
            })
        }
        ModelKind::TwoHo => {
            // the closed evolution keeps a coherent state, so ergotropy = energy
            let sys = ho_detuned_moment_system(&p)?;
            let e = evolve_moments(&sys, &grid)?.energy()?.to_vec();
            let at = |t: f64| {
                if t <= 0.0 {
                    return e[0];
                }
                evolve_moments(&sys, &[0.0, t])
                    .ok()
                    .and_then(|s| s.energy().ok().map(|c| c[1]))
                    .unwrap_or(f64::NAN)
            };
            let (t, m) = refine_grid_max(&e, step, &at);
            Ok(TransientMax {
                energy: m,
                t_energy: t,
                ergotropy: m,
                t_ergotropy: t,
            })
        }
        _ => Err(Error::Incompatible(format!(
            "closed transient maxima are implemented for two_tls and two_ho, not {}",
            kind.name()
        ))),
    }
}

/// Plateau read-out settings: sliding window width (units of 1/g) and the
/// relative variation below which the signal counts as flat.
pub const PLATEAU_WIDTH: f64 = 10.0;
pub const PLATEAU_REL_TOL: f64 = 1e-3;

/// First time at which the relative variation of `col` over the following
/// `width` drops below `rel_tol`; returns (time, value there).
pub fn plateau_value(times: &[f64], col: &[f64], width: f64, rel_tol: f64) -> Option<(f64, f64)> {
    let n = times.len();
    let mut hi = 0usize;
    for lo in 0..n {
        while hi < n && times[hi] <= times[lo] + width {
            hi += 1;
        }
        if times[hi - 1] < times[lo] + width * (1.0 - 1e-12) {
            return None;
        }
        let w = &col[lo..hi];
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        if mean.abs() > 0.0 && (max - min) / mean.abs() < rel_tol {
            return Some((times[lo], col[lo]));
        }
    }
    None
}

/// Dephased long-time battery energy and ergotropy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DephasedValue {
    pub energy: f64,
    pub ergotropy: f64,
    /// Plateau read-out time, when a quasi-steady value was used.
    pub plateau_time: Option<f64>,
}

/// Dephased steady value: the exact stationary state for a drive resonant
/// with the battery (displaced sectors for two oscillators), the
/// quasi-steady plateau for a detuned drive.
pub fn dephased_value(kind: ModelKind, p: Params, horizon: f64) -> Result<DephasedValue> {
    if !(p.gamma_c > 0.0) {
        return Err(invalid("gamma_C", "dephased values need gamma_C > 0"));
    }
    if kind == ModelKind::TwoHo && p.is_resonant() {
        let sys = blocks::DisplacedOscillators::new(&p)?;
        let (energy, ergotropy) = sys.battery_energy_ergotropy(&sys.steady_state()?)?;
        return Ok(DephasedValue {
            energy,
            ergotropy,
            plateau_time: None,
        });
    }
    let exact = matches!(kind, ModelKind::TwoTls | ModelKind::StarTls(_)) && p.delta_bd == 0.0;
    if exact {
        let (model, rho) = steady_state_auto(kind, p, None)?;
        let b = battery_observables(&model, &rho)?;
        return Ok(DephasedValue {
            energy: b.energy,
            ergotropy: b.ergotropy,
            plateau_time: None,
        });
    }
    let step = 0.1 / p.g;
    let n = (horizon / step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
    let s = simulate(kind, p, None, Solver::Lindblad, &grid, &StochasticSettings::default())?;
    let width = PLATEAU_WIDTH / p.g;
    let e = s.energy()?;
    let w = s.require(series::ERGOTROPY)?;
    let pe = plateau_value(&grid, e, width, PLATEAU_REL_TOL);
    let pw = plateau_value(&grid, w, width, PLATEAU_REL_TOL);
    match (pe, pw) {
        (Some((_, ev)), Some((tw, wv))) => Ok(DephasedValue {
            energy: ev,
            ergotropy: wv,
            plateau_time: Some(tw),
        }),
        (None, Some((tw, wv))) => Ok(DephasedValue {
            energy: f64::NAN,
            ergotropy: wv,
            plateau_time: Some(tw),
        }),
        _ => Err(Error::NotConverged { horizon }),
    }
}

type DetuningRow = (TransientMax, Option<DephasedValue>, Option<String>);

/// Closed-case transient maxima against dephased values along a detuning grid.
pub fn sweep_detuning(s: &Scenario) -> Result<Table> {
    s.validate()?;
    let sw = s
        .sweep
        .as_ref()
        .ok_or_else(|| invalid("sweep", "a detuning sweep is required"))?;
    if !matches!(sw.var, SweepVar::DeltaCb | SweepVar::DeltaDrive | SweepVar::DeltaCd | SweepVar::DeltaBd) {
        return Err(invalid("sweep", "sweep variable must be a detuning"));
    }
    let values = sw.grid.values();
    let rows: Vec<Result<DetuningRow>> = with_thread_limit(|| {
        values
            .par_iter()
            .map(|&d| {
                let p = sw.var.apply(s.params, d);
                let closed = closed_transient_max(s.kind, p)?;
                let deph = match s.kind {
                    ModelKind::TwoTls | ModelKind::StarTls(_) => match dephased_value(s.kind, p, s.t_max) {
                        Ok(v) => (Some(v), None),
                        Err(e @ Error::NotConverged { .. }) => (None, Some(e.to_string())),
                        Err(e) => return Err(e),
                    },
                    _ => (None, None),
                };
                Ok((closed, deph.0, deph.1))
            })
            .collect()
    })?;
    let mut t = Table::with_abscissa(sw.var.name(), values.clone());
    let mut cm_e = Vec::new();
    let mut cm_w = Vec::new();
    let mut d_e = Vec::new();
    let mut d_w = Vec::new();
    for (k, r) in rows.into_iter().enumerate() {
        let (c, d, w) = r.map_err(|e| context(e, &format!("{} = {}", sw.var.name(), values[k])))?;
        cm_e.push(c.energy);
        cm_w.push(c.ergotropy);
        d_e.push(d.map_or(f64::NAN, |v| v.energy));
        d_w.push(d.map_or(f64::NAN, |v| v.ergotropy));
        if let Some(w) = w {
            t.warnings.push(format!("{} = {}: {w}", sw.var.name(), values[k]));
        }
    }
    t.push_column("closed_energy_max", cm_e)?;
    t.push_column("closed_ergotropy_max", cm_w)?;
    if matches!(s.kind, ModelKind::TwoTls | ModelKind::StarTls(_)) {
        t.push_column("dephased_energy", d_e)?;
        t.push_column("dephased_ergotropy", d_w)?;
    }
    t.meta.insert("model".into(), s.kind.name());
    t.meta.insert("gamma_C".into(), s.params.gamma_c.to_string());
    t.meta.insert("F".into(), s.params.f.to_string());
    t.meta.insert("g".into(), s.params.g.to_string());
    Ok(t)
}

// ---------------------------------------------------------------------------
// charging-time curves

/// Closed-form charging times along a dephasing grid.
pub fn tau_curve_closed(kind: ModelKind, p: Params, gammas: &[f64], n: u32) -> Result<Vec<ChargingReport>> {
    with_thread_limit(|| {
        gammas
            .par_iter()
            .map(|&gm| {
                let q = p.with_gamma(gm);
                match kind {
                    ModelKind::TwoTls => charging_time_closed(&tls_energy_form(&q)?, n),
                    ModelKind::TwoHo => charging_time_closed(&ho_energy_form(&q)?, n),
                    _ => Err(Error::Incompatible(format!("no closed form for {}", kind.name()))),
                }
            })
            .collect()
    })?
}

/// Index of the smallest finite value.
pub fn argmin(v: &[f64]) -> Option<usize> {
    (0..v.len())
        .filter(|&k| v[k].is_finite())
        .min_by(|&a, &b| v[a].total_cmp(&v[b]))
}

/// True when `v` decreases to a single minimum and then increases, allowing
/// relative wiggles of size `rel_tol`.
pub fn is_unimodal(v: &[f64], rel_tol: f64) -> bool {
    let Some(k) = argmin(v) else { return false };
    let down = v[..=k].windows(2).all(|w| w[1] <= w[0] * (1.0 + rel_tol));
    let up = v[k..].windows(2).all(|w| w[1] >= w[0] * (1.0 - rel_tol));
    down && up
}

/// Least-squares slope c of tau = c gamma through the origin for gamma >= `min_gamma`.
pub fn fit_linear_slope(gammas: &[f64], taus: &[f64], min_gamma: f64) -> Option<f64> {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&x, &y) in gammas.iter().zip(taus) {
        if x >= min_gamma && y.is_finite() {
            sxy += x * y;
            sxx += x * x;
        }
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Settings for charging times read against a numerically found plateau.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateauOptions {
    /// First horizon; doubled until the tail is flat.
    pub horizon: f64,
    pub max_doublings: usize,
    /// Fraction of the window whose relative spread must stay below `drift_tol`.
    pub tail_fraction: f64,
    pub drift_tol: f64,
    /// Output spacing of the sampled energy.
    pub dt_out: f64,
}

impl PlateauOptions {
    pub fn for_params(p: &Params, n: u32) -> Self {
        let n = n as f64;
        let g = p.g;
        let gm = p.gamma_c;
        Self {
            horizon: 20.0 * (4.0 * n / gm).max(n * gm / (2.0 * g * g)).max(2.0 * std::f64::consts::PI / g),
            max_doublings: 6,
            tail_fraction: 0.05,
            drift_tol: 1e-5,
            dt_out: 0.05 / g.max(p.f),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlateauReport {
    pub report: ChargingReport,
    pub e_ss: f64,
    pub cutoff: Option<usize>,
}

/// Charging time when no closed form or exact stationary state is
/// available: integrate until the energy tail is flat, take its mean as
/// the steady value, then apply the last-root rule on the sampled series.
pub fn plateau_charging_time(kind: ModelKind, p: Params, cutoff: Option<usize>, n: u32, o: &PlateauOptions) -> Result<PlateauReport> {
    let mut horizon = o.horizon;
    let opts = IntegrateOptions {
        energy_only: true,
        ..IntegrateOptions::default()
    };
    for _ in 0..=o.max_doublings {
        let steps = (horizon / o.dt_out).ceil() as usize;
        let grid = linspace(0.0, horizon, steps + 1);
        let (s, model) = integrate_auto(kind, p, cutoff, &grid, &opts)?;
        let e = s.energy()?;
        let cut = horizon * (1.0 - o.tail_fraction);
        let tail: Vec<f64> = grid.iter().zip(e).filter(|(t, _)| **t >= cut).map(|(_, v)| *v).collect();
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let spread = tail.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
        if mean.abs() > 0.0 && spread / mean.abs() < o.drift_tol {
            let report = charging_time(&s, mean, n)?;
            return Ok(PlateauReport {
                report,
                e_ss: mean,
                cutoff: model.cutoff(),
            });
        }
        horizon *= 2.0;
    }
    Err(Error::NotConverged { horizon })
}

// ---------------------------------------------------------------------------
// star configuration

/// Steady ergotropy-to-energy ratio of N batteries around one charger.
pub fn star_ratio(n_batteries: usize, p: Params) -> Result<(f64, f64, f64)> {
    let model = build(ModelKind::StarTls(n_batteries), p, None)?;
    let rho = steady_state(&model)?;
    let b = battery_observables(&model, &rho)?;
    Ok((b.energy, b.ergotropy, b.ergotropy / b.energy))
}

/// F/g maximizing the steady ratio on a grid; returns (F/g, ratio).
pub fn star_optimum(n_batteries: usize, g: f64, gamma_c: f64, ratios: &[f64]) -> Result<(f64, f64)> {
    let vals: Vec<Result<f64>> = with_thread_limit(|| {
        ratios
            .par_iter()
            .map(|&r| star_ratio(n_batteries, Params::resonant(g, r * g, gamma_c)).map(|x| x.2))
            .collect()
    })?;
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    let k = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).ok_or(Error::SingularMatrix)?;
    Ok((ratios[k], vals[k]))
}

// ---------------------------------------------------------------------------
// canned figures

pub const FIGURES: [&str; 10] = [
    "fig2", "fig3a", "fig3b", "fig3c", "fig4", "fig5", "fig6", "sm-star", "sm-ho", "sm-detuned",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FigureData {
    pub name: String,
    /// Named tables, each written to its own CSV.
    pub tables: Vec<(String, Table)>,
}

fn gamma_label(g: f64) -> String {
    format!("gamma_{g}")
}

/// Energy and ergotropy curves for several dephasing rates.
fn dynamics_tables(kind: ModelKind, p: Params, gammas: &[f64], t_max: f64, n_t: usize, solver: Solver) -> Result<Vec<(String, Table)>> {
    let t = linspace(0.0, t_max, n_t);
    let runs: Vec<Result<TimeSeries>> = with_thread_limit(|| {
        gammas
            .par_iter()
            .map(|&gm| simulate(kind, p.with_gamma(gm), None, solver, &t, &StochasticSettings::default()))
            .collect()
    })?;
    let mut energy = Table::with_abscissa("t", t.clone());
    let mut ergo = Table::with_abscissa("t", t.clone());
    for (r, &gm) in runs.into_iter().zip(gammas) {
        let s = r?;
        energy.push_column(gamma_label(gm), s.energy()?.to_vec())?;
        ergo.push_column(gamma_label(gm), s.require(series::ERGOTROPY)?.to_vec())?;
    }
    for tab in [&mut energy, &mut ergo] {
        tab.meta.insert("model".into(), kind.name());
        tab.meta.insert("F".into(), p.f.to_string());
        tab.meta.insert("g".into(), p.g.to_string());
        tab.meta.insert("solver".into(), solver.name().into());
    }
    Ok(vec![("energy".into(), energy), ("ergotropy".into(), ergo)])
}

/// tau(gamma) from the closed form with the asymptotic laws alongside.
fn tau_table(kind: ModelKind, p: Params, n: u32, regimes: &[(&str, Regime)]) -> Result<Table> {
    let gammas = logspace(0.01, 100.0, 60).iter().map(|x| x * p.g).collect::<Vec<_>>();
    let reps = tau_curve_closed(kind, p, &gammas, n)?;
    let mut t = Table::with_abscissa("gamma_C", gammas.clone());
    let taus: Vec<f64> = reps.iter().map(|r| r.tau).collect();
    t.push_column("tau", taus.clone())?;
    for (name, reg) in regimes {
        let col = gammas
            .iter()
            .map(|&gm| charging_time_asymptotic(&p.with_gamma(gm), n, *reg).map(|a| a.tau))
            .collect::<Result<Vec<_>>>()?;
        t.push_column(*name, col)?;
    }
    if let Some(k) = argmin(&taus) {
        t.meta.insert("gamma_star".into(), gammas[k].to_string());
        t.meta.insert("tau_min".into(), taus[k].to_string());
    }
    t.meta.insert("model".into(), kind.name());
    t.meta.insert("F".into(), p.f.to_string());
    t.meta.insert("g".into(), p.g.to_string());
    t.meta.insert("n".into(), n.to_string());
    Ok(t)
}

pub const FIG_N: u32 = 18;

/// Runs a canned figure scenario by name.
pub fn figure(name: &str) -> Result<FigureData> {
    let tls = |f: f64| Params::resonant(1.0, f, 1.0);
    let tables = match name {
        "fig2" => dynamics_tables(ModelKind::TwoTls, tls(0.5), &[0.01, 1.15, 30.0], 40.0, 801, Solver::Analytic)?,
        "fig3a" => vec![(
            "tau".into(),
            tau_table(
                ModelKind::TwoTls,
                tls(0.1),
                FIG_N,
                &[("tau_small_gamma", Regime::SmallGamma), ("tau_large_gamma", Regime::LargeGammaWeakDrive)],
            )?,
        )],
        "fig3b" => vec![(
            "tau".into(),
            tau_table(
                ModelKind::TwoTls,
                tls(10.0),
                FIG_N,
                &[("tau_small_gamma", Regime::SmallGamma), ("tau_large_gamma", Regime::LargeGammaStrongDrive)],
            )?,
        )],
        "fig3c" => {
            let mut t = tau_table(ModelKind::TwoTls, tls(0.5), FIG_N, &[("tau_small_gamma", Regime::SmallGamma)])?;
            let gammas = t.column("gamma_C").unwrap().to_vec();
            let taus = t.column("tau").unwrap().to_vec();
            if let Some(c) = fit_linear_slope(&gammas, &taus, 10.0) {
                // tau ~ c' n gamma / g^2 at large gamma
                t.meta.insert("slope_fit".into(), (c / FIG_N as f64).to_string());
            }
            vec![("tau".into(), t)]
        }
        "fig4" => {
            let p = Params::resonant(1.0, 0.1, 0.1).with_detunings(0.03, 0.0);
            let t = linspace(0.0, 600.0, 2401);
            let closed = simulate(ModelKind::TwoTls, p.with_gamma(0.0), None, Solver::Moments, &t, &Default::default())?;
            let deph = simulate(ModelKind::TwoTls, p, None, Solver::Moments, &t, &Default::default())?;
            let mut a = Table::with_abscissa("t", t.clone());
            a.push_column("energy_closed", closed.energy()?.to_vec())?;
            a.push_column("energy_dephased", deph.energy()?.to_vec())?;
            let s = Scenario {
                params: p,
                t_max: 600.0,
                sweep: Some(Sweep {
                    var: SweepVar::DeltaCb,
                    grid: GridSpec::Linspace { a: -0.1, b: 0.1, n: 81 },
                }),
                ..Scenario::default()
            };
            vec![("transient".into(), a), ("max_vs_detuning".into(), sweep_detuning(&s)?)]
        }
        "fig5" => dynamics_tables(ModelKind::TwoHo, tls(0.5), &[0.1, 1.0, 4.0, 30.0], 40.0, 401, Solver::Lindblad)?,
        "fig6" => dynamics_tables(ModelKind::TlsHo, tls(0.5), &[0.01, 1.15, 30.0], 40.0, 401, Solver::Lindblad)?,
        "sm-star" => {
            let ratios = linspace(0.05, 2.0, 40);
            let mut t = Table::with_abscissa("F_over_g", ratios.clone());
            for nb in 1..=3usize {
                let col: Vec<Result<f64>> = with_thread_limit(|| {
                    ratios
                        .par_iter()
                        .map(|&r| star_ratio(nb, Params::resonant(1.0, r, 1.0)).map(|x| x.1))
                        .collect()
                })?;
                t.push_column(format!("ergotropy_N{nb}"), col.into_iter().collect::<Result<_>>()?)?;
            }
            for (nb, r) in [(1usize, 0.5), (2, 0.73), (3, 0.94)] {
                let (_, _, q) = star_ratio(nb, Params::resonant(1.0, r, 1.0))?;
                t.meta.insert(format!("ratio_N{nb}_at_{r}"), q.to_string());
            }
            vec![("steady_ergotropy".into(), t)]
        }
        "sm-ho" => {
            let p = tls(0.1);
            let mut out = dynamics_tables(ModelKind::TwoHo, p, &[0.1, 1.0, 4.0, 30.0], 60.0, 601, Solver::Lindblad)?;
            out.push((
                "tau".into(),
                tau_table(
                    ModelKind::TwoHo,
                    p,
                    FIG_N,
                    &[("tau_small_gamma", Regime::HoSmallGamma), ("tau_large_gamma", Regime::HoLargeGamma)],
                )?,
            ));
            out
        }
        "sm-detuned" => {
            let tls_sweep = Scenario {
                params: Params::resonant(1.0, 0.1, 0.1),
                t_max: 600.0,
                sweep: Some(Sweep {
                    var: SweepVar::DeltaCb,
                    grid: GridSpec::Linspace { a: -0.1, b: 0.1, n: 41 },
                }),
                ..Scenario::default()
            };
            let deltas = linspace(0.0, 0.9, 46);
            let p = Params::resonant(1.0, 0.1, 0.0);
            let mut ho = Table::with_abscissa("delta_drive", deltas.clone());
            let mut formula = Vec::new();
            let mut numeric = Vec::new();
            for &d in &deltas {
                let q = SweepVar::DeltaDrive.apply(p, d);
                formula.push(ho_detuned_drive_max(&q)?);
                numeric.push(closed_transient_max(ModelKind::TwoHo, q)?.energy);
            }
            ho.push_column("closed_max_formula", formula)?;
            ho.push_column("closed_max_numeric", numeric)?;
            let slope: Vec<f64> = deltas
                .iter()
                .map(|&d| analytic::ho_long_time_slope(&SweepVar::DeltaDrive.apply(p.with_gamma(0.1), d)))
                .collect();
            ho.push_column("dephased_slope", slope)?;
            vec![("tls_cb".into(), sweep_detuning(&tls_sweep)?), ("ho_drive".into(), ho)]
        }
        _ => {
            return Err(invalid(
                "figure",
                format!("unknown figure '{name}' (one of {})", FIGURES.join(", ")),
            ))
        }
    };
    Ok(FigureData {
        name: name.into(),
        tables,
    })
}
