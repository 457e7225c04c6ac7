//! Scenario files: flat `key = value` lines under `[model]`, `[solver]`,
//! `[output]` and `[sweep]` headers. `#` starts a comment.
//!
//! ```text
//! [model]
//! model = two_tls
//! F = 0.5
//! g = 1.0
//! gamma_C = 1.15
//!
//! [solver]
//! t_max = 30
//!
//! [sweep]
//! gamma_C = logspace(0.01, 100, 60)
//! ```

use std::fmt;
use std::path::PathBuf;

use qbcharge::models::ModelKind;
use qbcharge::scenarios::{GridSpec, Scenario, Solver, Sweep, SweepVar, KNOWN_OBSERVABLES};
use qbcharge::stochastic::Scheme;

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Malformed input at a 1-based line and column.
    Parse { line: usize, col: usize, msg: String },
    /// Well-formed input that names an invalid value.
    Validation { field: String, msg: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, col, msg } => write!(f, "line {line}, column {col}: {msg}"),
            ConfigError::Validation { field, msg } => write!(f, "invalid {field}: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Model,
    Solver,
    Output,
    Sweep,
}

impl Section {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "model" => Some(Section::Model),
            "solver" => Some(Section::Solver),
            "output" => Some(Section::Output),
            "sweep" => Some(Section::Sweep),
            _ => None,
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Section::Model => &[
                "model",
                "n_batteries",
                "F",
                "g",
                "gamma_C",
                "omega_B",
                "delta_Cd",
                "delta_Bd",
                "cutoff",
            ],
            Section::Solver => &["solver", "t_max", "n_t", "n", "dt", "n_traj", "seed", "scheme"],
            Section::Output => &["path", "observables"],
            Section::Sweep => &[
                "target",
                "gamma_C",
                "F",
                "g",
                "delta_Cd",
                "delta_Bd",
                "delta_CB",
                "delta_drive",
            ],
        }
    }
}

struct Entry<'a> {
    line: usize,
    value_col: usize,
    value: &'a str,
}

fn parse_err(line: usize, col: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

fn number(e: &Entry, key: &str) -> Result<f64, ConfigError> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| parse_err(e.line, e.value_col, format!("{key}: expected a number, found '{}'", e.value)))?;
    if !v.is_finite() {
        return Err(parse_err(e.line, e.value_col, format!("{key}: value must be finite")));
    }
    Ok(v)
}

fn integer(e: &Entry, key: &str) -> Result<u64, ConfigError> {
    e.value
        .parse()
        .map_err(|_| parse_err(e.line, e.value_col, format!("{key}: expected a non-negative integer, found '{}'", e.value)))
}

/// `linspace(a, b, n)`, `logspace(a, b, n)` or `list(v1, v2, ...)`.
pub fn parse_grid(text: &str) -> Result<GridSpec, String> {
    let text = text.trim();
    let open = text.find('(').ok_or("expected linspace(...), logspace(...) or list(...)")?;
    if !text.ends_with(')') {
        return Err("missing closing parenthesis".into());
    }
    let name = text[..open].trim();
    let inner = &text[open + 1..text.len() - 1];
    let args: Vec<&str> = inner.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"));
    match name {
        "linspace" | "logspace" => {
            if args.len() != 3 {
                return Err(format!("{name} takes three arguments (a, b, n)"));
            }
            let (a, b) = (num(args[0])?, num(args[1])?);
            let n: usize = args[2].parse().map_err(|_| format!("'{}' is not a point count", args[2]))?;
            if n < 1 {
                return Err("point count must be positive".into());
            }
            Ok(if name == "linspace" {
                GridSpec::Linspace { a, b, n }
            } else {
                GridSpec::Logspace { a, b, n }
            })
        }
        "list" => {
            let v = args.iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err("list is empty".into());
            }
            Ok(GridSpec::List(v))
        }
        other => Err(format!("unknown grid '{other}'")),
    }
}

fn parse_model(name: &str, n_batteries: Option<usize>) -> Result<ModelKind, String> {
    match (name, n_batteries) {
        ("two_tls", None) => Ok(ModelKind::TwoTls),
        ("two_ho", None) => Ok(ModelKind::TwoHo),
        ("tls_ho", None) => Ok(ModelKind::TlsHo),
        ("star_tls", Some(n)) => Ok(ModelKind::StarTls(n)),
        ("star_tls", None) => Err("star_tls needs n_batteries".into()),
        (_, Some(_)) => Err("n_batteries only applies to star_tls".into()),
        (other, None) => Err(format!("unknown model '{other}' (two_tls, two_ho, tls_ho, star_tls)")),
    }
}

pub fn parse_scheme(name: &str) -> Result<Scheme, String> {
    [Scheme::MeasurementNonlinear, Scheme::ClassicalNoiseLinear]
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| format!("unknown scheme '{name}' (measurement, noise)"))
}

/// What a sweep reports per grid point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SweepTarget {
    /// Final observable values and the charging time.
    #[default]
    Final,
    /// Closed maximum against the dephased value, for charger-battery detuning sweeps.
    DetuningMax,
}

impl SweepTarget {
    pub fn name(self) -> &'static str {
        match self {
            SweepTarget::Final => "final",
            SweepTarget::DetuningMax => "detuning_max",
        }
    }
}

/// A parsed scenario file.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub scenario: Scenario,
    pub target: SweepTarget,
}

fn validation(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.into(),
        msg: msg.into(),
    }
}

/// Parses and validates a scenario file's text.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut s = Scenario::default();
    let mut target = SweepTarget::Final;
    let mut section: Option<Section> = None;
    let mut model_name: Option<(String, usize, usize)> = None;
    let mut n_batteries: Option<usize> = None;
    let mut seen: Vec<(Section, String)> = Vec::new();
    let mut sweep: Option<Sweep> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if trimmed.starts_with('[') {
            if !trimmed.ends_with(']') {
                return Err(parse_err(line, indent + 1, "unterminated section header"));
            }
            let name = trimmed[1..trimmed.len() - 1].trim();
            section = Some(
                Section::parse(name)
                    .ok_or_else(|| parse_err(line, indent + 2, format!("unknown section [{name}] (model, solver, output, sweep)")))?,
            );
            continue;
        }
        let eq = content
            .find('=')
            .ok_or_else(|| parse_err(line, indent + 1, "expected 'key = value'"))?;
        let key = content[..eq].trim();
        let after = &content[eq + 1..];
        let value = after.trim();
        let value_col = eq + 2 + (after.len() - after.trim_start().len());
        if key.is_empty() {
            return Err(parse_err(line, indent + 1, "missing key before '='"));
        }
        if value.is_empty() {
            return Err(parse_err(line, value_col, format!("missing value for '{key}'")));
        }
        let sec = section.ok_or_else(|| parse_err(line, indent + 1, format!("'{key}' appears before any section header")))?;
        if !sec.keys().contains(&key) {
            return Err(parse_err(
                line,
                indent + 1,
                format!("unknown key '{key}' in this section (allowed: {})", sec.keys().join(", ")),
            ));
        }
        if seen.iter().any(|(a, b)| *a == sec && b == key) {
            return Err(parse_err(line, indent + 1, format!("duplicate key '{key}'")));
        }
        seen.push((sec, key.to_string()));
        let e = Entry { line, value_col, value };
        match (sec, key) {
            (Section::Model, "model") => model_name = Some((value.to_string(), line, value_col)),
            (Section::Model, "n_batteries") => n_batteries = Some(integer(&e, key)? as usize),
            (Section::Model, "F") => s.params.f = number(&e, key)?,
            (Section::Model, "g") => s.params.g = number(&e, key)?,
            (Section::Model, "gamma_C") => s.params.gamma_c = number(&e, key)?,
            (Section::Model, "omega_B") => s.params.omega_b = number(&e, key)?,
            (Section::Model, "delta_Cd") => s.params.delta_cd = number(&e, key)?,
            (Section::Model, "delta_Bd") => s.params.delta_bd = number(&e, key)?,
            (Section::Model, "cutoff") => s.cutoff = Some(integer(&e, key)? as usize),
            (Section::Solver, "solver") => {
                s.solver = value.parse::<Solver>().map_err(|m| parse_err(line, value_col, m))?;
            }
            (Section::Solver, "t_max") => s.t_max = number(&e, key)?,
            (Section::Solver, "n_t") => s.n_t = integer(&e, key)? as usize,
            (Section::Solver, "n") => {
                s.n = u32::try_from(integer(&e, key)?).map_err(|_| parse_err(line, value_col, "n is too large"))?;
            }
            (Section::Solver, "dt") => s.stochastic.dt = Some(number(&e, key)?),
            (Section::Solver, "n_traj") => s.stochastic.n_traj = integer(&e, key)? as usize,
            (Section::Solver, "seed") => s.stochastic.seed = integer(&e, key)?,
            (Section::Solver, "scheme") => {
                s.stochastic.scheme = parse_scheme(value).map_err(|m| parse_err(line, value_col, m))?;
            }
            (Section::Output, "path") => s.output = Some(PathBuf::from(value)),
            (Section::Output, "observables") => {
                let obs: Vec<String> = value.split(',').map(|o| o.trim().to_string()).filter(|o| !o.is_empty()).collect();
                if obs.is_empty() {
                    return Err(parse_err(line, value_col, "observables list is empty"));
                }
                if let Some(bad) = obs.iter().find(|o| !KNOWN_OBSERVABLES.contains(&o.as_str())) {
                    let col = value_col + value.find(bad.as_str()).unwrap_or(0);
                    return Err(parse_err(
                        line,
                        col,
                        format!("unknown observable '{bad}' (known: {})", KNOWN_OBSERVABLES.join(", ")),
                    ));
                }
                s.observables = obs;
            }
            (Section::Sweep, "target") => {
                target = match value {
                    "final" => SweepTarget::Final,
                    "detuning_max" => SweepTarget::DetuningMax,
                    other => return Err(parse_err(line, value_col, format!("unknown target '{other}' (final, detuning_max)"))),
                };
            }
            (Section::Sweep, var) => {
                if sweep.is_some() {
                    return Err(parse_err(line, indent + 1, "only one sweep variable is supported"));
                }
                let var: SweepVar = var.parse().map_err(|m: String| parse_err(line, indent + 1, m))?;
                let grid = parse_grid(value).map_err(|m| parse_err(line, value_col, m))?;
                sweep = Some(Sweep { var, grid });
            }
            _ => unreachable!("keys are checked against the section table"),
        }
    }

    if let Some((name, line, col)) = model_name {
        s.kind = parse_model(&name, n_batteries).map_err(|m| parse_err(line, col, m))?;
    } else if n_batteries.is_some() {
        return Err(validation("n_batteries", "only applies to model = star_tls"));
    }
    if target == SweepTarget::DetuningMax && !matches!(&sweep, Some(sw) if sw.var == SweepVar::DeltaCb) {
        return Err(validation("target", "detuning_max needs a delta_CB sweep"));
    }
    s.sweep = sweep;
    s.validate().map_err(|e| match e {
        qbcharge::Error::InvalidParameter { name, reason } => validation(name, reason),
        qbcharge::Error::TooManyBatteries(n) => validation("n_batteries", format!("1 to 6 supported, got {n}")),
        qbcharge::Error::CutoffTooSmall { reason, .. } => validation("cutoff", reason),
        other => validation("scenario", other.to_string()),
    })?;
    Ok(Config { scenario: s, target })
}

fn grid_text(g: &GridSpec) -> String {
    match g {
        GridSpec::Linspace { a, b, n } => format!("linspace({a:?}, {b:?}, {n})"),
        GridSpec::Logspace { a, b, n } => format!("logspace({a:?}, {b:?}, {n})"),
        GridSpec::List(v) => format!("list({})", v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")),
    }
}

/// Canonical text of a configuration; parsing it reproduces the configuration.
pub fn canonical_config(c: &Config) -> String {
    let s = &c.scenario;
    let p = &s.params;
    let mut out = String::from("[model]\n");
    match s.kind {
        ModelKind::StarTls(n) => out.push_str(&format!("model = star_tls\nn_batteries = {n}\n")),
        k => out.push_str(&format!("model = {}\n", k.name())),
    }
    for (k, v) in [
        ("F", p.f),
        ("g", p.g),
        ("gamma_C", p.gamma_c),
        ("omega_B", p.omega_b),
        ("delta_Cd", p.delta_cd),
        ("delta_Bd", p.delta_bd),
    ] {
        out.push_str(&format!("{k} = {v:?}\n"));
    }
    if let Some(c) = s.cutoff {
        out.push_str(&format!("cutoff = {c}\n"));
    }
    out.push_str("\n[solver]\n");
    out.push_str(&format!("solver = {}\n", s.solver.name()));
    out.push_str(&format!("t_max = {:?}\nn_t = {}\nn = {}\n", s.t_max, s.n_t, s.n));
    if let Some(dt) = s.stochastic.dt {
        out.push_str(&format!("dt = {dt:?}\n"));
    }
    out.push_str(&format!(
        "n_traj = {}\nseed = {}\nscheme = {}\n",
        s.stochastic.n_traj,
        s.stochastic.seed,
        s.stochastic.scheme.name()
    ));
    out.push_str("\n[output]\n");
    if let Some(path) = &s.output {
        out.push_str(&format!("path = {}\n", path.display()));
    }
    out.push_str(&format!("observables = {}\n", s.observables.join(", ")));
    if let Some(sw) = &s.sweep {
        out.push_str(&format!(
            "\n[sweep]\ntarget = {}\n{} = {}\n",
            c.target.name(),
            sw.var.name(),
            grid_text(&sw.grid)
        ));
    }
    out
}
