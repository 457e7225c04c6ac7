//! Python bindings: the `qbcharge` extension module.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qbcharge::analytic::{ho_energy_form, tls_energy_form};
use qbcharge::blocks::DisplacedOscillators;
use qbcharge::lindblad::battery_observables;
use qbcharge::metrics::{self, charging_time_closed, ChargingReport};
use qbcharge::models::{ModelKind, Params as CoreParams};
use qbcharge::opalg::{ComplexMatrix, C64};
use qbcharge::scenarios::{self, reduced_charging_time, steady_state_auto, Solver, StochasticSettings};
use qbcharge::series::TimeSeries;
use qbcharge::stochastic::Scheme;
use qbcharge::Error;

/// Maps solver errors onto Python exceptions: bad input is a `ValueError`,
/// a numerical failure a `RuntimeError`.
pub fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. }
        | Error::TooManyBatteries(_)
        | Error::CutoffTooSmall { .. }
        | Error::RequiresResonance { .. }
        | Error::RegimeMismatch(_)
        | Error::Incompatible(_)
        | Error::DimMismatch { .. }
        | Error::NotHermitian { .. }
        | Error::OnResonancePole => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// `two_tls`, `two_ho`, `tls_ho`, or `star_tls` with a battery count.
pub fn model_kind(name: &str, n_batteries: Option<usize>) -> Result<ModelKind, String> {
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

fn kind_arg(model: &str, n_batteries: Option<usize>) -> PyResult<ModelKind> {
    model_kind(model, n_batteries).map_err(PyValueError::new_err)
}

/// Model parameters in the drive frame, with hbar = 1.
#[pyclass(name = "Params", module = "qbcharge", skip_from_py_object)]
#[derive(Clone, Copy, Debug)]
pub struct PyParams {
    pub inner: CoreParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (g = 1.0, F = 0.5, gamma_C = 1.0, omega_B = 1.0, delta_Cd = 0.0, delta_Bd = 0.0))]
    #[allow(non_snake_case)]
    fn new(g: f64, F: f64, gamma_C: f64, omega_B: f64, delta_Cd: f64, delta_Bd: f64) -> PyResult<Self> {
        let inner = CoreParams {
            g,
            f: F,
            gamma_c: gamma_C,
            omega_b: omega_B,
            delta_cd: delta_Cd,
            delta_bd: delta_Bd,
        };
        inner.validate().map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn g(&self) -> f64 {
        self.inner.g
    }
    #[getter(F)]
    fn f(&self) -> f64 {
        self.inner.f
    }
    #[getter(gamma_C)]
    fn gamma_c(&self) -> f64 {
        self.inner.gamma_c
    }
    #[getter(omega_B)]
    fn omega_b(&self) -> f64 {
        self.inner.omega_b
    }
    #[getter(delta_Cd)]
    fn delta_cd(&self) -> f64 {
        self.inner.delta_cd
    }
    #[getter(delta_Bd)]
    fn delta_bd(&self) -> f64 {
        self.inner.delta_bd
    }

    /// Copy with a different dephasing rate.
    #[allow(non_snake_case)]
    fn with_gamma(&self, gamma_C: f64) -> PyResult<Self> {
        let inner = self.inner.with_gamma(gamma_C);
        inner.validate().map_err(to_py_err)?;
        Ok(Self { inner })
    }

    fn is_resonant(&self) -> bool {
        self.inner.is_resonant()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "Params(g={}, F={}, gamma_C={}, omega_B={}, delta_Cd={}, delta_Bd={})",
            p.g, p.f, p.gamma_c, p.omega_b, p.delta_cd, p.delta_bd
        )
    }
}

/// Charging-time result.
#[pyclass(name = "ChargingReport", module = "qbcharge", get_all, skip_from_py_object)]
#[derive(Clone, Debug)]
pub struct PyChargingReport {
    pub tau: f64,
    pub n: u32,
    pub e_ss: f64,
    pub e_max_transient: f64,
    pub gamma_c: f64,
    pub converged: bool,
    pub horizon: f64,
    /// `closed_form` or `block_reduction`.
    pub method: String,
}

impl PyChargingReport {
    fn new(r: ChargingReport, method: &str) -> Self {
        Self {
            tau: r.tau,
            n: r.n,
            e_ss: r.e_ss,
            e_max_transient: r.e_max_transient,
            gamma_c: r.gamma_c,
            converged: r.converged,
            horizon: r.horizon,
            method: method.into(),
        }
    }
}

#[pymethods]
impl PyChargingReport {
    fn __repr__(&self) -> String {
        format!(
            "ChargingReport(tau={}, n={}, e_ss={}, converged={}, method='{}')",
            self.tau,
            self.n,
            self.e_ss,
            if self.converged { "True" } else { "False" },
            self.method
        )
    }
}

/// Series columns keyed by name, with `t` first and `<name>_se` for errors.
pub fn series_columns(s: &TimeSeries) -> Vec<(String, Vec<f64>)> {
    let mut out = vec![("t".to_string(), s.times.clone())];
    for (k, v) in &s.columns {
        out.push((k.clone(), v.clone()));
        if let Some(e) = s.errors.get(k) {
            out.push((format!("{k}_se"), e.clone()));
        }
    }
    out
}

fn columns_dict(py: Python<'_>, cols: Vec<(String, Vec<f64>)>) -> PyResult<Bound<'_, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in cols {
        d.set_item(k, v)?;
    }
    Ok(d)
}

fn parse_scheme(name: &str) -> PyResult<Scheme> {
    [Scheme::MeasurementNonlinear, Scheme::ClassicalNoiseLinear]
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown scheme '{name}' (measurement, noise)")))
}

/// Evolves the model from its ground state and returns the observables on `t`.
#[pyfunction]
#[pyo3(signature = (model, params, t, solver = "lindblad", n_batteries = None, cutoff = None, n_traj = 1000, seed = 1, dt = None, scheme = "measurement"))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    model: &str,
    params: &PyParams,
    t: Vec<f64>,
    solver: &str,
    n_batteries: Option<usize>,
    cutoff: Option<usize>,
    n_traj: usize,
    seed: u64,
    dt: Option<f64>,
    scheme: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = kind_arg(model, n_batteries)?;
    let solver: Solver = solver.parse().map_err(PyValueError::new_err)?;
    let stoch = StochasticSettings {
        dt,
        n_traj,
        seed,
        scheme: parse_scheme(scheme)?,
    };
    let p = params.inner;
    let s = py
        .detach(|| scenarios::simulate(kind, p, cutoff, solver, &t, &stoch))
        .map_err(to_py_err)?;
    columns_dict(py, series_columns(&s))
}

/// Time for the battery energy to settle within e^-n of its initial
/// deviation from the steady value. Closed forms are used where they exist.
#[pyfunction]
#[pyo3(signature = (model, params, n = 18, n_batteries = None, cutoff = None))]
fn charging_time(
    py: Python<'_>,
    model: &str,
    params: &PyParams,
    n: u32,
    n_batteries: Option<usize>,
    cutoff: Option<usize>,
) -> PyResult<PyChargingReport> {
    let kind = kind_arg(model, n_batteries)?;
    let p = params.inner;
    py.detach(|| -> qbcharge::Result<PyChargingReport> {
        match kind {
            ModelKind::TwoTls if p.is_resonant() => {
                Ok(PyChargingReport::new(charging_time_closed(&tls_energy_form(&p)?, n)?, "closed_form"))
            }
            ModelKind::TwoHo if p.is_resonant() => {
                Ok(PyChargingReport::new(charging_time_closed(&ho_energy_form(&p)?, n)?, "closed_form"))
            }
            _ => Ok(PyChargingReport::new(
                reduced_charging_time(kind, p, cutoff, n)?.report,
                "block_reduction",
            )),
        }
    })
    .map_err(to_py_err)
}

/// Stationary battery energy and ergotropy, as a `(energy, ergotropy)` pair.
#[pyfunction]
#[pyo3(signature = (model, params, n_batteries = None, cutoff = None))]
fn steady_state(
    py: Python<'_>,
    model: &str,
    params: &PyParams,
    n_batteries: Option<usize>,
    cutoff: Option<usize>,
) -> PyResult<(f64, f64)> {
    let kind = kind_arg(model, n_batteries)?;
    let p = params.inner;
    py.detach(|| -> qbcharge::Result<(f64, f64)> {
        if kind == ModelKind::TwoHo && p.is_resonant() {
            let sys = DisplacedOscillators::new(&p)?;
            return sys.battery_energy_ergotropy(&sys.steady_state()?);
        }
        let (m, rho) = steady_state_auto(kind, p, cutoff)?;
        let b = battery_observables(&m, &rho)?;
        Ok((b.energy, b.ergotropy))
    })
    .map_err(to_py_err)
}

/// Square matrix from nested rows of complex numbers.
pub fn matrix_from_rows(rows: &[Vec<C64>]) -> Result<ComplexMatrix, String> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err("expected a non-empty square matrix".into());
    }
    ComplexMatrix::from_vec(n, rows.concat()).map_err(|e| e.to_string())
}

fn matrix_arg(rows: Vec<Vec<C64>>) -> PyResult<ComplexMatrix> {
    matrix_from_rows(&rows).map_err(PyValueError::new_err)
}

/// Largest energy extractable from `rho` by a unitary, for Hamiltonian `h`.
#[pyfunction]
fn ergotropy(rho: Vec<Vec<C64>>, h: Vec<Vec<C64>>) -> PyResult<f64> {
    metrics::ergotropy(&matrix_arg(rho)?, &matrix_arg(h)?).map_err(to_py_err)
}

/// Tr(rho h).
#[pyfunction]
fn energy(rho: Vec<Vec<C64>>, h: Vec<Vec<C64>>) -> PyResult<f64> {
    metrics::energy(&matrix_arg(rho)?, &matrix_arg(h)?).map_err(to_py_err)
}

/// Von Neumann entropy in nats.
#[pyfunction]
fn entropy(rho: Vec<Vec<C64>>) -> PyResult<f64> {
    metrics::entropy(&matrix_arg(rho)?).map_err(to_py_err)
}

/// Data tables behind a named figure: `{table: {column: values}}`.
#[pyfunction]
fn figure<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyDict>> {
    let data = py.detach(|| scenarios::figure(name)).map_err(to_py_err)?;
    let out = PyDict::new(py);
    for (k, t) in data.tables {
        out.set_item(k, columns_dict(py, t.columns.into_iter().collect())?)?;
    }
    Ok(out)
}

#[pymodule]
#[pyo3(name = "qbcharge")]
pub fn qbcharge_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyChargingReport>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(charging_time, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(ergotropy, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(figure, m)?)?;
    m.add("FIGURES", scenarios::FIGURES.to_vec())?;
    m.add("MODELS", vec!["two_tls", "two_ho", "tls_ho", "star_tls"])?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
