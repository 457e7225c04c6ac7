//! Dephasing master equation in the rotating frame:
//! d rho/dt = -i[H, rho] + gamma (L rho L - {L^2, rho}/2).

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::expm::expm;
use crate::metrics;
use crate::models::{ModelKind, ModelSpec};
use crate::ode::{dopri5, OdeOptions, OdeStats};
use crate::opalg::{
    expect, herm_eig, herm_eigvals, ops, ComplexMatrix, C64, HERMITIAN_RUNTIME_TOL, I, ZERO,
};
use crate::series::{self, TimeSeries};

/// Pre-processed generator for repeated application.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    dim: usize,
    h_triplets: Vec<(usize, usize, C64)>,
    /// Elementwise dissipator rates -gamma/2 (l_i - l_j)^2 when the jump is diagonal.
    diag_rates: Option<Vec<f64>>,
    jump: ComplexMatrix,
    jump_sq: ComplexMatrix,
    gamma: f64,
}

impl Liouvillian {
    pub fn new(model: &ModelSpec) -> Self {
        Self::from_parts(&model.hamiltonian, &model.jump, model.params.gamma_c)
    }

    pub fn from_parts(h: &ComplexMatrix, jump: &ComplexMatrix, gamma: f64) -> Self {
        let dim = h.dim();
        assert_eq!(dim, jump.dim(), "hamiltonian and jump dimensions differ");
        let diag_rates = jump.is_diagonal(0.0).then(|| {
            let l: Vec<f64> = jump.diagonal().iter().map(|z| z.re).collect();
            let mut r = vec![0.0; dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    let d = l[i] - l[j];
                    r[i * dim + j] = -0.5 * gamma * d * d;
                }
            }
            r
        });
        Self {
            dim,
            h_triplets: h.triplets(0.0),
            diag_rates,
            jump: jump.clone(),
            jump_sq: jump.matmul(jump),
            gamma,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Generator applied to a hermitian state given as a row-major slice.
    /// Uses -i[H, rho] = X + X^dag with X = -i H rho, so the output is
    /// hermitian by construction.
    pub fn apply_hermitian(&self, rho: &[C64], out: &mut [C64]) {
        let n = self.dim;
        out.iter_mut().for_each(|x| *x = ZERO);
        for &(i, k, h) in &self.h_triplets {
            let c = -I * h;
            let src = &rho[k * n..(k + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += c * s;
            }
        }
        for i in 0..n {
            for j in i..n {
                let a = out[i * n + j];
                let b = out[j * n + i];
                let s = a + b.conj();
                out[i * n + j] = s;
                out[j * n + i] = s.conj();
            }
        }
        self.add_dissipator(rho, out);
    }

    /// Generator applied to an arbitrary matrix.
    pub fn apply_general(&self, rho: &[C64], out: &mut [C64]) {
        let n = self.dim;
        out.iter_mut().for_each(|x| *x = ZERO);
        for &(i, k, h) in &self.h_triplets {
            let c = -I * h;
            // -i H rho
            for j in 0..n {
                out[i * n + j] += c * rho[k * n + j];
            }
            // +i rho H: (rho H)_{r,k} picks rho_{r,i} H_{i,k}
            for r in 0..n {
                out[r * n + k] -= c * rho[r * n + i];
            }
        }
        self.add_dissipator(rho, out);
    }

    fn add_dissipator(&self, rho: &[C64], out: &mut [C64]) {
        if self.gamma == 0.0 {
            return;
        }
        match &self.diag_rates {
            Some(rates) => {
                for ((o, &r), &x) in out.iter_mut().zip(rates).zip(rho) {
                    *o += x * r;
                }
            }
            None => {
                let n = self.dim;
                let m = ComplexMatrix::from_vec(n, rho.to_vec()).expect("square state");
                let lrl = self.jump.matmul(&m).matmul(&self.jump);
                let anti = self.jump_sq.anticommutator(&m);
                let g = self.gamma;
                for (k, o) in out.iter_mut().enumerate() {
                    *o += (lrl.as_slice()[k] - anti.as_slice()[k] * 0.5) * g;
                }
            }
        }
    }

    /// Dense superoperator acting on row-major vectorized matrices,
    /// vec(rho)[i*d + j] = rho[i, j].
    pub fn superoperator(&self) -> DMatrix<C64> {
        let n = self.dim;
        let mut s = DMatrix::<C64>::zeros(n * n, n * n);
        for &(i, k, h) in &self.h_triplets {
            let c = -I * h;
            for j in 0..n {
                s[(i * n + j, k * n + j)] += c;
                // -(rho H)_{j,k} picks rho_{j,i} H_{i,k}
                s[(j * n + k, j * n + i)] -= c;
            }
        }
        if self.gamma != 0.0 {
            let g = self.gamma;
            let l = &self.jump;
            let l2 = &self.jump_sq;
            for i in 0..n {
                for j in 0..n {
                    let row = i * n + j;
                    for k in 0..n {
                        let lik = l[(i, k)];
                        for m in 0..n {
                            let lmj = l[(m, j)];
                            if lik != ZERO && lmj != ZERO {
                                s[(row, k * n + m)] += lik * lmj * g;
                            }
                        }
                        if l2[(i, k)] != ZERO {
                            s[(row, k * n + j)] -= l2[(i, k)] * (0.5 * g);
                        }
                        if l2[(k, j)] != ZERO {
                            s[(row, i * n + k)] -= l2[(k, j)] * (0.5 * g);
                        }
                    }
                }
            }
        }
        s
    }
}

/// -i[H, rho] + gamma (L rho L - {L^2, rho}/2).
pub fn liouvillian_apply(model: &ModelSpec, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho.dim() != model.dim() {
        return Err(Error::DimMismatch {
            expected: model.dim(),
            found: rho.dim(),
        });
    }
    let l = Liouvillian::new(model);
    let mut out = vec![ZERO; rho.dim() * rho.dim()];
    l.apply_general(rho.as_slice(), &mut out);
    ComplexMatrix::from_vec(rho.dim(), out)
}

/// Which observables to record along an integration.
#[derive(Clone, Copy, Debug, Default)]
pub struct IntegrateOptions {
    pub ode: OdeOptions,
    pub store_states: bool,
    /// Checks the minimum eigenvalue of the full state at every output.
    pub check_positivity: bool,
    /// Records only the battery energy, skipping the spectral observables.
    pub energy_only: bool,
}


/// Diagnostics collected along an integration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegrationDiagnostics {
    pub stats: OdeStats,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// Smallest eigenvalue seen; `NAN` unless positivity checks were on.
    pub min_eigenvalue: f64,
    /// Largest population in the top two Fock levels.
    pub max_fock_tail: Option<f64>,
}

/// Battery observables of a single state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatteryObservables {
    pub energy: f64,
    pub ergotropy: f64,
    pub entropy: f64,
    /// sigma^z for a TLS battery, photon number for an oscillator.
    pub population: f64,
    pub lower: C64,
}

pub fn battery_observables(model: &ModelSpec, rho: &ComplexMatrix) -> Result<BatteryObservables> {
    let rb = model.battery_state(rho)?;
    let energy = metrics::energy(&rb, &model.battery_h)?;
    let ergotropy = metrics::ergotropy(&rb, &model.battery_h)?;
    let entropy = metrics::entropy(&rb)?;
    let (population, lower) = match model.kind {
        ModelKind::TwoTls => (
            expect(&ops::sigma_z(), &rb)?.re,
            expect(&ops::sigma_minus(), &rb)?,
        ),
        ModelKind::TwoHo | ModelKind::TlsHo => {
            let c = rb.dim();
            (
                expect(&ops::number(c), &rb)?.re,
                expect(&ops::annihilation(c), &rb)?,
            )
        }
        ModelKind::StarTls(_) => (energy / model.params.omega_b, ZERO),
    };
    Ok(BatteryObservables {
        energy,
        ergotropy,
        entropy,
        population,
        lower,
    })
}

fn population_column(kind: ModelKind) -> Option<&'static str> {
    match kind {
        ModelKind::TwoTls => Some(series::SZ_B),
        ModelKind::TwoHo | ModelKind::TlsHo => Some(series::N_B),
        ModelKind::StarTls(_) => None,
    }
}

fn check_density(rho: &ComplexMatrix) -> Result<()> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(invalid("rho0", format!("trace {tr} is not 1")));
    }
    let h = rho.hermiticity_error();
    if h > HERMITIAN_RUNTIME_TOL {
        return Err(Error::NotHermitian { deviation: h });
    }
    Ok(())
}

/// Integrates from `rho0`, recording battery observables at `t_grid`.
pub fn integrate(model: &ModelSpec, rho0: &ComplexMatrix, t_grid: &[f64]) -> Result<TimeSeries> {
    integrate_with(model, rho0, t_grid, &IntegrateOptions::default()).map(|(s, _)| s)
}

pub fn integrate_with(
    model: &ModelSpec,
    rho0: &ComplexMatrix,
    t_grid: &[f64],
    opts: &IntegrateOptions,
) -> Result<(TimeSeries, IntegrationDiagnostics)> {
    if rho0.dim() != model.dim() {
        return Err(Error::DimMismatch {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }
    check_density(rho0)?;
    series::check_grid(t_grid)?;
    let t0 = t_grid[0];
    let n = model.dim();
    let nt = t_grid.len();
    let pop_col = population_column(model.kind);
    let mut energy = Vec::with_capacity(nt);
    let mut ergo = Vec::with_capacity(nt);
    let mut ent = Vec::with_capacity(nt);
    let mut pop = Vec::with_capacity(nt);
    let mut re_l = Vec::with_capacity(nt);
    let mut im_l = Vec::with_capacity(nt);
    let mut states = opts.store_states.then(|| Vec::with_capacity(nt));
    let mut diag = IntegrationDiagnostics {
        min_eigenvalue: f64::NAN,
        ..Default::default()
    };

    let h_b: Vec<f64> = model.battery_h_full().diagonal().iter().map(|z| z.re).collect();
    let h_b_diagonal = model.battery_h.is_diagonal(0.0);
    let l = Liouvillian::new(model);
    let stats = dopri5(
        |_, y: &[C64], dy: &mut [C64]| l.apply_hermitian(y, dy),
        t0,
        rho0.as_slice(),
        t_grid,
        &opts.ode,
        |y: &mut [C64]| {
            let mut m = ComplexMatrix::from_vec(n, y.to_vec()).expect("square state");
            let drift = m.hermitize();
            y.copy_from_slice(m.as_slice());
            drift
        },
        |_, _, y| {
            let mut rho = ComplexMatrix::from_vec(n, y.to_vec())?;
            diag.max_hermiticity_error = diag.max_hermiticity_error.max(rho.hermiticity_error());
            rho.hermitize();
            diag.max_trace_error = diag.max_trace_error.max((rho.trace().re - 1.0).abs());
            if opts.check_positivity {
                let ev = herm_eigvals(&rho)?;
                diag.min_eigenvalue = diag.min_eigenvalue.min(ev[0]);
            }
            if let Some(tail) = model.fock_tail(&rho)? {
                diag.max_fock_tail = Some(diag.max_fock_tail.map_or(tail, |w| w.max(tail)));
            }
            if opts.energy_only && h_b_diagonal {
                energy.push((0..n).map(|i| rho[(i, i)].re * h_b[i]).sum());
                if let Some(s) = states.as_mut() {
                    s.push(rho);
                }
                return Ok(());
            }
            let obs = battery_observables(model, &rho)?;
            energy.push(obs.energy);
            ergo.push(obs.ergotropy);
            ent.push(obs.entropy);
            pop.push(obs.population);
            re_l.push(obs.lower.re);
            im_l.push(obs.lower.im);
            if let Some(s) = states.as_mut() {
                s.push(rho);
            }
            Ok(())
        },
    )?;
    diag.stats = stats;

    let mut out = TimeSeries::new(t_grid.to_vec())?;
    out.insert(series::ENERGY, energy)?;
    if ergo.len() == nt {
        out.insert(series::ERGOTROPY, ergo)?;
        out.insert(series::ENTROPY, ent)?;
    }
    if let (Some(name), true) = (pop_col, pop.len() == nt) {
        out.insert(name, pop)?;
        out.insert(series::RE_LOWER_B, re_l)?;
        out.insert(series::IM_LOWER_B, im_l)?;
    }
    out.states = states;
    out.meta.insert("solver".into(), "lindblad".into());
    out.meta.insert("gamma_C".into(), format!("{}", model.params.gamma_c));
    out.meta
        .insert("max_hermitize_drift".into(), format!("{:e}", stats.max_post_step_drift));
    if let Some(tail) = diag.max_fock_tail {
        out.meta.insert("max_fock_tail".into(), format!("{tail:e}"));
    }
    Ok((out, diag))
}

/// Final state after evolving `rho0` over `[0, t]`.
pub fn evolve_state(model: &ModelSpec, rho0: &ComplexMatrix, t: f64, ode: &OdeOptions) -> Result<ComplexMatrix> {
    let n = model.dim();
    let l = Liouvillian::new(model);
    let mut last = rho0.clone();
    if t == 0.0 {
        return Ok(last);
    }
    dopri5(
        |_, y: &[C64], dy: &mut [C64]| l.apply_hermitian(y, dy),
        0.0,
        rho0.as_slice(),
        &[t],
        ode,
        |y: &mut [C64]| {
            let mut m = ComplexMatrix::from_vec(n, y.to_vec()).expect("square state");
            let drift = m.hermitize();
            y.copy_from_slice(m.as_slice());
            drift
        },
        |_, _, y| {
            last = ComplexMatrix::from_vec(n, y.to_vec())?;
            Ok(())
        },
    )?;
    last.hermitize();
    Ok(last)
}

/// Largest superoperator dimension propagated with the matrix exponential.
pub const EXPM_MAX_SUPERDIM: usize = 4096;

/// Exact propagation with exp(L dt) of the vectorized generator.
pub fn integrate_expm(model: &ModelSpec, rho0: &ComplexMatrix, t_grid: &[f64]) -> Result<TimeSeries> {
    let n = model.dim();
    if n * n > EXPM_MAX_SUPERDIM {
        return Err(invalid(
            "model",
            format!("superoperator dimension {} exceeds {EXPM_MAX_SUPERDIM}", n * n),
        ));
    }
    check_density(rho0)?;
    series::check_grid(t_grid)?;
    let sup = Liouvillian::new(model).superoperator();
    let mut v = nalgebra::DVector::from_column_slice(rho0.as_slice());
    let mut cache: Vec<(u64, DMatrix<C64>)> = Vec::new();
    let mut t_prev = 0.0;
    let mut states = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let dt = t - t_prev;
        if dt != 0.0 {
            let key = dt.to_bits();
            let idx = match cache.iter().position(|(k, _)| *k == key) {
                Some(i) => i,
                None => {
                    cache.push((key, expm(&(&sup * C64::new(dt, 0.0)))?));
                    cache.len() - 1
                }
            };
            v = &cache[idx].1 * v;
        }
        t_prev = t;
        let mut rho = ComplexMatrix::from_vec(n, v.iter().copied().collect())?;
        rho.hermitize();
        states.push(rho);
    }
    let mut out = series_from_states(model, t_grid, &states)?;
    out.meta.insert("solver".into(), "lindblad-expm".into());
    Ok(out)
}

/// Battery observables for a list of states.
pub fn series_from_states(model: &ModelSpec, t_grid: &[f64], states: &[ComplexMatrix]) -> Result<TimeSeries> {
    let mut out = TimeSeries::new(t_grid.to_vec())?;
    let obs: Vec<BatteryObservables> = states
        .iter()
        .map(|r| battery_observables(model, r))
        .collect::<Result<_>>()?;
    out.insert(series::ENERGY, obs.iter().map(|o| o.energy).collect())?;
    out.insert(series::ERGOTROPY, obs.iter().map(|o| o.ergotropy).collect())?;
    out.insert(series::ENTROPY, obs.iter().map(|o| o.entropy).collect())?;
    if let Some(name) = population_column(model.kind) {
        out.insert(name, obs.iter().map(|o| o.population).collect())?;
        out.insert(series::RE_LOWER_B, obs.iter().map(|o| o.lower.re).collect())?;
        out.insert(series::IM_LOWER_B, obs.iter().map(|o| o.lower.im).collect())?;
    }
    out.meta.insert("gamma_C".into(), format!("{}", model.params.gamma_c));
    Ok(out)
}

/// Null-space search is done densely up to this Hilbert-space dimension.
pub const NULLSPACE_MAX_DIM: usize = 16;
/// Singular values below this fraction of the largest count as zero.
pub const NULL_SINGULAR_TOL: f64 = 1e-9;
/// Residual target for a stationary state.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-8;

struct NullSpace {
    right: Vec<nalgebra::DVector<C64>>,
    left: Vec<nalgebra::DVector<C64>>,
}

fn null_vectors(m: &DMatrix<C64>) -> Result<Vec<nalgebra::DVector<C64>>> {
    let dim = m.ncols();
    if let Some(svd) = m.clone().try_svd(false, true, 1e-15, 10_000) {
        let vt = svd.v_t.expect("requested");
        let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s)).max(1e-300);
        return Ok(svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= NULL_SINGULAR_TOL * smax)
            .map(|(k, _)| nalgebra::DVector::from_fn(dim, |i, _| vt[(k, i)].conj()))
            .collect());
    }
    // eigenvectors of M^dag M; its eigenvalues carry absolute error ~ eps |M|^2
    let gram = ComplexMatrix::from_dmatrix(&(m.adjoint() * m));
    let dec = herm_eig(&gram)?;
    let scale = dec.eigenvalues.last().copied().unwrap_or(1.0).max(1e-300);
    Ok(dec
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &ev)| ev <= 1e-12 * scale)
        .map(|(k, _)| nalgebra::DVector::from_fn(dim, |i, _| dec.eigenvectors[(i, k)]))
        .collect())
}

fn null_space(model: &ModelSpec) -> Result<NullSpace> {
    let n = model.dim();
    if n > NULLSPACE_MAX_DIM {
        return Err(invalid(
            "model",
            format!("dimension {n} exceeds the dense null-space limit {NULLSPACE_MAX_DIM}"),
        ));
    }
    let sup = Liouvillian::new(model).superoperator();
    let right = null_vectors(&sup)?;
    let left = null_vectors(&sup.adjoint())?;
    if right.len() != left.len() || right.is_empty() {
        return Err(Error::SingularMatrix);
    }
    Ok(NullSpace { right, left })
}

fn residual(model: &ModelSpec, rho: &ComplexMatrix) -> f64 {
    let l = Liouvillian::new(model);
    let mut out = vec![ZERO; rho.dim() * rho.dim()];
    l.apply_general(rho.as_slice(), &mut out);
    out.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn normalize_state(mut rho: ComplexMatrix) -> ComplexMatrix {
    rho.hermitize();
    let tr = rho.trace().re;
    rho.scale(C64::new(1.0 / tr, 0.0))
}

/// Unique stationary state from the null space of the generator.
pub fn nullspace_steady_state(model: &ModelSpec) -> Result<ComplexMatrix> {
    let ns = null_space(model)?;
    if ns.right.len() > 1 {
        return Err(Error::DegenerateSteadyState {
            nullity: ns.right.len(),
        });
    }
    let n = model.dim();
    let rho = ComplexMatrix::from_vec(n, ns.right[0].iter().copied().collect())?;
    Ok(normalize_state(rho))
}

/// Dimension of the stationary subspace.
pub fn steady_state_nullity(model: &ModelSpec) -> Result<usize> {
    Ok(null_space(model)?.right.len())
}

/// Long-time limit of the evolution started in `rho0`.
///
/// Small models use the spectral projector onto the null space, which is
/// exact even when several stationary states exist. Larger ones integrate
/// until the generator residual drops below tolerance.
pub fn steady_state_from(model: &ModelSpec, rho0: &ComplexMatrix) -> Result<ComplexMatrix> {
    let p = model.params;
    if !(p.gamma_c > 0.0) {
        return Err(invalid("gamma_C", "a steady state needs gamma_C > 0"));
    }
    check_density(rho0)?;
    let n = model.dim();
    if n <= NULLSPACE_MAX_DIM {
        let ns = null_space(model)?;
        let k = ns.right.len();
        let v0 = nalgebra::DVector::from_column_slice(rho0.as_slice());
        let gram = DMatrix::from_fn(k, k, |j, i| ns.left[j].dotc(&ns.right[i]));
        let proj = nalgebra::DVector::from_fn(k, |j, _| ns.left[j].dotc(&v0));
        let coef = gram.lu().solve(&proj).ok_or(Error::SingularMatrix)?;
        let mut v = nalgebra::DVector::<C64>::zeros(n * n);
        for (i, c) in coef.iter().enumerate() {
            v += &ns.right[i] * *c;
        }
        let rho = normalize_state(ComplexMatrix::from_vec(n, v.iter().copied().collect())?);
        let res = residual(model, &rho);
        if res <= STEADY_RESIDUAL_TOL {
            return Ok(rho);
        }
    }
    steady_state_by_integration(model, rho0)
}

/// Steady state reached from the free ground state.
pub fn steady_state(model: &ModelSpec) -> Result<ComplexMatrix> {
    steady_state_from(model, &model.ground_state())
}

/// Integration horizon 50 max(1/gamma, gamma/g^2, 1/g) used as the first leg.
pub fn steady_horizon(model: &ModelSpec) -> f64 {
    let p = model.params;
    let g = p.g.max(1e-12);
    50.0 * (1.0 / p.gamma_c).max(p.gamma_c / (g * g)).max(1.0 / g)
}

fn steady_state_by_integration(model: &ModelSpec, rho0: &ComplexMatrix) -> Result<ComplexMatrix> {
    let leg = steady_horizon(model);
    let ode = OdeOptions::default();
    let mut rho = evolve_state(model, rho0, leg, &ode)?;
    let mut t = leg;
    for _ in 0..8 {
        if residual(model, &rho) <= STEADY_RESIDUAL_TOL {
            return Ok(normalize_state(rho));
        }
        rho = evolve_state(model, &rho, t, &ode)?;
        t *= 2.0;
    }
    if residual(model, &rho) <= STEADY_RESIDUAL_TOL {
        return Ok(normalize_state(rho));
    }
    Err(Error::NotConverged { horizon: t })
}

/// Outcome-averaged Gaussian POVM channel of strength gamma dt in the
/// eigenbasis of `jump`: coherence (m, n) is multiplied by
/// exp(-gamma dt (lambda_m - lambda_n)^2 / 2).
pub fn povm_average_channel(rho: &ComplexMatrix, jump: &ComplexMatrix, gamma: f64, dt: f64) -> Result<ComplexMatrix> {
    if rho.dim() != jump.dim() {
        return Err(Error::DimMismatch {
            expected: jump.dim(),
            found: rho.dim(),
        });
    }
    if !(gamma * dt >= 0.0) {
        return Err(invalid("gamma_dt", "must be non-negative"));
    }
    let n = rho.dim();
    let s = gamma * dt;
    let factor = |a: f64, b: f64| (-0.5 * s * (a - b) * (a - b)).exp();
    if jump.is_diagonal(0.0) {
        let l: Vec<f64> = jump.diagonal().iter().map(|z| z.re).collect();
        return Ok(ComplexMatrix::from_fn(n, |i, j| rho[(i, j)] * factor(l[i], l[j])));
    }
    let dec = herm_eig(jump)?;
    let v = &dec.eigenvectors;
    let rot = v.dagger().matmul(rho).matmul(v);
    let lam = &dec.eigenvalues;
    let damped = ComplexMatrix::from_fn(n, |i, j| rot[(i, j)] * factor(lam[i], lam[j]));
    Ok(v.matmul(&damped).matmul(&v.dagger()))
}
