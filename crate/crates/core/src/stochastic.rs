//! Pure-state unravellings of the dephasing master equation.
//!
//! Two Euler-Maruyama schemes: the nonlinear continuous-measurement
//! equation
//!   dψ = [-iH - γ/2 (L-<L>)²] ψ dt + √γ (L-<L>) ψ dW
//! and the linear classical-noise equation in Itô form
//!   dψ = [-iH - γ/2 L²] ψ dt - i√γ L ψ dW.
//! Both states are renormalized after every step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lindblad::battery_observables;
use crate::models::{ModelKind, ModelSpec};
use crate::opalg::{herm_eigvals, kron, ops, ComplexMatrix, C64, I, ZERO};
use crate::series::{self, TimeSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    MeasurementNonlinear,
    ClassicalNoiseLinear,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::MeasurementNonlinear => "measurement",
            Scheme::ClassicalNoiseLinear => "noise",
        }
    }
}

/// Bound on dt·γ and dt·‖H‖.
pub const STABILITY_LIMIT: f64 = 0.05;
/// Pre-normalization norm beyond which a trajectory counts as unstable.
pub const UNSTABLE_NORM: f64 = 1e3;
/// Trajectories per deterministic accumulation chunk.
const CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub n_traj: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl TrajectoryConfig {
    /// Config covering [0, t_end] with step `dt`.
    pub fn covering(t_end: f64, dt: f64, n_traj: usize, seed: u64, scheme: Scheme) -> Self {
        Self {
            dt,
            n_steps: (t_end / dt).round() as usize,
            n_traj,
            seed,
            scheme,
        }
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", "must be positive"));
        }
        if self.n_traj < 1 {
            return Err(invalid("n_traj", "need at least one trajectory"));
        }
        if self.n_steps < 1 {
            return Err(invalid("n_steps", "need at least one step"));
        }
        if self.dt * model.params.gamma_c > STABILITY_LIMIT {
            return Err(invalid("dt", format!("dt*gamma_C exceeds {STABILITY_LIMIT}")));
        }
        let hn = spectral_norm(&model.hamiltonian)?;
        if self.dt * hn > STABILITY_LIMIT {
            return Err(invalid("dt", format!("dt*|H| = {} exceeds {STABILITY_LIMIT}", self.dt * hn)));
        }
        Ok(())
    }
}

fn spectral_norm(h: &ComplexMatrix) -> Result<f64> {
    let ev = herm_eigvals(h)?;
    Ok(ev.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

/// In-place stepper with preallocated buffers.
struct Stepper<'a> {
    h: &'a ComplexMatrix,
    jump: &'a ComplexMatrix,
    jump_diag: Option<Vec<f64>>,
    gamma: f64,
    hpsi: Vec<C64>,
    lpsi: Vec<C64>,
    l2psi: Vec<C64>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a ModelSpec) -> Self {
        let d = model.dim();
        let jump_diag = model
            .jump
            .is_diagonal(0.0)
            .then(|| model.jump.diagonal().iter().map(|z| z.re).collect());
        Self {
            h: &model.hamiltonian,
            jump: &model.jump,
            jump_diag,
            gamma: model.params.gamma_c,
            hpsi: vec![ZERO; d],
            lpsi: vec![ZERO; d],
            l2psi: vec![ZERO; d],
        }
    }

    fn apply_jump(&self, psi: &[C64], out: &mut [C64]) {
        match &self.jump_diag {
            Some(l) => out.iter_mut().zip(psi).zip(l).for_each(|((o, p), l)| *o = p * l),
            None => matvec(self.jump, psi, out),
        }
    }

    /// One unnormalized step; returns the norm of the result.
    fn step_raw(&mut self, scheme: Scheme, psi: &mut [C64], dt: f64, dw: f64) -> f64 {
        matvec(self.h, psi, &mut self.hpsi);
        let mut lpsi = std::mem::take(&mut self.lpsi);
        let mut l2psi = std::mem::take(&mut self.l2psi);
        self.apply_jump(psi, &mut lpsi);
        self.apply_jump(&lpsi, &mut l2psi);
        let g = self.gamma;
        let sg = g.sqrt();
        match scheme {
            Scheme::MeasurementNonlinear => {
                let mean: f64 = psi.iter().zip(&lpsi).map(|(p, l)| (p.conj() * l).re).sum();
                for k in 0..psi.len() {
                    // (L - m) psi and (L - m)^2 psi
                    let d1 = lpsi[k] - psi[k] * mean;
                    let d2 = l2psi[k] - lpsi[k] * (2.0 * mean) + psi[k] * (mean * mean);
                    psi[k] += (-I * self.hpsi[k] - d2 * (0.5 * g)) * dt + d1 * (sg * dw);
                }
            }
            Scheme::ClassicalNoiseLinear => {
                for k in 0..psi.len() {
                    psi[k] += (-I * self.hpsi[k] - l2psi[k] * (0.5 * g)) * dt - I * lpsi[k] * (sg * dw);
                }
            }
        }
        self.lpsi = lpsi;
        self.l2psi = l2psi;
        norm(psi)
    }
}

fn matvec(m: &ComplexMatrix, v: &[C64], out: &mut [C64]) {
    let d = v.len();
    let a = m.as_slice();
    for i in 0..d {
        let row = &a[i * d..(i + 1) * d];
        out[i] = row.iter().zip(v).fold(ZERO, |acc, (x, y)| acc + x * y);
    }
}

fn norm(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_ket(model: &ModelSpec, psi: &[C64]) -> Result<()> {
    if psi.len() != model.dim() {
        return Err(Error::DimMismatch {
            expected: model.dim(),
            found: psi.len(),
        });
    }
    let n = norm(psi);
    if (n - 1.0).abs() > 1e-8 {
        return Err(invalid("psi", format!("norm {n} is not 1")));
    }
    Ok(())
}

fn step_normalized(model: &ModelSpec, scheme: Scheme, psi: &[C64], dt: f64, dw: f64) -> Result<Vec<C64>> {
    check_ket(model, psi)?;
    let mut out = psi.to_vec();
    let n = Stepper::new(model).step_raw(scheme, &mut out, dt, dw);
    out.iter_mut().for_each(|z| *z /= n);
    Ok(out)
}

/// One measurement-scheme step followed by renormalization.
pub fn sse_step_measurement(psi: &[C64], model: &ModelSpec, dt: f64, dw: f64) -> Result<Vec<C64>> {
    step_normalized(model, Scheme::MeasurementNonlinear, psi, dt, dw)
}

/// One classical-noise step followed by renormalization.
pub fn sse_step_noise(psi: &[C64], model: &ModelSpec, dt: f64, dw: f64) -> Result<Vec<C64>> {
    step_normalized(model, Scheme::ClassicalNoiseLinear, psi, dt, dw)
}

/// Classical-noise step without renormalization. The norm is a
/// martingale of this map.
pub fn sse_step_noise_unnormalized(psi: &[C64], model: &ModelSpec, dt: f64, dw: f64) -> Result<Vec<C64>> {
    if psi.len() != model.dim() {
        return Err(Error::DimMismatch {
            expected: model.dim(),
            found: psi.len(),
        });
    }
    let mut out = psi.to_vec();
    Stepper::new(model).step_raw(Scheme::ClassicalNoiseLinear, &mut out, dt, dw);
    Ok(out)
}

/// Gaussian increment source for one trajectory.
pub fn trajectory_rng(seed: u64, trajectory: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory as u64);
    rng
}

/// Draws N(0, dt).
pub fn wiener_increment(rng: &mut ChaCha8Rng, dt: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * dt.sqrt()
}

/// Linear observables recorded per trajectory, as full-space operators.
fn linear_observables(model: &ModelSpec) -> Vec<(&'static str, ComplexMatrix, bool)> {
    // (column, operator, take imaginary part)
    let id = ComplexMatrix::identity(model.charger_dim());
    let mut out = vec![(series::ENERGY, model.battery_h_full(), false)];
    let (pop, lower) = match model.kind {
        ModelKind::TwoTls => (
            Some((series::SZ_B, ops::sigma_z())),
            Some(ops::sigma_minus()),
        ),
        ModelKind::TwoHo | ModelKind::TlsHo => {
            let c = model.battery_dim();
            (Some((series::N_B, ops::number(c))), Some(ops::annihilation(c)))
        }
        ModelKind::StarTls(_) => (None, None),
    };
    if let Some((name, op)) = pop {
        out.push((name, kron(&id, &op), false));
    }
    if let Some(op) = lower {
        let full = kron(&id, &op);
        out.push((series::RE_LOWER_B, full.clone(), false));
        out.push((series::IM_LOWER_B, full, true));
    }
    out
}

/// Running sums over a chunk of trajectories.
struct Sums {
    /// [checkpoint][observable]
    s1: Vec<Vec<f64>>,
    s2: Vec<Vec<f64>>,
    rho: Vec<ComplexMatrix>,
}

impl Sums {
    fn new(n_ck: usize, n_obs: usize, dim: usize) -> Self {
        Self {
            s1: vec![vec![0.0; n_obs]; n_ck],
            s2: vec![vec![0.0; n_obs]; n_ck],
            rho: vec![ComplexMatrix::zeros(dim); n_ck],
        }
    }

    fn add(&mut self, other: &Sums) {
        for k in 0..self.s1.len() {
            for j in 0..self.s1[k].len() {
                self.s1[k][j] += other.s1[k][j];
                self.s2[k][j] += other.s2[k][j];
            }
            self.rho[k] += &other.rho[k];
        }
    }
}

/// Maps grid times to step indices; each must sit on the dt lattice.
fn checkpoint_steps(cfg: &TrajectoryConfig, t_grid: &[f64]) -> Result<Vec<usize>> {
    series::check_grid(t_grid)?;
    t_grid
        .iter()
        .map(|&t| {
            let k = (t / cfg.dt).round();
            if k < 0.0 || (k * cfg.dt - t).abs() > 1e-9 * t.abs().max(1.0) {
                return Err(invalid("t_grid", format!("time {t} is not a multiple of dt")));
            }
            let k = k as usize;
            if k > cfg.n_steps {
                return Err(invalid("t_grid", format!("time {t} lies beyond n_steps*dt")));
            }
            Ok(k)
        })
        .collect()
}

fn run_chunk(
    model: &ModelSpec,
    cfg: &TrajectoryConfig,
    steps: &[usize],
    obs: &[(&'static str, ComplexMatrix, bool)],
    trajs: std::ops::Range<usize>,
) -> Result<Sums> {
    let d = model.dim();
    let mut sums = Sums::new(steps.len(), obs.len(), d);
    let mut stepper = Stepper::new(model);
    let mut tmp = vec![ZERO; d];
    let psi0 = model.ground_ket();
    let last = *steps.last().unwrap();
    for traj in trajs {
        let mut rng = trajectory_rng(cfg.seed, traj);
        let mut psi = psi0.clone();
        let mut next = 0;
        let mut step = 0usize;
        loop {
            while next < steps.len() && steps[next] == step {
                for (j, (_, op, imag)) in obs.iter().enumerate() {
                    matvec(op, &psi, &mut tmp);
                    let z = psi.iter().zip(&tmp).fold(ZERO, |a, (p, q)| a + p.conj() * q);
                    let v = if *imag { z.im } else { z.re };
                    sums.s1[next][j] += v;
                    sums.s2[next][j] += v * v;
                }
                let r = &mut sums.rho[next];
                for i in 0..d {
                    for k in 0..d {
                        r[(i, k)] += psi[i] * psi[k].conj();
                    }
                }
                next += 1;
            }
            if step == last {
                break;
            }
            let dw = wiener_increment(&mut rng, cfg.dt);
            let n = stepper.step_raw(cfg.scheme, &mut psi, cfg.dt, dw);
            step += 1;
            if !(n <= UNSTABLE_NORM) {
                return Err(Error::Unstable {
                    trajectory: traj,
                    step,
                    norm: n,
                });
            }
            psi.iter_mut().for_each(|z| *z /= n);
        }
    }
    Ok(sums)
}

/// Ensemble average over `cfg.n_traj` trajectories from the ground state.
///
/// Linear observables (energy, population, lowering operator) carry
/// standard errors. Ergotropy and entropy are evaluated on the averaged
/// state, which is also returned in `states`. Results do not depend on
/// the thread count; `QB_THREADS` limits the pool size.
pub fn ensemble_run(model: &ModelSpec, cfg: &TrajectoryConfig, t_grid: &[f64]) -> Result<TimeSeries> {
    cfg.validate(model)?;
    let steps = checkpoint_steps(cfg, t_grid)?;
    let obs = linear_observables(model);
    let chunks: Vec<std::ops::Range<usize>> = (0..cfg.n_traj)
        .step_by(CHUNK)
        .map(|a| a..(a + CHUNK).min(cfg.n_traj))
        .collect();
    let work = || -> Vec<Result<Sums>> {
        chunks
            .par_iter()
            .map(|r| run_chunk(model, cfg, &steps, &obs, r.clone()))
            .collect()
    };
    let partial = match thread_limit() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Incompatible(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut total = Sums::new(steps.len(), obs.len(), model.dim());
    for p in partial {
        total.add(&p?);
    }

    let n = cfg.n_traj as f64;
    let mut out = TimeSeries::new(t_grid.to_vec())?;
    for (j, (name, _, _)) in obs.iter().enumerate() {
        let mean: Vec<f64> = total.s1.iter().map(|s| s[j] / n).collect();
        let se: Vec<f64> = total
            .s1
            .iter()
            .zip(&total.s2)
            .map(|(s1, s2)| {
                if cfg.n_traj < 2 {
                    return 0.0;
                }
                let m = s1[j] / n;
                let var = ((s2[j] - n * m * m) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect();
        out.insert(*name, mean)?;
        out.insert_error(*name, se)?;
    }
    let states: Vec<ComplexMatrix> = total.rho.iter().map(|r| r * (1.0 / n)).collect();
    let mut erg = Vec::with_capacity(states.len());
    let mut ent = Vec::with_capacity(states.len());
    for s in &states {
        let mut s = s.clone();
        s.hermitize();
        let b = battery_observables(model, &s)?;
        erg.push(b.ergotropy);
        ent.push(b.entropy);
    }
    out.insert(series::ERGOTROPY, erg)?;
    out.insert(series::ENTROPY, ent)?;
    out.states = Some(states);
    out.meta.insert("solver".into(), format!("stochastic-{}", cfg.scheme.name()));
    out.meta.insert("gamma_C".into(), model.params.gamma_c.to_string());
    out.meta.insert("dt".into(), cfg.dt.to_string());
    out.meta.insert("n_traj".into(), cfg.n_traj.to_string());
    out.meta.insert("seed".into(), cfg.seed.to_string());
    out.meta.insert("renormalization".into(), "per-step".into());
    Ok(out)
}

fn thread_limit() -> Option<usize> {
    std::env::var("QB_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}
