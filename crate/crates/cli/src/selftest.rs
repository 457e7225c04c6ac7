//! Quick consistency checks against independent routes.

use qbcharge::metrics::{energy, ergotropy};
use qbcharge::models::{ModelKind, Params};
use qbcharge::moments::tls_moment_systems;
use qbcharge::opalg::{expect, herm_eig, ComplexMatrix, C64};
use qbcharge::scenarios::{run_scenario, Scenario, ScenarioOutput, Solver};
use qbcharge::series::{ENERGY, ERGOTROPY};
use qbcharge::Result;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Determinants of the two-TLS moment matrices. On resonance the coherence
/// system is singular and the population system has
/// det = 4 F^4 g^2 gamma^2 (4 F^2 + g^2); a detuned drive gives the
/// coherence system det = -2 F^2 gamma delta^2.
fn determinants() -> Result<Check> {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (f, g, gm) in [(0.5, 1.0, 0.3), (0.1, 1.0, 1.15), (2.0, 0.7, 5.0)] {
        let (m1, m2) = tls_moment_systems(&Params::resonant(g, f, gm))?;
        let want = 4.0 * f.powi(4) * g * g * gm * gm * (4.0 * f * f + g * g);
        worst = worst.max((m1.det() / want - 1.0).abs()).max(m2.det().abs());
        let d = 0.4;
        let (_, m2d) = tls_moment_systems(&Params::resonant(g, f, gm).with_detunings(d, d))?;
        let want2 = -2.0 * f * f * gm * d * d;
        worst = worst.max((m2d.det() / want2 - 1.0).abs());
        parts.push(format!("F={f} g={g} gamma={gm}: det M1 = {:.6e}", m1.det()));
    }
    Ok(Check {
        name: "moment determinants",
        pass: worst <= 1e-8,
        detail: format!("worst relative deviation {worst:.1e}; {}", parts.join(", ")),
    })
}

fn energy_ergotropy(s: &Scenario) -> Result<(Vec<f64>, Vec<f64>)> {
    match run_scenario(s)? {
        ScenarioOutput::Series(t) => Ok((
            t.column(ENERGY).unwrap_or_default().to_vec(),
            t.column(ERGOTROPY).unwrap_or_default().to_vec(),
        )),
        ScenarioOutput::Sweep(_) => unreachable!("no sweep configured"),
    }
}

fn moments_vs_lindblad() -> Result<Check> {
    let mut worst = 0.0f64;
    for (kind, p) in [
        (ModelKind::TwoTls, Params::resonant(1.0, 0.5, 1.15)),
        (ModelKind::TwoTls, Params::resonant(1.0, 0.3, 0.4).with_detunings(0.2, -0.1)),
        (ModelKind::TwoHo, Params::resonant(1.0, 0.3, 2.0)),
    ] {
        let mut s = Scenario {
            kind,
            params: p,
            t_max: 15.0,
            n_t: 61,
            observables: vec![ENERGY.into(), ERGOTROPY.into()],
            ..Scenario::default()
        };
        if kind == ModelKind::TwoHo {
            s.observables = vec![ENERGY.into()];
        }
        let (e_l, w_l) = energy_ergotropy(&s)?;
        s.solver = Solver::Moments;
        let (e_m, w_m) = energy_ergotropy(&s)?;
        for (a, b) in [(e_l, e_m), (w_l, w_m)] {
            worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
        }
    }
    Ok(Check {
        name: "moments vs Lindblad",
        pass: worst <= 1e-6,
        detail: format!("max deviation {worst:.1e} over two-TLS and two-HO runs"),
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

/// Ergotropy as the best energy drop over unitaries that map the state's
/// eigenbasis onto the Hamiltonian's, one per permutation.
fn ergotropy_by_search(rho: &ComplexMatrix, h: &ComplexMatrix) -> Result<f64> {
    let r = herm_eig(rho)?;
    let e = herm_eig(h)?;
    let n = rho.dim();
    let mut best = f64::INFINITY;
    for p in permutations(n) {
        let u = ComplexMatrix::from_fn(n, |i, j| (0..n).map(|k| e.eigenvectors[(i, p[k])] * r.eigenvectors[(j, k)].conj()).sum());
        best = best.min(expect(h, &u.matmul(rho).matmul(&u.dagger()))?.re);
    }
    Ok(energy(rho, h)? - best)
}

fn test_matrix(seed: usize, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |i, j| {
        let x = (seed * 31 + i * 7 + j * 13) as f64;
        C64::new((1.3 * x).sin(), (0.7 * x + 0.4).cos())
    })
}

fn ergotropy_oracle() -> Result<Check> {
    let mut worst = 0.0f64;
    for k in 0..24 {
        let n = 2 + k % 3;
        let a = test_matrix(2 * k, n);
        let r = a.matmul(&a.dagger());
        let rho = &r * (1.0 / r.trace().re);
        let b = test_matrix(2 * k + 1, n);
        let h = &b + &b.dagger();
        worst = worst.max((ergotropy(&rho, &h)? - ergotropy_by_search(&rho, &h)?).abs());
    }
    Ok(Check {
        name: "ergotropy vs permutation search",
        pass: worst <= 1e-10,
        detail: format!("max deviation {worst:.1e} over 24 states"),
    })
}

pub fn run_selftest() -> Result<Vec<Check>> {
    Ok(vec![determinants()?, moments_vs_lindblad()?, ergotropy_oracle()?])
}
