use proptest::prelude::*;
use qbcharge::analytic::{tls_energy_form, tls_ergotropy_from_moments};
use qbcharge::lindblad::{integrate, integrate_with, IntegrateOptions};
use qbcharge::metrics::{
    charging_time, charging_time_closed, charging_time_fn, energy, entropy, ergotropy, tls_entropy_from_energy_ergotropy,
};
use qbcharge::models::{build_two_tls, Params};
use qbcharge::opalg::{expect, herm_eig, ops, ComplexMatrix, C64};
use qbcharge::series::{linspace, TimeSeries, ENERGY, ENTROPY, ERGOTROPY};
use qbcharge::Error;

fn density(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |v| {
        let a = ComplexMatrix::from_vec(dim, v.into_iter().map(|(x, y)| C64::new(x, y)).collect()).unwrap();
        let r = a.matmul(&a.dagger());
        let tr = r.trace().re;
        let mut r = &r * (1.0 / tr);
        r.hermitize();
        r
    })
}

fn hamiltonian(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), dim * dim).prop_map(move |v| {
        let a = ComplexMatrix::from_vec(dim, v.into_iter().map(|(x, y)| C64::new(x, y)).collect()).unwrap();
        let mut h = &a + &a.dagger();
        h.hermitize();
        h
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Unitaries mapping the eigenbasis of rho onto the eigenbasis of h; the
/// minimum of Tr[U rho U^dag h] over all unitaries is attained among them.
fn brute_force_ergotropy(rho: &ComplexMatrix, h: &ComplexMatrix) -> f64 {
    let r = herm_eig(rho).unwrap();
    let e = herm_eig(h).unwrap();
    let n = rho.dim();
    let e0 = expect(h, rho).unwrap().re;
    let mut best = f64::INFINITY;
    for p in permutations(n) {
        let u = ComplexMatrix::from_fn(n, |i, j| (0..n).map(|k| e.eigenvectors[(i, p[k])] * r.eigenvectors[(j, k)].conj()).sum());
        let moved = u.matmul(rho).matmul(&u.dagger());
        best = best.min(expect(h, &moved).unwrap().re);
    }
    e0 - best
}

/// State with the eigenvalues of rho placed in descending order on the
/// ascending eigenvectors of h.
fn passive_image(rho: &ComplexMatrix, h: &ComplexMatrix) -> ComplexMatrix {
    let mut pops = herm_eig(rho).unwrap().eigenvalues;
    pops.reverse();
    let e = herm_eig(h).unwrap();
    let n = rho.dim();
    ComplexMatrix::from_fn(n, |i, j| (0..n).map(|k| e.eigenvectors[(i, k)] * e.eigenvectors[(j, k)].conj() * pops[k]).sum())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ergotropy_matches_permutation_search(
        (rho, h) in (2usize..=4).prop_flat_map(|d| (density(d), hamiltonian(d)))
    ) {
        let w = ergotropy(&rho, &h).unwrap();
        let oracle = brute_force_ergotropy(&rho, &h);
        prop_assert!((w - oracle).abs() <= 1e-10, "{} vs {}", w, oracle);
        let e_ground = herm_eig(&h).unwrap().eigenvalues[0];
        prop_assert!(w >= -1e-12);
        prop_assert!(w <= energy(&rho, &h).unwrap() - e_ground + 1e-12);
    }

    #[test]
    fn passive_image_has_no_ergotropy(rho in density(4), h in hamiltonian(4)) {
        let p = passive_image(&rho, &h);
        prop_assert!(ergotropy(&p, &h).unwrap().abs() <= 1e-10);
        let s0 = entropy(&rho).unwrap();
        prop_assert!((entropy(&p).unwrap() - s0).abs() <= 1e-10);
        prop_assert!(s0 >= -1e-12 && s0 <= (4.0f64).ln() + 1e-12);
    }

    #[test]
    fn tls_ergotropy_closed_expression(rho in density(2)) {
        let h = &(&ops::sigma_z() + &ComplexMatrix::identity(2)) * 0.5;
        let sz = expect(&ops::sigma_z(), &rho).unwrap().re;
        let sm = expect(&ops::sigma_minus(), &rho).unwrap();
        let w = ergotropy(&rho, &h).unwrap();
        prop_assert!((w - tls_ergotropy_from_moments(sz, sm, 1.0)).abs() <= 1e-10);
        let e = energy(&rho, &h).unwrap();
        prop_assert!((e - 0.5 * (sz + 1.0)).abs() <= 1e-12);
        let s = entropy(&rho).unwrap();
        prop_assert!((s - tls_entropy_from_energy_ergotropy(e, w, 1.0)).abs() <= 1e-8);
    }
}

#[test]
fn elementary_values() {
    let h = &(&ops::sigma_z() + &ComplexMatrix::identity(2)) * 0.5;
    let excited = ComplexMatrix::outer(&ops::basis_ket(2, 0));
    let ground = ComplexMatrix::outer(&ops::basis_ket(2, 1));
    let mixed = &ComplexMatrix::identity(2) * 0.5;
    assert_eq!(energy(&ground, &h).unwrap(), 0.0);
    assert!((ergotropy(&excited, &h).unwrap() - 1.0).abs() < 1e-14);
    assert!(ergotropy(&mixed, &h).unwrap().abs() < 1e-14);
    assert!((energy(&mixed, &h).unwrap() - 0.5).abs() < 1e-14);
    assert!((entropy(&mixed).unwrap() - 2f64.ln()).abs() < 1e-14);
    assert!(entropy(&excited).unwrap().abs() < 1e-14);
    let fock2 = ComplexMatrix::outer(&ops::basis_ket(5, 2));
    assert!((energy(&fock2, &ops::number(5)).unwrap() - 2.0).abs() < 1e-14);
}

#[test]
fn entropy_ergotropy_identity_along_two_tls_runs() {
    let t = linspace(0.0, 40.0, 401);
    for &(f, gm) in &[(0.5, 1.15), (0.1, 0.3), (2.0, 10.0), (0.5, 0.0)] {
        for &(dc, db) in &[(0.0, 0.0), (0.3, 0.1)] {
            let m = build_two_tls(Params::resonant(1.0, f, gm).with_detunings(dc, db)).unwrap();
            let s = integrate(&m, &m.ground_state(), &t).unwrap();
            let (e, w, ent) = (s.column(ENERGY).unwrap(), s.column(ERGOTROPY).unwrap(), s.column(ENTROPY).unwrap());
            for k in 0..t.len() {
                let oracle = tls_entropy_from_energy_ergotropy(e[k], w[k], 1.0);
                assert!((ent[k] - oracle).abs() <= 1e-8, "F={f} gamma={gm} t={}: {} vs {oracle}", t[k], ent[k]);
            }
        }
    }
}

#[test]
fn exponential_charging_inverts_exactly() {
    let gm = 0.7;
    let e_ss = 0.5;
    let f = |t: f64| e_ss * (1.0 - (-gm * t / 4.0).exp());
    let grid = linspace(0.0, 200.0, 2001);
    let r = charging_time_fn(f, &grid, e_ss, 1).unwrap();
    assert!((r.tau - 4.0 / gm).abs() <= 1e-6 * 4.0 / gm);
    let mut s = TimeSeries::new(grid.clone()).unwrap();
    s.insert(ENERGY, grid.iter().map(|&t| f(t)).collect()).unwrap();
    let r = charging_time(&s, e_ss, 1).unwrap();
    assert!((r.tau - 4.0 / gm).abs() <= 1e-3);
    assert!(r.converged && r.tau <= r.horizon);
}

#[test]
fn undamped_run_does_not_converge() {
    let form = tls_energy_form(&Params::resonant(1.0, 0.5, 0.0)).unwrap();
    // end the record where the oscillation is outside the band
    let thr = (-1f64).exp() * 0.5;
    let t_end = (0..1000).map(|k| 90.0 + 0.01 * k as f64).find(|&t| form.deviation(t).abs() > thr).unwrap();
    let m = build_two_tls(Params::resonant(1.0, 0.5, 0.0)).unwrap();
    let t = linspace(0.0, t_end, 1001);
    let s = integrate(&m, &m.ground_state(), &t).unwrap();
    assert!(matches!(charging_time(&s, 0.5, 1), Err(Error::NotConverged { .. })));
    assert!(matches!(charging_time_closed(&form, 1), Err(Error::NotConverged { .. })));
}

#[test]
fn sampled_and_closed_charging_times_agree() {
    let p = Params::resonant(1.0, 0.5, 1.15);
    let closed = charging_time_closed(&tls_energy_form(&p).unwrap(), 1).unwrap();
    let m = build_two_tls(p).unwrap();
    let t = linspace(0.0, 60.0, 6001);
    let opts = IntegrateOptions {
        energy_only: true,
        ..IntegrateOptions::default()
    };
    let (s, _) = integrate_with(&m, &m.ground_state(), &t, &opts).unwrap();
    let sampled = charging_time(&s, 0.5, 1).unwrap();
    assert!((sampled.tau - closed.tau).abs() < 1e-3, "{} vs {}", sampled.tau, closed.tau);
    // window guarantee: no later crossing on the exact curve
    let form = tls_energy_form(&p).unwrap();
    let thr = (-1f64).exp() * 0.5;
    for k in 1..=4000 {
        let t = closed.tau + k as f64 * (closed.horizon - closed.tau) / 4000.0;
        assert!(form.deviation(t).abs() < thr);
    }
}

#[test]
fn zeno_freezing_slows_charging() {
    let tau = |gm: f64| charging_time_closed(&tls_energy_form(&Params::resonant(1.0, 0.5, gm)).unwrap(), 18).unwrap().tau;
    let best = tau(1.15);
    assert!(tau(100.0) > best);
    assert!(tau(0.01) > best);
}
