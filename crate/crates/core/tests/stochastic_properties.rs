use qbcharge::expm::expm_complex;
use qbcharge::lindblad::integrate;
use qbcharge::models::{build_two_tls, ModelSpec, Params};
use qbcharge::opalg::{expect, herm_eig, ComplexMatrix, C64};
use qbcharge::series::ENERGY;
use qbcharge::stochastic::*;

fn ground_ket(m: &ModelSpec) -> Vec<C64> {
    let rho = m.ground_state();
    (0..m.dim()).map(|i| rho[(i, i)].sqrt()).collect()
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn matvec(a: &ComplexMatrix, v: &[C64]) -> Vec<C64> {
    (0..a.dim()).map(|i| (0..v.len()).map(|j| a[(i, j)] * v[j]).sum()).collect()
}

fn max_dev(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn wiener_increment_statistics() {
    let dt = 1e-3;
    let n = 1_000_000;
    let mut rng = trajectory_rng(2024, 0);
    let draws: Vec<f64> = (0..n).map(|_| wiener_increment(&mut rng, dt)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() <= 4.0 * (dt / n as f64).sqrt(), "{mean}");
    assert!((var / dt - 1.0).abs() < 0.01, "{var}");
}

#[test]
fn substreams_are_distinct_and_reproducible() {
    let a: Vec<f64> = {
        let mut r = trajectory_rng(7, 3);
        (0..5).map(|_| wiener_increment(&mut r, 1.0)).collect()
    };
    let b: Vec<f64> = {
        let mut r = trajectory_rng(7, 3);
        (0..5).map(|_| wiener_increment(&mut r, 1.0)).collect()
    };
    let c: Vec<f64> = {
        let mut r = trajectory_rng(7, 4);
        (0..5).map(|_| wiener_increment(&mut r, 1.0)).collect()
    };
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn closed_steps_are_euler_schrodinger_steps() {
    let m = build_two_tls(Params::resonant(1.0, 0.5, 0.0)).unwrap();
    let psi = ground_ket(&m);
    let dt = 1e-3;
    let hpsi = matvec(&m.hamiltonian, &psi);
    let mut want: Vec<C64> = psi.iter().zip(&hpsi).map(|(p, h)| p - C64::new(0.0, dt) * h).collect();
    let n = norm2(&want).sqrt();
    want.iter_mut().for_each(|z| *z /= n);
    for dw in [0.0, 0.03, -0.1] {
        assert!(max_dev(&sse_step_measurement(&psi, &m, dt, dw).unwrap(), &want) < 1e-15);
        assert!(max_dev(&sse_step_noise(&psi, &m, dt, dw).unwrap(), &want) < 1e-15);
    }
}

#[test]
fn jump_eigenstates_are_measurement_fixed_points() {
    // no drive or coupling: H vanishes, the charger-excited state is an eigenstate of L
    let m = build_two_tls(Params::resonant(0.0, 0.0, 1.0)).unwrap();
    let mut psi = vec![C64::new(0.0, 0.0); 4];
    psi[1] = C64::new(1.0, 0.0);
    for dw in [0.0, 0.05, -0.2] {
        assert!(max_dev(&sse_step_measurement(&psi, &m, 1e-3, dw).unwrap(), &psi) < 1e-15);
    }
}

#[test]
fn unnormalized_noise_scheme_is_a_martingale_in_norm() {
    let m = build_two_tls(Params::resonant(1.0, 0.5, 2.0)).unwrap();
    let mut psi = ground_ket(&m);
    let dt = 1e-2;
    // the squared norm is quadratic in dW, so +-sqrt(dt) averages it exactly
    let mut rng = trajectory_rng(3, 0);
    for _ in 0..50 {
        let up = norm2(&sse_step_noise_unnormalized(&psi, &m, dt, dt.sqrt()).unwrap());
        let down = norm2(&sse_step_noise_unnormalized(&psi, &m, dt, -dt.sqrt()).unwrap());
        assert!((0.5 * (up + down) - norm2(&psi)).abs() < 0.5 * dt * dt * norm2(&psi));
        psi = sse_step_noise_unnormalized(&psi, &m, dt, wiener_increment(&mut rng, dt)).unwrap();
    }
    // sampled mean over an ensemble of unnormalized trajectories
    let n_traj = 20000;
    let dt = 2e-3;
    let steps = 500;
    let norms: Vec<f64> = (0..n_traj)
        .map(|k| {
            let mut r = trajectory_rng(11, k);
            let mut v = ground_ket(&m);
            for _ in 0..steps {
                v = sse_step_noise_unnormalized(&v, &m, dt, wiener_increment(&mut r, dt)).unwrap();
            }
            norm2(&v)
        })
        .collect();
    let mean = norms.iter().sum::<f64>() / n_traj as f64;
    let sd = (norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_traj - 1) as f64).sqrt();
    let se = sd / (n_traj as f64).sqrt();
    let bias_bound = dt * steps as f64 * dt * 4.0;
    assert!((mean - 1.0).abs() <= 4.0 * se + bias_bound, "{mean} +- {se}");
}

#[test]
fn frozen_noise_is_a_noisy_hamiltonian() {
    // tiny gamma with a large constant xi: sqrt(gamma) xi L acts as a static field
    let gm = 1e-6;
    let xi = 1000.0;
    let m = build_two_tls(Params::resonant(1.0, 0.5, gm)).unwrap();
    let t_end = 2.0;
    let psi0 = ground_ket(&m);
    let h = &m.hamiltonian + &(&m.jump * (gm.sqrt() * xi));
    let u = expm_complex(&(&h * C64::new(0.0, -t_end))).unwrap();
    let want = matvec(&u, &psi0);
    let err = |dt: f64| {
        let mut v = psi0.clone();
        for _ in 0..(t_end / dt).round() as usize {
            v = sse_step_noise(&v, &m, dt, xi * dt).unwrap();
        }
        max_dev(&v, &want)
    };
    let (e1, e2) = (err(2e-3), err(1e-3));
    assert!(e1 < 2e-2 && e2 < 1e-2, "{e1} {e2}");
    assert!((e1 / e2 - 2.0).abs() < 0.3, "order {}", e1 / e2);
}

/// Mean state of the unnormalized linear scheme: psi' = A psi + B psi dW
/// gives E[psi' psi'^dag] = A rho A^dag + dt B rho B^dag, with A and B read
/// off the stepper itself.
fn mean_state_after(m: &ModelSpec, dt: f64, steps: usize) -> ComplexMatrix {
    let d = m.dim();
    let basis = |j: usize| (0..d).map(|i| C64::new((i == j) as u8 as f64, 0.0)).collect::<Vec<_>>();
    let cols_a: Vec<Vec<C64>> = (0..d).map(|j| sse_step_noise_unnormalized(&basis(j), m, dt, 0.0).unwrap()).collect();
    let cols_b: Vec<Vec<C64>> = (0..d)
        .map(|j| {
            let w = sse_step_noise_unnormalized(&basis(j), m, dt, 1.0).unwrap();
            w.iter().zip(&cols_a[j]).map(|(x, y)| x - y).collect()
        })
        .collect();
    let a = ComplexMatrix::from_fn(d, |i, j| cols_a[j][i]);
    let b = ComplexMatrix::from_fn(d, |i, j| cols_b[j][i]);
    let mut rho = m.ground_state();
    for _ in 0..steps {
        rho = &a.matmul(&rho).matmul(&a.dagger()) + &(&b.matmul(&rho).matmul(&b.dagger()) * dt);
    }
    rho
}

#[test]
fn mean_dynamics_converge_at_first_order() {
    let m = build_two_tls(Params::resonant(1.0, 0.5, 1.0)).unwrap();
    let t_end = 5.0;
    let lind = integrate(&m, &m.ground_state(), &[0.0, t_end]).unwrap().column(ENERGY).unwrap()[1];
    let hb = m.battery_h_full();
    let err = |dt: f64| {
        let rho = mean_state_after(&m, dt, (t_end / dt).round() as usize);
        (expect(&hb, &rho).unwrap().re - lind).abs()
    };
    let (e1, e2, e3) = (err(0.02), err(0.01), err(0.005));
    assert!(e3 < 1e-2, "{e3}");
    for r in [e1 / e2, e2 / e3] {
        assert!((r - 2.0).abs() < 0.3, "order {r}: {e1} {e2} {e3}");
    }
}

#[test]
fn dephasing_suppresses_ensemble_charging() {
    let t = vec![0.0, 1.0, 2.0];
    let e_at = |gm: f64| {
        let m = build_two_tls(Params::resonant(1.0, 0.5, gm)).unwrap();
        let cfg = TrajectoryConfig::covering(2.0, 2e-3, 1000, 5, Scheme::MeasurementNonlinear);
        let s = ensemble_run(&m, &cfg, &t).unwrap();
        (s.column(ENERGY).unwrap()[2], s.error(ENERGY).unwrap()[2])
    };
    let (slow, s1) = e_at(10.0);
    let (fast, s2) = e_at(1.0);
    assert!(fast - slow > 3.0 * s1.hypot(s2), "{fast} vs {slow}");
}

#[test]
fn unstable_steps_are_rejected() {
    let m = build_two_tls(Params::resonant(1.0, 0.5, 1.0)).unwrap();
    let cfg = TrajectoryConfig::covering(1.0, 0.1, 10, 1, Scheme::MeasurementNonlinear);
    assert!(cfg.validate(&m).is_err());
    let ok = TrajectoryConfig::covering(1.0, 1e-3, 10, 1, Scheme::MeasurementNonlinear);
    assert!(ok.validate(&m).is_ok());
    let ev = herm_eig(&m.hamiltonian).unwrap();
    assert!(ev.eigenvalues.iter().all(|x| x.abs() * 1e-3 <= STABILITY_LIMIT));
}
