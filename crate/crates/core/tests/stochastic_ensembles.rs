use qbcharge::lindblad::integrate;
use qbcharge::models::{build_two_tls, Params};
use qbcharge::series::{linspace, ENERGY, SZ_B};
use qbcharge::stochastic::*;

#[test]
fn both_schemes_reproduce_lindblad() {
    let m = build_two_tls(Params::resonant(1.0, 0.5, 1.0)).unwrap();
    let t = linspace(0.0, 10.0, 11);
    let lind = integrate(&m, &m.ground_state(), &t).unwrap();
    let mut runs = Vec::new();
    for scheme in [Scheme::MeasurementNonlinear, Scheme::ClassicalNoiseLinear] {
        let cfg = TrajectoryConfig::covering(10.0, 1e-3, 2000, 11, scheme);
        let s = ensemble_run(&m, &cfg, &t).unwrap();
        let e = s.column(ENERGY).unwrap();
        let se = s.error(ENERGY).unwrap();
        let l = lind.column(ENERGY).unwrap();
        for k in 1..t.len() {
            assert!((e[k] - l[k]).abs() <= 3.0 * se[k], "{scheme:?} t={}", t[k]);
        }
        let sz = s.column(SZ_B).unwrap();
        let sz_se = s.error(SZ_B).unwrap();
        let lsz = lind.column(SZ_B).unwrap();
        assert!((sz[5] - lsz[5]).abs() <= 3.0 * sz_se[5]);
        runs.push(s);
    }
    let (a, b) = (&runs[0], &runs[1]);
    for k in 1..t.len() {
        let d = (a.column(ENERGY).unwrap()[k] - b.column(ENERGY).unwrap()[k]).abs();
        let s = a.error(ENERGY).unwrap()[k].hypot(b.error(ENERGY).unwrap()[k]);
        assert!(d <= 3.0 * s);
    }
}

#[test]
fn single_closed_trajectory_is_schrodinger() {
    let m = build_two_tls(Params::resonant(1.0, 0.5, 0.0)).unwrap();
    let t = vec![0.0, 1.0, 2.0];
    let cfg = TrajectoryConfig::covering(2.0, 1e-4, 1, 3, Scheme::MeasurementNonlinear);
    let s = ensemble_run(&m, &cfg, &t).unwrap();
    let lind = integrate(&m, &m.ground_state(), &t).unwrap();
    for k in 0..3 {
        assert!((s.column(ENERGY).unwrap()[k] - lind.column(ENERGY).unwrap()[k]).abs() < 1e-3);
    }
}

#[test]
fn same_seed_same_numbers() {
    let m = build_two_tls(Params::resonant(1.0, 0.5, 1.0)).unwrap();
    let t = vec![0.0, 0.5, 1.0];
    let cfg = TrajectoryConfig::covering(1.0, 1e-3, 100, 5, Scheme::ClassicalNoiseLinear);
    let a = ensemble_run(&m, &cfg, &t).unwrap();
    let b = ensemble_run(&m, &cfg, &t).unwrap();
    assert_eq!(a.columns, b.columns);
    assert_eq!(a.errors, b.errors);
}
