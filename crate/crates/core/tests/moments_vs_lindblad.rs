use qbcharge::analytic::{ho_energy_closed_resonant, tls_energy_closed, tls_sigma_minus_closed};
use qbcharge::lindblad::integrate;
use qbcharge::models::{build_two_ho, build_two_tls, Params};
use qbcharge::moments::{evolve_moments, evolve_moments_ode, ho_detuned_moment_system, ho_resonant_moment_system, tls_moment_systems};
use qbcharge::ode::OdeOptions;
use qbcharge::series::{linspace, IM_LOWER_B, RE_LOWER_B};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn tls_moments_match_lindblad_with_detunings() {
    let t = linspace(0.0, 20.0, 201);
    for &(dc, db) in &[(0.0, 0.0), (0.3, 0.0), (0.2, 0.2), (-0.4, 0.1)] {
        let p = Params::resonant(1.0, 0.5, 0.7).with_detunings(dc, db);
        let (s1, s2) = tls_moment_systems(&p).unwrap();
        let m = build_two_tls(p).unwrap();
        let lind = integrate(&m, &m.ground_state(), &t).unwrap();
        let v1 = evolve_moments(&s1, &t).unwrap();
        let v2 = evolve_moments(&s2, &t).unwrap();
        let d = max_diff(v1.energy().unwrap(), lind.energy().unwrap());
        assert!(d < 1e-8, "energy {dc} {db}: {d}");
        let d = max_diff(v2.column("re_smb").unwrap(), lind.column(RE_LOWER_B).unwrap());
        assert!(d < 1e-8, "re sigma- {dc} {db}: {d}");
        let d = max_diff(v2.column("im_smb").unwrap(), lind.column(IM_LOWER_B).unwrap());
        assert!(d < 1e-8, "im sigma- {dc} {db}: {d}");
    }
}

#[test]
fn tls_moments_match_closed_forms() {
    let t = linspace(0.0, 30.0, 301);
    for &(f, gm) in &[(0.1, 0.1), (0.5, 1.0), (2.0, 10.0)] {
        let p = Params::resonant(1.0, f, gm);
        let (s1, s2) = tls_moment_systems(&p).unwrap();
        let v1 = evolve_moments(&s1, &t).unwrap();
        let v2 = evolve_moments(&s2, &t).unwrap();
        let e: Vec<f64> = t.iter().map(|&x| tls_energy_closed(&p, x).unwrap()).collect();
        let sm: Vec<f64> = t.iter().map(|&x| tls_sigma_minus_closed(&p, x).unwrap().re).collect();
        assert!(max_diff(v1.energy().unwrap(), &e) < 1e-9);
        assert!(max_diff(v2.column("re_smb").unwrap(), &sm) < 1e-9);
    }
}

#[test]
fn expm_and_ode_routes_agree() {
    let t = linspace(0.0, 15.0, 76);
    let opts = OdeOptions {
        rtol: 1e-11,
        atol: 1e-13,
        ..OdeOptions::default()
    };
    let p = Params::resonant(1.0, 0.5, 1.15).with_detunings(0.2, 0.1);
    let (s1, _) = tls_moment_systems(&p).unwrap();
    let a = evolve_moments(&s1, &t).unwrap();
    let b = evolve_moments_ode(&s1, &t, &opts).unwrap();
    assert!(max_diff(a.energy().unwrap(), b.energy().unwrap()) < 1e-9);
    let s = ho_detuned_moment_system(&Params::resonant(1.0, 0.1, 0.1).with_detunings(0.5, 0.5)).unwrap();
    let a = evolve_moments(&s, &t).unwrap();
    let b = evolve_moments_ode(&s, &t, &opts).unwrap();
    assert!(max_diff(a.energy().unwrap(), b.energy().unwrap()) < 1e-9);
}

#[test]
fn oscillator_moments_match_lindblad() {
    let t = linspace(0.0, 12.0, 61);
    let p = Params::resonant(1.0, 0.3, 0.8);
    let m = build_two_ho(p, 14).unwrap();
    let lind = integrate(&m, &m.ground_state(), &t).unwrap();
    let res = evolve_moments(&ho_resonant_moment_system(&p).unwrap(), &t).unwrap();
    let det = evolve_moments(&ho_detuned_moment_system(&p).unwrap(), &t).unwrap();
    let closed: Vec<f64> = t.iter().map(|&x| ho_energy_closed_resonant(&p, x).unwrap()).collect();
    assert!(max_diff(res.energy().unwrap(), &closed) < 1e-8);
    assert!(max_diff(det.energy().unwrap(), &closed) < 1e-8);
    assert!(max_diff(lind.energy().unwrap(), &closed) < 1e-6);

    let p = Params::resonant(1.0, 0.3, 0.8).with_detunings(0.4, -0.2);
    let m = build_two_ho(p, 14).unwrap();
    let lind = integrate(&m, &m.ground_state(), &t).unwrap();
    let det = evolve_moments(&ho_detuned_moment_system(&p).unwrap(), &t).unwrap();
    assert!(max_diff(lind.energy().unwrap(), det.energy().unwrap()) < 1e-6);
}
