use proptest::prelude::*;
use qbcharge::expm::expm_complex;
use qbcharge::opalg::{expect, herm_eig, kron, ops, partial_trace, ComplexMatrix, C64};

fn cmat(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |v| {
        ComplexMatrix::from_vec(dim, v.into_iter().map(|(a, b)| C64::new(a, b)).collect()).unwrap()
    })
}

fn int_mat(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-3i32..4, -3i32..4), dim * dim).prop_map(move |v| {
        ComplexMatrix::from_vec(dim, v.into_iter().map(|(a, b)| C64::new(a as f64, b as f64)).collect()).unwrap()
    })
}

fn hermitian(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    cmat(dim).prop_map(|a| {
        let mut h = &a + &a.dagger();
        h.hermitize();
        h
    })
}

fn density(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    cmat(dim).prop_map(|a| {
        let r = a.matmul(&a.dagger());
        let tr = r.trace().re;
        let mut r = &r * (1.0 / tr);
        r.hermitize();
        r
    })
}

/// Reduced state by explicit double-index summation.
fn ptrace_oracle(rho: &ComplexMatrix, da: usize, db: usize, keep: usize) -> ComplexMatrix {
    if keep == 1 {
        ComplexMatrix::from_fn(db, |k, l| (0..da).map(|i| rho[(i * db + k, i * db + l)]).sum())
    } else {
        ComplexMatrix::from_fn(da, |i, j| (0..db).map(|k| rho[(i * db + k, j * db + k)]).sum())
    }
}

fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_is_associative(a in int_mat(2), b in int_mat(3), c in int_mat(2)) {
        let l = kron(&kron(&a, &b), &c);
        let r = kron(&a, &kron(&b, &c));
        prop_assert_eq!(l.as_slice(), r.as_slice());
    }

    #[test]
    fn kron_index_formula(a in cmat(2), b in cmat(3)) {
        let k = kron(&a, &b);
        for i in 0..2 { for j in 0..2 { for p in 0..3 { for q in 0..3 {
            prop_assert_eq!(k[(i * 3 + p, j * 3 + q)], a[(i, j)] * b[(p, q)]);
        }}}}
    }

    #[test]
    fn partial_trace_matches_index_sums(rho in density(6)) {
        for (dims, keep) in [([2usize, 3usize], 0usize), ([2, 3], 1), ([3, 2], 0), ([3, 2], 1)] {
            let r = partial_trace(&rho, &dims, keep).unwrap();
            let o = ptrace_oracle(&rho, dims[0], dims[1], keep);
            prop_assert!(max_diff(&r, &o) <= 1e-14);
            prop_assert!((r.trace() - rho.trace()).norm() <= 1e-12);
            prop_assert!(r.hermiticity_error() <= 1e-14);
        }
    }

    #[test]
    fn local_expectation_through_reduced_state(rho in density(4), op in hermitian(2)) {
        let full = kron(&ComplexMatrix::identity(2), &op);
        let rb = partial_trace(&rho, &[2, 2], 1).unwrap();
        let a = expect(&full, &rho).unwrap();
        let b = expect(&op, &rb).unwrap();
        prop_assert!((a - b).norm() <= 1e-13);
        prop_assert!(a.im.abs() <= 1e-10);
    }

    #[test]
    fn herm_eig_reconstructs(h in hermitian(5)) {
        let d = herm_eig(&h).unwrap();
        prop_assert!(max_diff(&d.reconstruct(), &h) <= 1e-10);
        let v = &d.eigenvectors;
        prop_assert!(max_diff(&v.dagger().matmul(v), &ComplexMatrix::identity(5)) <= 1e-10);
        prop_assert!(d.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn expm_of_hermitian_matches_spectral_exponential(h in hermitian(4)) {
        let d = herm_eig(&h).unwrap();
        let e = expm_complex(&h).unwrap();
        let scale = d.eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.exp()));
        prop_assert!(max_diff(&e, &d.map_eigenvalues(f64::exp)) <= 1e-12 * scale);
        let u = expm_complex(&(&h * C64::new(0.0, 1.0))).unwrap();
        prop_assert!(max_diff(&u.dagger().matmul(&u), &ComplexMatrix::identity(4)) <= 1e-12);
    }
}

#[test]
fn kron_of_ladder_operators() {
    let k = kron(&ops::sigma_plus(), &ops::sigma_minus());
    let nz = k.triplets(0.0);
    assert_eq!(nz.len(), 1);
    assert_eq!((nz[0].0, nz[0].1), (1, 2));
    assert_eq!(nz[0].2, C64::new(1.0, 0.0));
}

#[test]
fn coherent_state_mean_photon_number() {
    let psi = ops::coherent_ket(C64::new(0.5, 0.0), 30);
    let n = expect(&ops::number(30), &ComplexMatrix::outer(&psi)).unwrap();
    assert!((n.re - 0.25).abs() < 1e-8);
}

#[test]
fn bell_state_reduces_to_maximally_mixed() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = vec![C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)];
    let rho = ComplexMatrix::outer(&psi);
    for keep in 0..2 {
        let r = partial_trace(&rho, &[2, 2], keep).unwrap();
        assert!(max_diff(&r, &(&ComplexMatrix::identity(2) * 0.5)) < 1e-15);
    }
}
