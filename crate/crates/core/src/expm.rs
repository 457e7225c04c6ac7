//! Matrix exponential by scaling and squaring with a degree-13 Padé approximant.

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};
use crate::opalg::ComplexMatrix;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled degree-13 approximant is accurate
/// to double precision.
const THETA13: f64 = 5.371920351148152;

fn one_norm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(A) for a real or complex square matrix.
pub fn expm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::InvalidParameter {
            name: "matrix",
            reason: "non-finite entries".into(),
        });
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.map(|x| x * T::from_real(2f64.powi(-s)));

    let b = |k: usize| T::from_real(PADE13[k]);
    let id = DMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let inner_u = &a6 * (a6.map(|x| x * b(13)) + a4.map(|x| x * b(11)) + a2.map(|x| x * b(9)));
    let u = &a
        * (inner_u
            + a6.map(|x| x * b(7))
            + a4.map(|x| x * b(5))
            + a2.map(|x| x * b(3))
            + id.map(|x| x * b(1)));
    let inner_v = &a6 * (a6.map(|x| x * b(12)) + a4.map(|x| x * b(10)) + a2.map(|x| x * b(8)));
    let v = inner_v
        + a6.map(|x| x * b(6))
        + a4.map(|x| x * b(4))
        + a2.map(|x| x * b(2))
        + id.map(|x| x * b(0));

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).ok_or(Error::SingularMatrix)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// exp(A) for a [`ComplexMatrix`].
pub fn expm_complex(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(ComplexMatrix::from_dmatrix(&expm(&a.to_dmatrix())?))
}
