//! Dense complex operator algebra for small composite Hilbert spaces.
//!
//! Basis conventions used throughout the crate: the charger factor comes
//! first in every tensor product, and within a two-level system index 0 is
//! the excited state, so `sigma_plus()[(0, 1)] == 1`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance for hermiticity flags on freshly built operators.
pub const HERMITIAN_BUILD_TOL: f64 = 1e-12;
/// Tolerance for hermiticity checks on evolved states.
pub const HERMITIAN_RUNTIME_TOL: f64 = 1e-10;

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries; the length must be a square.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Real matrix from nested rows, handy for small literal operators.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| {
            assert_eq!(rows[i].len(), dim, "rows must form a square matrix");
            C64::new(rows[i][j], 0.0)
        })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = C64::new(d, 0.0);
        }
        m
    }

    /// Projector |psi><psi|.
    pub fn outer(psi: &[C64]) -> Self {
        Self::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn dagger(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).collect()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, &b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Self { dim: n, data: out }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        &self.matmul(other) + &other.matmul(self)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "apply dimension mismatch");
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(&a, &x)| a * x)
                    .sum()
            })
            .collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max |A - A^dag| over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self.data[i * n + j].norm() <= tol))
    }

    /// Replaces the matrix by (A + A^dag)/2 and returns the largest change.
    pub fn hermitize(&mut self) -> f64 {
        let n = self.dim;
        let mut drift = 0.0f64;
        for i in 0..n {
            let d = &mut self.data[i * n + i];
            drift = drift.max(d.im.abs());
            d.im = 0.0;
            for j in (i + 1)..n {
                let a = self.data[i * n + j];
                let b = self.data[j * n + i];
                let avg = (a + b.conj()) * 0.5;
                drift = drift.max((a - avg).norm());
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
        drift
    }

    /// Nonzero entries as (row, col, value) triplets.
    pub fn triplets(&self, tol: f64) -> Vec<(usize, usize, C64)> {
        let n = self.dim;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.data[i * n + j];
                if v.norm() > tol {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn from_dmatrix(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.dim && j < self.dim, "index out of range");
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.dim && j < self.dim, "index out of range");
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: f64) -> ComplexMatrix {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl Mul<C64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: C64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(-ONE)
    }
}

/// Kronecker product: `out[i*db + k, j*db + l] = a[i,j] * b[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (da, db) = (a.dim, b.dim);
    let n = da * db;
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..da {
        for j in 0..da {
            let aij = a.data[i * da + j];
            if aij == ZERO {
                continue;
            }
            for k in 0..db {
                for l in 0..db {
                    out.data[(i * db + k) * n + j * db + l] = aij * b.data[k * db + l];
                }
            }
        }
    }
    out
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[ComplexMatrix]) -> ComplexMatrix {
    let mut it = factors.iter();
    let first = it.next().expect("kron_all needs at least one factor").clone();
    it.fold(first, |acc, f| kron(&acc, f))
}

/// Places `op` on subsystem `site` of a product space, identities elsewhere.
pub fn embed(op: &ComplexMatrix, dims: &[usize], site: usize) -> Result<ComplexMatrix> {
    if site >= dims.len() {
        return Err(Error::DimMismatch {
            expected: dims.len(),
            found: site,
        });
    }
    if dims[site] != op.dim {
        return Err(Error::DimMismatch {
            expected: dims[site],
            found: op.dim,
        });
    }
    let factors: Vec<ComplexMatrix> = dims
        .iter()
        .enumerate()
        .map(|(k, &d)| if k == site { op.clone() } else { ComplexMatrix::identity(d) })
        .collect();
    Ok(kron_all(&factors))
}

/// Eigen-decomposition of a hermitian matrix.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column k is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomp {
    /// V diag(lambda) V^dag.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_eigenvalues(|x| x)
    }

    /// V diag(f(lambda)) V^dag.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        ComplexMatrix::from_fn(n, |i, j| {
            (0..n).map(|k| v[(i, k)] * v[(j, k)].conj() * fl[k]).sum()
        })
    }

    /// Column k as a vector.
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        let n = self.eigenvalues.len();
        (0..n).map(|i| self.eigenvectors[(i, k)]).collect()
    }
}

/// Spectral decomposition of a hermitian matrix (eigenvalues ascending).
pub fn herm_eig(a: &ComplexMatrix) -> Result<SpectralDecomp> {
    let dev = a.hermiticity_error();
    if dev > HERMITIAN_RUNTIME_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let mut sym = a.clone();
    sym.hermitize();
    let n = a.dim;
    let eig = nalgebra::SymmetricEigen::new(sym.to_dmatrix());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(SpectralDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, ascending.
pub fn herm_eigvals(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let dev = a.hermiticity_error();
    if dev > HERMITIAN_RUNTIME_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let mut sym = a.clone();
    sym.hermitize();
    let mut vals: Vec<f64> = sym.to_dmatrix().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Tr[rho op].
pub fn expect(op: &ComplexMatrix, rho: &ComplexMatrix) -> Result<C64> {
    if op.dim != rho.dim {
        return Err(Error::DimMismatch {
            expected: rho.dim,
            found: op.dim,
        });
    }
    let n = op.dim;
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += rho.data[i * n + k] * op.data[k * n + i];
        }
    }
    Ok(acc)
}

/// <psi|op|psi>.
pub fn expect_ket(op: &ComplexMatrix, psi: &[C64]) -> C64 {
    let opsi = op.apply(psi);
    psi.iter().zip(&opsi).map(|(a, b)| a.conj() * b).sum()
}

/// Reduced state on subsystem `keep` of a product space with factor dims `dims`.
pub fn partial_trace(rho: &ComplexMatrix, dims: &[usize], keep: usize) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if total != rho.dim {
        return Err(Error::DimMismatch {
            expected: total,
            found: rho.dim,
        });
    }
    if keep >= dims.len() {
        return Err(Error::DimMismatch {
            expected: dims.len(),
            found: keep,
        });
    }
    let left: usize = dims[..keep].iter().product();
    let k = dims[keep];
    let right: usize = dims[keep + 1..].iter().product();
    let n = rho.dim;
    let mut out = ComplexMatrix::zeros(k);
    for a in 0..k {
        for b in 0..k {
            let mut acc = ZERO;
            for l in 0..left {
                for r in 0..right {
                    let i = (l * k + a) * right + r;
                    let j = (l * k + b) * right + r;
                    acc += rho.data[i * n + j];
                }
            }
            out.data[a * k + b] = acc;
        }
    }
    Ok(out)
}

/// Standard operators in the crate's basis conventions.
pub mod ops {
    use super::*;

    /// sigma^+ = |e><g| with |e> = index 0.
    pub fn sigma_plus() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]])
    }

    pub fn sigma_minus() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]])
    }

    pub fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_diag(&[1.0, -1.0])
    }

    pub fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn sigma_y() -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2);
        m[(0, 1)] = -I;
        m[(1, 0)] = I;
        m
    }

    /// sigma^+ sigma^- = |e><e|.
    pub fn excited_projector() -> ComplexMatrix {
        ComplexMatrix::from_diag(&[1.0, 0.0])
    }

    /// Truncated annihilation operator on Fock levels 0..cutoff.
    pub fn annihilation(cutoff: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(cutoff);
        for n in 1..cutoff {
            m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        m
    }

    pub fn creation(cutoff: usize) -> ComplexMatrix {
        annihilation(cutoff).dagger()
    }

    pub fn number(cutoff: usize) -> ComplexMatrix {
        ComplexMatrix::from_diag(&(0..cutoff).map(|n| n as f64).collect::<Vec<_>>())
    }

    /// Basis vector e_k.
    pub fn basis_ket(dim: usize, k: usize) -> Vec<C64> {
        let mut v = vec![ZERO; dim];
        v[k] = ONE;
        v
    }

    /// Truncated coherent state; coefficients e^{-|a|^2/2} a^n / sqrt(n!).
    /// Not renormalized, so the truncation loss stays visible.
    pub fn coherent_ket(alpha: C64, cutoff: usize) -> Vec<C64> {
        let mut v = Vec::with_capacity(cutoff);
        let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..cutoff {
            if n > 0 {
                c = c * alpha / (n as f64).sqrt();
            }
            v.push(c);
        }
        v
    }
}
