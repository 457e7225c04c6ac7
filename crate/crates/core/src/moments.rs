//! Closed linear equations of motion for low-order moments,
//! dV/dt = M V + W, with complex moments split into real and imaginary parts.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::expm::expm;
use crate::models::Params;
use crate::ode::{dopri5, OdeOptions};
use crate::series::{self, TimeSeries};

/// Linear moment system with an optional affine read-out for the battery energy.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSystem {
    pub matrix: DMatrix<f64>,
    pub inhomogeneity: DVector<f64>,
    pub v0: DVector<f64>,
    pub labels: Vec<String>,
    /// Battery energy as `offset + weights . V`, when the system determines it.
    pub energy_readout: Option<(f64, DVector<f64>)>,
}

impl MomentSystem {
    pub fn new(matrix: DMatrix<f64>, inhomogeneity: DVector<f64>, v0: DVector<f64>, labels: Vec<String>) -> Result<Self> {
        let n = v0.len();
        if matrix.nrows() != n || matrix.ncols() != n || inhomogeneity.len() != n || labels.len() != n {
            return Err(Error::DimMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        Ok(Self {
            matrix,
            inhomogeneity,
            v0,
            labels,
            energy_readout: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.v0.len()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.inhomogeneity.iter().all(|&w| w == 0.0)
    }

    pub fn det(&self) -> f64 {
        self.matrix.clone().determinant()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn energy_of(&self, v: &DVector<f64>) -> Option<f64> {
        self.energy_readout.as_ref().map(|(c, w)| c + w.dot(v))
    }
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub const V1_LABELS: [&str; 10] = [
    "sz_b", "sz_c", "re_spc_smb", "im_spc_smb", "re_szc_smb", "im_szc_smb", "re_smc_smb", "im_smc_smb", "re_smc",
    "im_smc",
];
pub const V2_LABELS: [&str; 5] = ["re_smb", "im_smb", "re_smc_szb", "im_smc_szb", "szc_szb"];

/// The two decoupled two-TLS systems (V1 of size 10, V2 of size 5).
///
/// V1 = (<sz_B>, <sz_C>, <s+_C s-_B>, <sz_C s-_B>, <s-_C s-_B>, <s-_C>) and
/// V2 = (<s-_B>, <s-_C sz_B>, <sz_C sz_B>), complex entries split.
pub fn tls_moment_systems(p: &Params) -> Result<(MomentSystem, MomentSystem)> {
    p.validate()?;
    let (g, f, gm) = (p.g, p.f, p.gamma_c);
    let (dc, db) = (p.delta_cd, p.delta_bd);
    let dm = dc - db;
    let dp = dc + db;
    let h = gm / 2.0;

    let mut m1 = DMatrix::<f64>::zeros(10, 10);
    let set = |m: &mut DMatrix<f64>, i: usize, j: usize, v: f64| m[(i, j)] += v;
    set(&mut m1, 0, 3, -4.0 * g);
    set(&mut m1, 1, 9, -4.0 * f);
    set(&mut m1, 1, 3, 4.0 * g);
    set(&mut m1, 2, 5, f);
    set(&mut m1, 2, 2, -h);
    set(&mut m1, 2, 3, -dm);
    set(&mut m1, 3, 4, -f);
    set(&mut m1, 3, 1, -g / 2.0);
    set(&mut m1, 3, 0, g / 2.0);
    set(&mut m1, 3, 3, -h);
    set(&mut m1, 3, 2, dm);
    set(&mut m1, 4, 3, 2.0 * f);
    set(&mut m1, 4, 7, -2.0 * f);
    set(&mut m1, 4, 9, -g);
    set(&mut m1, 4, 5, db);
    set(&mut m1, 5, 2, -2.0 * f);
    set(&mut m1, 5, 6, 2.0 * f);
    set(&mut m1, 5, 8, g);
    set(&mut m1, 5, 4, -db);
    set(&mut m1, 6, 5, -f);
    set(&mut m1, 6, 6, -h);
    set(&mut m1, 6, 7, dp);
    set(&mut m1, 7, 4, f);
    set(&mut m1, 7, 7, -h);
    set(&mut m1, 7, 6, -dp);
    set(&mut m1, 8, 5, -g);
    set(&mut m1, 8, 8, -h);
    set(&mut m1, 8, 9, dc);
    set(&mut m1, 9, 1, f);
    set(&mut m1, 9, 4, g);
    set(&mut m1, 9, 9, -h);
    set(&mut m1, 9, 8, -dc);
    let mut v1 = DVector::<f64>::zeros(10);
    v1[0] = -1.0;
    v1[1] = -1.0;
    let mut s1 = MomentSystem::new(m1, DVector::zeros(10), v1, labels(&V1_LABELS))?;
    let mut w = DVector::<f64>::zeros(10);
    w[0] = 0.5 * p.omega_b;
    s1.energy_readout = Some((0.5 * p.omega_b, w));

    let mut m2 = DMatrix::<f64>::zeros(5, 5);
    set(&mut m2, 0, 3, -g);
    set(&mut m2, 0, 1, db);
    set(&mut m2, 1, 2, g);
    set(&mut m2, 1, 0, -db);
    set(&mut m2, 2, 2, -h);
    set(&mut m2, 2, 3, dc);
    set(&mut m2, 2, 1, -g);
    set(&mut m2, 3, 4, f);
    set(&mut m2, 3, 3, -h);
    set(&mut m2, 3, 2, -dc);
    set(&mut m2, 3, 0, g);
    set(&mut m2, 4, 3, -4.0 * f);
    let mut v2 = DVector::<f64>::zeros(5);
    v2[4] = 1.0;
    let s2 = MomentSystem::new(m2, DVector::zeros(5), v2, labels(&V2_LABELS))?;
    Ok((s1, s2))
}

pub const HO_RESONANT_LABELS: [&str; 8] = [
    "re_ac", "im_ac", "re_ab", "im_ab", "n_c", "re_adc_ab", "im_adc_ab", "n_b",
];

/// Resonant two-HO moments in the frame displaced by the steady drive
/// response, where the drive term cancels and the system is homogeneous.
/// Components are <a_C>, <b>, <a_C^dag a_C>, <a_C^dag b>, <b^dag b> with b
/// the displaced battery mode; b(0) = F/g.
pub fn ho_resonant_moment_system(p: &Params) -> Result<MomentSystem> {
    p.validate()?;
    if !p.is_resonant() {
        return Err(Error::RequiresResonance {
            what: "displaced-frame oscillator moments",
        });
    }
    if !(p.g > 0.0) {
        return Err(invalid("g", "the displaced frame needs g > 0"));
    }
    let (g, h) = (p.g, p.gamma_c / 2.0);
    let alpha = p.f / g;
    let mut m = DMatrix::<f64>::zeros(8, 8);
    // a_C' = -i g b - gamma/2 a_C
    m[(0, 3)] = g;
    m[(0, 0)] = -h;
    m[(1, 2)] = -g;
    m[(1, 1)] = -h;
    // b' = -i g a_C
    m[(2, 1)] = g;
    m[(3, 0)] = -g;
    // n_C' = 2 g Im x, n_B' = -2 g Im x
    m[(4, 6)] = 2.0 * g;
    m[(7, 6)] = -2.0 * g;
    // x' = -i g (n_C - n_B) - gamma/2 x
    m[(5, 5)] = -h;
    m[(6, 4)] = -g;
    m[(6, 7)] = g;
    m[(6, 6)] = -h;
    let mut v0 = DVector::<f64>::zeros(8);
    v0[2] = alpha;
    v0[7] = alpha * alpha;
    let mut s = MomentSystem::new(m, DVector::zeros(8), v0, labels(&HO_RESONANT_LABELS))?;
    let w = p.omega_b;
    let mut weights = DVector::<f64>::zeros(8);
    weights[7] = w;
    weights[2] = -2.0 * alpha * w;
    s.energy_readout = Some((alpha * alpha * w, weights));
    Ok(s)
}

pub const HO_DETUNED_LABELS: [&str; 8] = [
    "n_b", "n_c", "im_adc_ab", "re_adc_ab", "re_ab", "im_ab", "re_ac", "im_ac",
];

/// Two-HO moments with arbitrary detunings; inhomogeneous with W = (0, ..., 0, -F).
pub fn ho_detuned_moment_system(p: &Params) -> Result<MomentSystem> {
    p.validate()?;
    let (g, f, h) = (p.g, p.f, p.gamma_c / 2.0);
    let (dc, db) = (p.delta_cd, p.delta_bd);
    let dm = dc - db;
    let mut m = DMatrix::<f64>::zeros(8, 8);
    m[(0, 2)] = -2.0 * g;
    m[(1, 7)] = -2.0 * f;
    m[(1, 2)] = 2.0 * g;
    m[(2, 4)] = f;
    m[(2, 1)] = -g;
    m[(2, 0)] = g;
    m[(2, 2)] = -h;
    m[(2, 3)] = dm;
    m[(3, 5)] = -f;
    m[(3, 3)] = -h;
    m[(3, 2)] = -dm;
    m[(4, 7)] = g;
    m[(4, 5)] = db;
    m[(5, 6)] = -g;
    m[(5, 4)] = -db;
    m[(6, 5)] = g;
    m[(6, 6)] = -h;
    m[(6, 7)] = dc;
    m[(7, 4)] = -g;
    m[(7, 7)] = -h;
    m[(7, 6)] = -dc;
    let mut w = DVector::<f64>::zeros(8);
    w[7] = -f;
    let mut s = MomentSystem::new(m, w, DVector::zeros(8), labels(&HO_DETUNED_LABELS))?;
    let mut weights = DVector::<f64>::zeros(8);
    weights[0] = p.omega_b;
    s.energy_readout = Some((0.0, weights));
    Ok(s)
}

/// Relative size below which M is treated as singular.
const SINGULAR_RCOND: f64 = 1e-12;

/// Particular stationary solution -M^{-1} W, if M is safely invertible.
fn particular_solution(sys: &MomentSystem) -> Result<DVector<f64>> {
    let sv = sys.matrix.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smax > 0.0) || smin <= SINGULAR_RCOND * smax {
        return Err(Error::SingularMatrix);
    }
    let sol = sys.matrix.clone().lu().solve(&sys.inhomogeneity).ok_or(Error::SingularMatrix)?;
    Ok(-sol)
}

fn series_from_vectors(sys: &MomentSystem, t_grid: &[f64], vs: &[DVector<f64>], solver: &str) -> Result<TimeSeries> {
    let mut out = TimeSeries::new(t_grid.to_vec())?;
    for (k, name) in sys.labels.iter().enumerate() {
        out.insert(name.clone(), vs.iter().map(|v| v[k]).collect())?;
    }
    if sys.energy_readout.is_some() {
        out.insert(series::ENERGY, vs.iter().map(|v| sys.energy_of(v).unwrap()).collect())?;
    }
    out.meta.insert("solver".into(), solver.into());
    Ok(out)
}

/// Evolves a moment system by exact matrix-exponential propagation.
/// Inhomogeneous systems with singular M fall back to adaptive integration.
pub fn evolve_moments(sys: &MomentSystem, t_grid: &[f64]) -> Result<TimeSeries> {
    series::check_grid(t_grid)?;
    let shift = if sys.is_homogeneous() {
        DVector::zeros(sys.dim())
    } else {
        match particular_solution(sys) {
            Ok(v) => v,
            Err(Error::SingularMatrix) => return evolve_moments_ode(sys, t_grid, &OdeOptions::default()),
            Err(e) => return Err(e),
        }
    };
    // V(t) = e^{Mt}(V0 - v_p) + v_p
    let mut u = &sys.v0 - &shift;
    let mut cache: Vec<(u64, DMatrix<f64>)> = Vec::new();
    let mut t_prev = 0.0;
    let mut vs = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let dt = t - t_prev;
        if dt != 0.0 {
            let key = dt.to_bits();
            let idx = match cache.iter().position(|(k, _)| *k == key) {
                Some(i) => i,
                None => {
                    cache.push((key, expm(&(&sys.matrix * dt))?));
                    cache.len() - 1
                }
            };
            u = &cache[idx].1 * u;
        }
        t_prev = t;
        vs.push(&u + &shift);
    }
    series_from_vectors(sys, t_grid, &vs, "moments")
}

/// Evolves a moment system with the adaptive integrator.
pub fn evolve_moments_ode(sys: &MomentSystem, t_grid: &[f64], opts: &OdeOptions) -> Result<TimeSeries> {
    series::check_grid(t_grid)?;
    let n = sys.dim();
    let mut vs = Vec::with_capacity(t_grid.len());
    let m = &sys.matrix;
    let w = &sys.inhomogeneity;
    dopri5(
        |_, y: &[f64], dy: &mut [f64]| {
            for i in 0..n {
                let mut acc = w[i];
                for j in 0..n {
                    acc += m[(i, j)] * y[j];
                }
                dy[i] = acc;
            }
        },
        0.0,
        sys.v0.as_slice(),
        t_grid,
        opts,
        |_| 0.0,
        |_, _, y| {
            vs.push(DVector::from_column_slice(y));
            Ok(())
        },
    )?;
    series_from_vectors(sys, t_grid, &vs, "moments-ode")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resonant_determinants() {
        let p = Params::resonant(1.0, 0.5, 0.3);
        let (s1, s2) = tls_moment_systems(&p).unwrap();
        // 4 F^4 g^2 gamma^2 (4F^2 + g^2), from the eigenvalue pairs of the closed forms
        assert!((s1.det() - 0.045).abs() < 1e-12, "{}", s1.det());
        assert!(s2.det().abs() < 1e-14);
    }

    #[test]
    fn undriven_undamped_v1_is_frozen() {
        let (s1, _) = tls_moment_systems(&Params::resonant(1.0, 0.0, 0.0)).unwrap();
        let s = evolve_moments(&s1, &[0.0, 1.0, 10.0]).unwrap();
        for name in ["sz_b", "sz_c"] {
            assert!(s.column(name).unwrap().iter().all(|&z| (z + 1.0).abs() < 1e-13));
        }
    }

    #[test]
    fn resonance_required_for_displaced_frame() {
        let p = Params::resonant(1.0, 0.1, 0.5).with_detunings(0.1, 0.0);
        assert!(matches!(
            ho_resonant_moment_system(&p),
            Err(Error::RequiresResonance { .. })
        ));
    }

    #[test]
    fn displaced_energy_starts_at_zero() {
        let s = ho_resonant_moment_system(&Params::resonant(1.0, 0.1, 0.5)).unwrap();
        let ts = evolve_moments(&s, &[0.0]).unwrap();
        assert!(ts.energy().unwrap()[0].abs() < 1e-18);
    }
}
