//! Rotating-frame charger–battery models with a dephasing jump on the charger.

use crate::error::{invalid, Error, Result};
use crate::opalg::{embed, kron, ops, partial_trace, ComplexMatrix, C64};

/// Physical parameters in units of the battery frequency (hbar = 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    pub omega_b: f64,
    /// Charger detuning from the drive, omega_C - omega_d.
    pub delta_cd: f64,
    /// Battery detuning from the drive, omega_B - omega_d.
    pub delta_bd: f64,
    pub g: f64,
    pub f: f64,
    pub gamma_c: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            omega_b: 1.0,
            delta_cd: 0.0,
            delta_bd: 0.0,
            g: 1.0,
            f: 0.5,
            gamma_c: 1.0,
        }
    }
}

impl Params {
    /// All three frequencies equal.
    pub fn resonant(g: f64, f: f64, gamma_c: f64) -> Self {
        Self {
            g,
            f,
            gamma_c,
            ..Self::default()
        }
    }

    pub fn with_gamma(self, gamma_c: f64) -> Self {
        Self { gamma_c, ..self }
    }

    pub fn with_detunings(self, delta_cd: f64, delta_bd: f64) -> Self {
        Self {
            delta_cd,
            delta_bd,
            ..self
        }
    }

    /// Charger-battery detuning omega_C - omega_B.
    pub fn delta_cb(&self) -> f64 {
        self.delta_cd - self.delta_bd
    }

    /// Drive strength relative to the coupling; infinite for g = 0.
    pub fn ratio(&self) -> f64 {
        if self.g == 0.0 {
            if self.f == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.f / self.g
        }
    }

    pub fn is_resonant(&self) -> bool {
        self.delta_cd == 0.0 && self.delta_bd == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("omega_B", self.omega_b),
            ("delta_Cd", self.delta_cd),
            ("delta_Bd", self.delta_bd),
            ("g", self.g),
            ("F", self.f),
            ("gamma_C", self.gamma_c),
        ];
        for (name, v) in checks {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        for (name, v) in [("g", self.g), ("F", self.f), ("gamma_C", self.gamma_c)] {
            if v < 0.0 {
                return Err(invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.omega_b <= 0.0 {
            return Err(invalid("omega_B", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    TwoTls,
    TwoHo,
    TlsHo,
    StarTls(usize),
}

impl ModelKind {
    pub fn name(&self) -> String {
        match self {
            ModelKind::TwoTls => "two_tls".into(),
            ModelKind::TwoHo => "two_ho".into(),
            ModelKind::TlsHo => "tls_ho".into(),
            ModelKind::StarTls(n) => format!("star_tls({n})"),
        }
    }

    pub fn charger_is_oscillator(&self) -> bool {
        matches!(self, ModelKind::TwoHo)
    }

    pub fn battery_is_oscillator(&self) -> bool {
        matches!(self, ModelKind::TwoHo | ModelKind::TlsHo)
    }

    pub fn battery_is_tls(&self) -> bool {
        matches!(self, ModelKind::TwoTls)
    }
}

/// A fully assembled model in the frame rotating at the drive frequency.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub hamiltonian: ComplexMatrix,
    /// Charger dephasing operator tensored with the battery identity.
    pub jump: ComplexMatrix,
    /// Battery Hamiltonian on the battery factor alone.
    pub battery_h: ComplexMatrix,
    /// Bare lab-frame charger Hamiltonian on the full space.
    pub charger_h: ComplexMatrix,
    /// Charger dimension first, then each battery factor.
    pub dims: Vec<usize>,
    pub params: Params,
    pub kind: ModelKind,
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn charger_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn battery_dim(&self) -> usize {
        self.dims[1..].iter().product()
    }

    /// Fock cutoff of the oscillator factors, if any.
    pub fn cutoff(&self) -> Option<usize> {
        match self.kind {
            ModelKind::TwoHo => Some(self.dims[0]),
            ModelKind::TlsHo => Some(self.dims[1]),
            _ => None,
        }
    }

    /// Index of the ground state of a single factor.
    fn factor_ground(&self, k: usize) -> usize {
        let osc = match k {
            0 => self.kind.charger_is_oscillator(),
            _ => self.kind.battery_is_oscillator(),
        };
        if osc {
            0
        } else {
            1
        }
    }

    /// Product of the free ground states.
    pub fn ground_ket(&self) -> Vec<C64> {
        let mut idx = 0usize;
        for (k, &d) in self.dims.iter().enumerate() {
            idx = idx * d + self.factor_ground(k);
        }
        ops::basis_ket(self.dim(), idx)
    }

    pub fn ground_state(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.ground_ket())
    }

    /// Reduced battery state Tr_C[rho].
    pub fn battery_state(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        partial_trace(rho, &[self.charger_dim(), self.battery_dim()], 1)
    }

    /// Reduced charger state.
    pub fn charger_state(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        partial_trace(rho, &[self.charger_dim(), self.battery_dim()], 0)
    }

    /// Battery Hamiltonian lifted to the full space.
    pub fn battery_h_full(&self) -> ComplexMatrix {
        kron(&ComplexMatrix::identity(self.charger_dim()), &self.battery_h)
    }

    pub fn with_gamma(&self, gamma_c: f64) -> Self {
        let mut m = self.clone();
        m.params.gamma_c = gamma_c;
        m
    }

    /// Largest population in the top two Fock levels of any oscillator
    /// factor; `None` when the model has no oscillator.
    pub fn fock_tail(&self, rho: &ComplexMatrix) -> Result<Option<f64>> {
        let mut worst: Option<f64> = None;
        let mut check = |reduced: ComplexMatrix| {
            let d = reduced.dim();
            let tail = reduced[(d - 1, d - 1)].re + reduced[(d - 2, d - 2)].re;
            worst = Some(worst.map_or(tail, |w: f64| w.max(tail)));
        };
        if self.kind.charger_is_oscillator() {
            check(self.charger_state(rho)?);
        }
        if self.kind.battery_is_oscillator() {
            check(self.battery_state(rho)?);
        }
        Ok(worst)
    }
}

/// Population threshold on the top two Fock levels.
pub const FOCK_TAIL_TOL: f64 = 1e-8;

/// Default truncation 2 + ceil(8 r^2 + 6 r) for r = F/g.
pub fn default_cutoff(p: &Params) -> usize {
    let r = p.ratio();
    if !r.is_finite() {
        return 64;
    }
    2 + (8.0 * r * r + 6.0 * r).ceil() as usize
}

fn check_cutoff(cutoff: usize) -> Result<()> {
    if cutoff < 2 {
        return Err(Error::CutoffTooSmall {
            cutoff,
            reason: "at least two Fock levels are required".into(),
        });
    }
    Ok(())
}

fn scaled(m: &ComplexMatrix, c: f64) -> ComplexMatrix {
    m.scale(C64::new(c, 0.0))
}

struct Parts {
    a_c: ComplexMatrix,
    a_b: ComplexMatrix,
    dc: usize,
    db: usize,
}

fn assemble(p: Params, parts: Parts, kind: ModelKind) -> Result<ModelSpec> {
    p.validate()?;
    let Parts { a_c, a_b, dc, db } = parts;
    let dims = vec![dc, db];
    let n_c = a_c.dagger().matmul(&a_c);
    let n_b = a_b.dagger().matmul(&a_b);
    let lc = embed(&n_c, &dims, 0)?;
    let lb = embed(&n_b, &dims, 1)?;
    let ac = embed(&a_c, &dims, 0)?;
    let ab = embed(&a_b, &dims, 1)?;
    let hop = ac.dagger().matmul(&ab);
    let mut h = scaled(&lc, p.delta_cd);
    h += &scaled(&lb, p.delta_bd);
    h += &scaled(&(&hop + &hop.dagger()), p.g);
    h += &scaled(&(&ac + &ac.dagger()), p.f);
    h.hermitize();
    let omega_c = p.omega_b + p.delta_cb();
    Ok(ModelSpec {
        hamiltonian: h,
        jump: lc.clone(),
        battery_h: scaled(&n_b, p.omega_b),
        charger_h: scaled(&lc, omega_c),
        dims,
        params: p,
        kind,
    })
}

/// Two two-level systems; 4-dimensional.
pub fn build_two_tls(p: Params) -> Result<ModelSpec> {
    assemble(
        p,
        Parts {
            a_c: ops::sigma_minus(),
            a_b: ops::sigma_minus(),
            dc: 2,
            db: 2,
        },
        ModelKind::TwoTls,
    )
}

/// Two truncated oscillators with a common Fock cutoff.
pub fn build_two_ho(p: Params, cutoff: usize) -> Result<ModelSpec> {
    check_cutoff(cutoff)?;
    assemble(
        p,
        Parts {
            a_c: ops::annihilation(cutoff),
            a_b: ops::annihilation(cutoff),
            dc: cutoff,
            db: cutoff,
        },
        ModelKind::TwoHo,
    )
}

/// Two-level charger driving an oscillator battery.
pub fn build_tls_ho(p: Params, cutoff: usize) -> Result<ModelSpec> {
    check_cutoff(cutoff)?;
    assemble(
        p,
        Parts {
            a_c: ops::sigma_minus(),
            a_b: ops::annihilation(cutoff),
            dc: 2,
            db: cutoff,
        },
        ModelKind::TlsHo,
    )
}

pub const MAX_STAR_BATTERIES: usize = 6;

/// One two-level charger coupled to `n_batteries` identical two-level batteries.
pub fn build_star_tls(p: Params, n_batteries: usize) -> Result<ModelSpec> {
    if n_batteries == 0 || n_batteries > MAX_STAR_BATTERIES {
        return Err(Error::TooManyBatteries(n_batteries));
    }
    p.validate()?;
    let dims = vec![2usize; n_batteries + 1];
    let sm = ops::sigma_minus();
    let proj = ops::excited_projector();
    let lc = embed(&proj, &dims, 0)?;
    let ac = embed(&sm, &dims, 0)?;
    let dim = 1usize << (n_batteries + 1);
    let mut h = scaled(&lc, p.delta_cd);
    h += &scaled(&(&ac + &ac.dagger()), p.f);
    let mut hop = ComplexMatrix::zeros(dim);
    for j in 1..=n_batteries {
        h += &scaled(&embed(&proj, &dims, j)?, p.delta_bd);
        hop += &ac.dagger().matmul(&embed(&sm, &dims, j)?);
    }
    h += &scaled(&(&hop + &hop.dagger()), p.g);
    h.hermitize();

    let bdims = vec![2usize; n_batteries];
    let mut hb = ComplexMatrix::zeros(1 << n_batteries);
    for j in 0..n_batteries {
        hb += &embed(&proj, &bdims, j)?;
    }
    let omega_c = p.omega_b + p.delta_cb();
    let kind = if n_batteries == 1 {
        ModelKind::TwoTls
    } else {
        ModelKind::StarTls(n_batteries)
    };
    let dims = if n_batteries == 1 { vec![2, 2] } else { dims };
    Ok(ModelSpec {
        hamiltonian: h,
        jump: lc.clone(),
        battery_h: scaled(&hb, p.omega_b),
        charger_h: scaled(&lc, omega_c),
        dims,
        params: p,
        kind,
    })
}

/// Builds any kind; oscillator models need a cutoff (defaulted when `None`).
pub fn build(kind: ModelKind, p: Params, cutoff: Option<usize>) -> Result<ModelSpec> {
    match kind {
        ModelKind::TwoTls => build_two_tls(p),
        ModelKind::TwoHo => build_two_ho(p, cutoff.unwrap_or_else(|| default_cutoff(&p))),
        ModelKind::TlsHo => build_tls_ho(p, cutoff.unwrap_or_else(|| default_cutoff(&p))),
        ModelKind::StarTls(n) => build_star_tls(p, n),
    }
}

/// Next cutoff in the escalation sequence (+25%, at least +2).
pub fn escalate_cutoff(cutoff: usize) -> usize {
    cutoff + (cutoff / 4).max(2)
}

/// Max-norm of [jump, charger_h]; zero for pure dephasing.
pub fn dephasing_commutator_norm(m: &ModelSpec) -> f64 {
    m.jump.commutator(&m.charger_h).max_abs()
}
