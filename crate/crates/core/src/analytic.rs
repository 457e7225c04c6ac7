//! Closed-form solutions for the resonant and detuned models.
//!
//! Energies are written as `e_ss - sum_j A_j X_j(t)` with the damped
//! branch functions `X_j(t) = exp(-gamma t/4) chi_t(gamma, g, f_j)`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::models::Params;

/// Arguments of one branch function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiArgs {
    pub gamma_c: f64,
    pub g: f64,
    pub f: f64,
}

/// Below this |u| = |gamma^2 - 32 f g^2| t^2 / 16 the series form is used.
const SERIES_CUTOFF: f64 = 1e-3;

/// Regime of a branch from the sign of gamma^2 - 32 f g^2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Damping {
    Under,
    Critical,
    Over,
}

impl ChiArgs {
    pub fn new(gamma_c: f64, g: f64, f: f64) -> Self {
        Self { gamma_c, g, f }
    }

    /// gamma^2 - 32 f g^2.
    pub fn discriminant(&self) -> f64 {
        self.gamma_c * self.gamma_c - 32.0 * self.f * self.g * self.g
    }

    pub fn damping(&self) -> Damping {
        let d = self.discriminant();
        let scale = self.gamma_c * self.gamma_c + 32.0 * self.f * self.g * self.g;
        if d.abs() <= 1e-14 * scale {
            Damping::Critical
        } else if d < 0.0 {
            Damping::Under
        } else {
            Damping::Over
        }
    }

    /// Angular frequency sqrt(32 f g^2 - gamma^2)/4 of an underdamped branch.
    pub fn frequency(&self) -> f64 {
        (-self.discriminant()).max(0.0).sqrt() / 4.0
    }
}

/// cosh x + (gamma t/4) sinh(x)/x with x^2 = u, by series in u.
fn chi_series(u: f64, q: f64) -> f64 {
    // cosh: 1 + u/2 + u^2/24 + u^3/720 + u^4/40320
    // sinh x / x: 1 + u/6 + u^2/120 + u^3/5040 + u^4/362880
    let c = 1.0 + u * (1.0 / 2.0 + u * (1.0 / 24.0 + u * (1.0 / 720.0 + u / 40320.0)));
    let s = 1.0 + u * (1.0 / 6.0 + u * (1.0 / 120.0 + u * (1.0 / 5040.0 + u / 362880.0)));
    c + q * s
}

/// chi_t(gamma, g, f) = cosh(Gt/4) + (gamma/G) sinh(Gt/4), G = sqrt(gamma^2 - 32 f g^2).
///
/// Grows like exp(G t/4) when overdamped; use [`damped_chi`] for the
/// physically relevant product with exp(-gamma t/4).
pub fn chi(args: ChiArgs, t: f64) -> f64 {
    let d = args.discriminant();
    let q = args.gamma_c * t / 4.0;
    let u = d * t * t / 16.0;
    if u.abs() < SERIES_CUTOFF {
        return chi_series(u, q);
    }
    if d < 0.0 {
        let y = (-d).sqrt() * t / 4.0;
        y.cos() + q * y.sin() / y
    } else {
        let x = d.sqrt() * t / 4.0;
        x.cosh() + q * x.sinh() / x
    }
}

/// exp(-gamma t/4) chi_t(gamma, g, f), evaluated without overflow.
pub fn damped_chi(args: ChiArgs, t: f64) -> f64 {
    let d = args.discriminant();
    let gm = args.gamma_c;
    let q = gm * t / 4.0;
    let u = d * t * t / 16.0;
    if u.abs() < SERIES_CUTOFF {
        return (-q).exp() * chi_series(u, q);
    }
    if d < 0.0 {
        let y = (-d).sqrt() * t / 4.0;
        (-q).exp() * (y.cos() + q * y.sin() / y)
    } else {
        let big = d.sqrt();
        // big - gamma without cancellation
        let slow = -32.0 * args.f * args.g * args.g / (big + gm);
        let fast = -(big + gm);
        0.5 * (1.0 + gm / big) * (slow * t / 4.0).exp() + 0.5 * (1.0 - gm / big) * (fast * t / 4.0).exp()
    }
}

/// Upper bound on |damped_chi| that is non-increasing in t.
pub fn damped_chi_envelope(args: ChiArgs, t: f64) -> f64 {
    let gm = args.gamma_c;
    let q = gm * t / 4.0;
    match args.damping() {
        Damping::Under => {
            let w4 = (-args.discriminant()).sqrt();
            let amp = (1.0 + (gm / w4).powi(2)).sqrt();
            (-q).exp() * amp.min(1.0 + q)
        }
        Damping::Critical => (-q).exp() * (1.0 + q),
        Damping::Over => {
            let big = args.discriminant().sqrt();
            let slow = -32.0 * args.f * args.g * args.g / (big + gm);
            // the second exponential enters with a negative weight
            0.5 * (1.0 + gm / big) * (slow * t / 4.0).exp()
        }
    }
}

/// Branch constants (f0, f1, f2) for r = F/g. f1 is written in a
/// cancellation-free form.
pub fn branch_constants(r: f64) -> [f64; 3] {
    let s = (1.0 + 4.0 * r * r).sqrt();
    let a = 1.0 + 2.0 * r * r;
    [0.5, 4.0 * r.powi(4) / (a + s), a + s]
}

/// Energy of the form `e_ss - sum_j amp_j exp(-gamma t/4) chi_t(gamma, g, f_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedFormEnergy {
    pub e_ss: f64,
    pub gamma_c: f64,
    pub g: f64,
    /// (amplitude, f) pairs.
    pub terms: Vec<(f64, f64)>,
}

impl ClosedFormEnergy {
    fn args(&self, f: f64) -> ChiArgs {
        ChiArgs::new(self.gamma_c, self.g, f)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.e_ss - self.deviation(t)
    }

    /// e_ss - E(t).
    pub fn deviation(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, f)| if a == 0.0 { 0.0 } else { a * damped_chi(self.args(f), t) })
            .sum()
    }

    /// Non-increasing bound on |E(t) - e_ss|.
    pub fn envelope(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, f)| a.abs() * damped_chi_envelope(self.args(f), t))
            .sum()
    }

    pub fn initial(&self) -> f64 {
        self.eval(0.0)
    }

    /// Shortest oscillation period among the underdamped branches.
    pub fn shortest_period(&self) -> Option<f64> {
        self.terms
            .iter()
            .filter(|(a, _)| *a != 0.0)
            .map(|&(_, f)| self.args(f))
            .filter(|a| a.damping() == Damping::Under)
            .map(|a| 2.0 * std::f64::consts::PI / a.frequency())
            .reduce(f64::min)
    }

    /// Slowest decay rate of the envelope among the branches.
    pub fn slowest_rate(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(a, _)| *a != 0.0)
            .map(|&(_, f)| {
                let a = self.args(f);
                match a.damping() {
                    Damping::Over => {
                        let big = a.discriminant().sqrt();
                        32.0 * f * a.g * a.g / (big + a.gamma_c) / 4.0
                    }
                    _ => a.gamma_c / 4.0,
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn require_resonance(p: &Params, what: &'static str) -> Result<()> {
    if !p.is_resonant() {
        return Err(Error::RequiresResonance { what });
    }
    Ok(())
}

fn require_coupling(p: &Params) -> Result<()> {
    if !(p.g > 0.0) {
        return Err(invalid("g", "closed forms need g > 0"));
    }
    Ok(())
}

/// Two-TLS battery energy as a [`ClosedFormEnergy`].
pub fn tls_energy_form(p: &Params) -> Result<ClosedFormEnergy> {
    p.validate()?;
    require_resonance(p, "two-TLS closed form")?;
    require_coupling(p)?;
    let r = p.ratio();
    let s = (1.0 + 4.0 * r * r).sqrt();
    let norm = 4.0 * (1.0 + 4.0 * r * r);
    let [f0, f1, f2] = branch_constants(r);
    let w = p.omega_b;
    Ok(ClosedFormEnergy {
        e_ss: 0.5 * w,
        gamma_c: p.gamma_c,
        g: p.g,
        terms: vec![
            (w * 8.0 * r * r / norm, f0),
            (w * (1.0 + s) / norm, f1),
            (w * (1.0 - s) / norm, f2),
        ],
    })
}

/// Exact resonant two-TLS battery energy E_B(t).
pub fn tls_energy_closed(p: &Params, t: f64) -> Result<f64> {
    Ok(tls_energy_form(p)?.eval(t))
}

/// Exact resonant <sigma^-_B>(t); real in the crate's phase convention.
pub fn tls_sigma_minus_closed(p: &Params, t: f64) -> Result<Complex64> {
    p.validate()?;
    require_resonance(p, "two-TLS closed form")?;
    require_coupling(p)?;
    let r = p.ratio();
    let v_ss = -r / (1.0 + 4.0 * r * r);
    let args = ChiArgs::new(p.gamma_c, p.g, 0.5 * (1.0 + 4.0 * r * r));
    Ok(Complex64::new(v_ss * (1.0 - damped_chi(args, t)), 0.0))
}

/// TLS ergotropy from <sigma^z> and <sigma^->.
pub fn tls_ergotropy_from_moments(sz: f64, sm: Complex64, omega_b: f64) -> f64 {
    0.5 * omega_b * (sz + (sz * sz + 4.0 * sm.norm_sqr()).sqrt())
}

/// Resonant two-TLS ergotropy from the closed-form moments.
pub fn tls_ergotropy_closed(p: &Params, t: f64) -> Result<f64> {
    let e = tls_energy_closed(p, t)?;
    let sz = 2.0 * e / p.omega_b - 1.0;
    let sm = tls_sigma_minus_closed(p, t)?;
    Ok(tls_ergotropy_from_moments(sz, sm, p.omega_b))
}

/// Steady (energy, ergotropy) of the two-TLS model with dephasing.
pub fn tls_steady(p: &Params) -> Result<(f64, f64)> {
    p.validate()?;
    if !(p.gamma_c > 0.0) {
        return Err(invalid("gamma_C", "steady values need gamma_C > 0"));
    }
    if p.delta_bd != 0.0 {
        return Err(Error::RequiresResonance {
            what: "two-TLS steady state (drive resonant with the battery)",
        });
    }
    require_coupling(p)?;
    let r = p.ratio();
    Ok((0.5 * p.omega_b, p.omega_b * r / (1.0 + 4.0 * r * r)))
}

/// Slow-branch approximation valid for gamma much larger than F and g:
/// each damped branch reduced to exp(-4 f_j g^2 t / gamma).
pub fn tls_energy_large_gamma(p: &Params, t: f64) -> Result<f64> {
    let form = tls_energy_form(p)?;
    let dev: f64 = form
        .terms
        .iter()
        .map(|&(a, f)| a * (-4.0 * f * p.g * p.g * t / p.gamma_c).exp())
        .sum();
    Ok(form.e_ss - dev)
}

/// Two-HO battery energy as a [`ClosedFormEnergy`].
pub fn ho_energy_form(p: &Params) -> Result<ClosedFormEnergy> {
    p.validate()?;
    require_resonance(p, "two-HO closed form")?;
    require_coupling(p)?;
    let r2 = p.ratio().powi(2) * p.omega_b;
    Ok(ClosedFormEnergy {
        e_ss: 1.5 * r2,
        gamma_c: p.gamma_c,
        g: p.g,
        terms: vec![(2.0 * r2, 0.5), (-0.5 * r2, 2.0)],
    })
}

/// Exact resonant two-HO battery energy.
pub fn ho_energy_closed_resonant(p: &Params, t: f64) -> Result<f64> {
    Ok(ho_energy_form(p)?.eval(t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetunedCase {
    /// Charger and battery resonant with each other, both detuned from the drive.
    DetunedDrive,
    /// Drive resonant with the battery, charger detuned.
    DetunedCB,
}

/// Closed-case (gamma_C = 0) two-HO energy with detuning.
pub fn ho_closed_detuned(p: &Params, t: f64, case: DetunedCase) -> Result<f64> {
    p.validate()?;
    require_coupling(p)?;
    if p.gamma_c != 0.0 {
        return Err(invalid("gamma_C", "detuned closed forms hold for gamma_C = 0"));
    }
    let (g, f, w) = (p.g, p.f, p.omega_b);
    match case {
        DetunedCase::DetunedDrive => {
            if p.delta_cd != p.delta_bd {
                return Err(invalid("delta_Bd", "detuned drive needs delta_Bd = delta_Cd"));
            }
            let d = p.delta_cd;
            if (d.abs() - g).abs() < 1e-9 {
                return Err(Error::OnResonancePole);
            }
            let den = 2.0 * (d * d - g * g).powi(2);
            let (gt, dt) = (g * t, d * t);
            let bracket = 3.0 * g * g + g * g * (2.0 * gt).cos() - 4.0 * g * g * gt.cos() * dt.cos()
                + 2.0 * gt.sin() * d * (d * gt.sin() - 2.0 * g * dt.sin());
            Ok(w * f * f / den * bracket)
        }
        DetunedCase::DetunedCB => {
            if p.delta_bd != 0.0 {
                return Err(invalid("delta_Bd", "charger-battery detuning needs delta_Bd = 0"));
            }
            let d = p.delta_cb();
            let root = (d * d + 4.0 * g * g).sqrt();
            let alpha = (g * g + 0.5 * d * d + 0.5 * d * root).sqrt();
            let (c1, c2) = ((g * t / alpha).cos(), (alpha * t).cos());
            let braces = 2.0 - 2.0 * g * g / (root * root) + 2.0 * g * g * (root * t).cos() / (root * root)
                - (c1 + c2)
                - d / root * (c1 - c2);
            Ok(w * f * f / (g * g) * braces)
        }
    }
}

/// Closed-case energy 4 F^2 g^2 cos^2(delta pi / 2g) / (delta^2 - g^2)^2 at
/// t = (2k+1) pi / g for |delta_Cd| < g. It is a local maximum there; the
/// beat of the two normal modes can reach a larger global maximum (twice
/// this value at delta = g / 2, t = 2 pi / g).
pub fn ho_detuned_drive_max(p: &Params) -> Result<f64> {
    p.validate()?;
    require_coupling(p)?;
    let (g, d) = (p.g, p.delta_cd);
    if (d.abs() - g).abs() < 1e-9 {
        return Err(Error::OnResonancePole);
    }
    if d.abs() > g {
        return Err(invalid("delta_Cd", "the maximum formula holds for |delta_Cd| < g"));
    }
    let c = (d * std::f64::consts::PI / (2.0 * g)).cos();
    Ok(p.omega_b * 4.0 * p.f * p.f * g * g * c * c / (d * d - g * g).powi(2))
}

/// Long-time growth rate dE_B/dt of the dephased two-HO with detuned drive.
pub fn ho_long_time_slope(p: &Params) -> f64 {
    let (g, d, gm, f) = (p.g, p.delta_cd, p.gamma_c, p.f);
    let den = 4.0 * g.powi(4) - 8.0 * g * g * d * d + gm * gm * d * d + 4.0 * d.powi(4);
    p.omega_b * 2.0 * f * f * gm * d * d / den
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    SmallGamma,
    LargeGammaWeakDrive,
    LargeGammaStrongDrive,
    HoSmallGamma,
    HoLargeGamma,
}

/// Thresholds deciding whether a regime applies.
pub const SMALL_GAMMA_MAX: f64 = 0.1;
pub const LARGE_GAMMA_MIN: f64 = 10.0;
pub const WEAK_DRIVE_MAX: f64 = 0.2;
pub const STRONG_DRIVE_MIN: f64 = 5.0;

/// Asymptotic charging time together with a regime warning, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticTau {
    pub tau: f64,
    pub warning: Option<Error>,
}

/// Asymptotic charging-time laws.
pub fn charging_time_asymptotic(p: &Params, n: u32, regime: Regime) -> Result<AsymptoticTau> {
    p.validate()?;
    require_coupling(p)?;
    let (g, f, gm) = (p.g, p.f, p.gamma_c);
    if !(gm > 0.0) {
        return Err(invalid("gamma_C", "asymptotic laws need gamma_C > 0"));
    }
    let n = n as f64;
    let r = p.ratio();
    let small = gm <= SMALL_GAMMA_MAX * g;
    let large = gm >= LARGE_GAMMA_MIN * g.max(f);
    let (tau, ok, why) = match regime {
        Regime::SmallGamma => (4.0 * n / gm, small, "needs gamma_C << g"),
        Regime::LargeGammaWeakDrive => (
            n * g * g * gm / f.powi(4),
            large && r <= WEAK_DRIVE_MAX,
            "needs gamma_C >> F, g and F/g <= 0.2",
        ),
        Regime::LargeGammaStrongDrive => (
            n * gm / (2.0 * g * g),
            large && r >= STRONG_DRIVE_MIN,
            "needs gamma_C >> F, g and F/g >= 5",
        ),
        Regime::HoSmallGamma => (4.0 * n / gm, small, "needs gamma_C << g"),
        Regime::HoLargeGamma => (n * gm / (2.0 * g * g), gm >= LARGE_GAMMA_MIN * g, "needs gamma_C >> g"),
    };
    let warning = (!ok).then(|| Error::RegimeMismatch(format!("{regime:?} {why}")));
    Ok(AsymptoticTau { tau, warning })
}

/// Charging time predicted by the slowest exact branch at large gamma,
/// n gamma / (4 f1 g^2).
pub fn tls_slow_branch_time(p: &Params, n: u32) -> Result<f64> {
    require_coupling(p)?;
    let f1 = branch_constants(p.ratio())[1];
    Ok(n as f64 * p.gamma_c / (4.0 * f1 * p.g * p.g))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OscillatorKind {
    TwoTls,
    TwoHo,
}

/// Estimated optimal dephasing rate.
///
/// Two-TLS: 8F^2/g for weak drive, 4g for strong drive, and in between the
/// critical rate sqrt(32 f) g of the branch with the largest amplitude.
/// Two-HO: 4g.
pub fn optimal_dephasing(p: &Params, kind: OscillatorKind) -> Result<f64> {
    p.validate()?;
    require_coupling(p)?;
    let g = p.g;
    match kind {
        OscillatorKind::TwoHo => Ok(4.0 * g),
        OscillatorKind::TwoTls => {
            let r = p.ratio();
            if r <= WEAK_DRIVE_MAX {
                return Ok(8.0 * p.f * p.f / g);
            }
            if r >= STRONG_DRIVE_MIN {
                return Ok(4.0 * g);
            }
            let s = (1.0 + 4.0 * r * r).sqrt();
            let amps = [8.0 * r * r, 1.0 + s, (1.0 - s).abs()];
            let fs = branch_constants(r);
            let k = (0..3).max_by(|&a, &b| amps[a].total_cmp(&amps[b])).unwrap();
            Ok((32.0 * fs[k]).sqrt() * g)
        }
    }
}
