//! Battery figures of merit and the last-root charging time.

use crate::analytic::ClosedFormEnergy;
use crate::error::{invalid, Error, Result};
use crate::opalg::{expect, herm_eigvals, ComplexMatrix};
use crate::series::TimeSeries;

/// Tr[rho_B H_B].
pub fn energy(rho_b: &ComplexMatrix, h_b: &ComplexMatrix) -> Result<f64> {
    Ok(expect(h_b, rho_b)?.re)
}

/// Passive-state energy: eigenvalues of rho in descending order paired
/// with those of H in ascending order.
pub fn passive_energy(rho_b: &ComplexMatrix, h_b: &ComplexMatrix) -> Result<f64> {
    if rho_b.dim() != h_b.dim() {
        return Err(Error::DimMismatch {
            expected: h_b.dim(),
            found: rho_b.dim(),
        });
    }
    let mut p = herm_eigvals(rho_b)?;
    p.reverse();
    let e = herm_eigvals(h_b)?;
    Ok(p.iter().zip(&e).map(|(a, b)| a * b).sum())
}

/// Maximal unitarily extractable work, Tr[rho H] minus the passive energy.
pub fn ergotropy(rho_b: &ComplexMatrix, h_b: &ComplexMatrix) -> Result<f64> {
    let e = energy(rho_b, h_b)?;
    let w = e - passive_energy(rho_b, h_b)?;
    // roundoff can leave a tiny negative value for passive states
    Ok(if w < 0.0 && w > -1e-12 { 0.0 } else { w })
}

/// Eigenvalues below this are treated as zero in the entropy.
pub const ENTROPY_EIG_FLOOR: f64 = 1e-14;

/// von Neumann entropy in nats.
pub fn entropy(rho: &ComplexMatrix) -> Result<f64> {
    let ev = herm_eigvals(rho)?;
    Ok(ev
        .iter()
        .filter(|&&p| p > ENTROPY_EIG_FLOOR)
        .map(|&p| -p * p.ln())
        .sum::<f64>()
        .max(0.0))
}

/// Binary entropy of the passive TLS population (E - ergotropy)/omega_B.
pub fn tls_entropy_from_energy_ergotropy(energy: f64, ergotropy: f64, omega_b: f64) -> f64 {
    let p = (energy - ergotropy) / omega_b;
    let h = |x: f64| if x > ENTROPY_EIG_FLOOR { -x * x.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}

/// Result of a charging-time evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ChargingReport {
    pub tau: f64,
    pub n: u32,
    pub e_ss: f64,
    pub e_max_transient: f64,
    pub gamma_c: f64,
    pub converged: bool,
    /// End of the examined window.
    pub horizon: f64,
}

fn threshold(e0: f64, e_ss: f64, n: u32) -> Result<f64> {
    let gap = (e0 - e_ss).abs();
    if !(gap > 0.0) || !e_ss.is_finite() {
        return Err(invalid("e_ss", "initial energy must differ from the steady value"));
    }
    Ok((-(n as f64)).exp() * gap)
}

/// Last root of |E(t) - e_ss| = e^{-n} |E(0) - e_ss| on a sampled series.
/// The bracketing interval is refined on the linear interpolant.
pub fn charging_time(series: &TimeSeries, e_ss: f64, n: u32) -> Result<ChargingReport> {
    let e = series.energy()?;
    let t = &series.times;
    let thr = threshold(e[0], e_ss, n)?;
    let horizon = *t.last().unwrap();
    let gamma_c = series
        .meta
        .get("gamma_C")
        .and_then(|s| s.parse().ok())
        .unwrap_or(f64::NAN);
    let dev = |k: usize| (e[k] - e_ss).abs();
    let last = e.len() - 1;
    if dev(last) >= thr {
        return Err(Error::NotConverged { horizon });
    }
    let k = (0..last).rev().find(|&k| dev(k) >= thr).expect("initial sample exceeds threshold");
    // |E - e_ss| - thr changes sign inside [t_k, t_{k+1}]
    let (a, b) = (dev(k) - thr, dev(k + 1) - thr);
    let w = a / (a - b);
    let tau = t[k] + w * (t[k + 1] - t[k]);
    let e_max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ChargingReport {
        tau,
        n,
        e_ss,
        e_max_transient: e_max,
        gamma_c,
        converged: true,
        horizon,
    })
}

/// Last root for an energy known as a function, bracketed on `t_grid` and
/// refined by bisection to relative precision 1e-6.
pub fn charging_time_fn(
    energy_at: impl Fn(f64) -> f64,
    t_grid: &[f64],
    e_ss: f64,
    n: u32,
) -> Result<ChargingReport> {
    crate::series::check_grid(t_grid)?;
    let e0 = energy_at(t_grid[0]);
    let thr = threshold(e0, e_ss, n)?;
    let vals: Vec<f64> = t_grid.iter().map(|&t| energy_at(t)).collect();
    let horizon = *t_grid.last().unwrap();
    let over = |e: f64| (e - e_ss).abs() >= thr;
    if over(*vals.last().unwrap()) {
        return Err(Error::NotConverged { horizon });
    }
    let k = (0..vals.len() - 1).rev().find(|&k| over(vals[k])).expect("initial sample exceeds threshold");
    let tau = bisect_last_crossing(&|t| (energy_at(t) - e_ss).abs() - thr, t_grid[k], t_grid[k + 1]);
    Ok(ChargingReport {
        tau,
        n,
        e_ss,
        e_max_transient: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        gamma_c: f64::NAN,
        converged: true,
        horizon,
    })
}

/// Root of `h` in [lo, hi] with h(lo) >= 0 > h(hi).
fn bisect_last_crossing(h: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= 1e-7 * hi.abs().max(1e-12) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if h(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Samples per shortest oscillation period in the closed-form scan.
const SAMPLES_PER_PERIOD: f64 = 16.0;
/// Samples across the window when no branch oscillates.
const MIN_SAMPLES: f64 = 4000.0;

/// Charging time of a closed-form energy.
///
/// The window ends where the monotone envelope of |E - e_ss| falls below
/// the threshold, so no later crossing exists. Inside it the deviation is
/// scanned with at least 16 samples per shortest period, and the last
/// crossing is bisected on the exact function.
pub fn charging_time_closed(form: &ClosedFormEnergy, n: u32) -> Result<ChargingReport> {
    let e0 = form.initial();
    let thr = threshold(e0, form.e_ss, n)?;
    if !(form.gamma_c > 0.0) {
        return Err(Error::NotConverged { horizon: f64::INFINITY });
    }
    // envelope crossing
    let rate = form.slowest_rate().max(1e-300);
    let mut hi = 1.0 / rate;
    while form.envelope(hi) >= thr {
        hi *= 2.0;
        if !hi.is_finite() || hi > 1e15 {
            return Err(Error::NotConverged { horizon: hi });
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if form.envelope(mid) >= thr {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * hi {
            break;
        }
    }
    let t_end = hi;
    let mut step = t_end / MIN_SAMPLES;
    if let Some(period) = form.shortest_period() {
        step = step.min(period / SAMPLES_PER_PERIOD);
    }
    let steps = (t_end / step).ceil() as usize;
    let step = t_end / steps as f64;
    let over = |t: f64| form.deviation(t).abs() >= thr;
    let mut e_max = f64::NEG_INFINITY;
    let mut last_over = 0usize;
    for k in 0..=steps {
        let t = k as f64 * step;
        let d = form.deviation(t);
        e_max = e_max.max(form.e_ss - d);
        if d.abs() >= thr {
            last_over = k;
        }
    }
    let (a, b) = (last_over as f64 * step, ((last_over + 1) as f64 * step).min(t_end));
    let tau = if over(b) {
        b
    } else {
        bisect_last_crossing(&|t| form.deviation(t).abs() - thr, a, b)
    };
    Ok(ChargingReport {
        tau,
        n,
        e_ss: form.e_ss,
        e_max_transient: e_max,
        gamma_c: form.gamma_c,
        converged: true,
        horizon: t_end,
    })
}

/// Default horizon 20 max(4n/gamma, n gamma/(2 g^2), n g^2 gamma/F^4),
/// the last term only for F/g < 1.
pub fn default_horizon(g: f64, f: f64, gamma_c: f64, n: u32) -> f64 {
    let n = n as f64;
    let mut worst = (4.0 * n / gamma_c).max(n * gamma_c / (2.0 * g * g));
    if f < g && f > 0.0 {
        worst = worst.max(n * g * g * gamma_c / f.powi(4));
    }
    20.0 * worst
}
