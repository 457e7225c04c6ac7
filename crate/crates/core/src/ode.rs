//! Dormand–Prince 5(4) integrator with PI step control and dense output.
//!
//! The state is a flat slice of real or complex scalars. Output is produced
//! through a callback at the requested times by the fourth-order continuous
//! extension, so the step size never has to hit the output grid.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Scalar types the integrator can carry.
pub trait OdeScalar:
    Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn modulus(self) -> f64;
}

impl OdeScalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` picks one from the local Lipschitz estimate.
    pub h0: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            h0: None,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest correction reported by the post-step hook.
    pub max_post_step_drift: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;

fn error_norm<T: OdeScalar>(err: &[T], y0: &[T], y1: &[T], rtol: f64, atol: f64) -> f64 {
    let mut acc = 0.0;
    for ((e, a), b) in err.iter().zip(y0).zip(y1) {
        let sc = atol + rtol * a.modulus().max(b.modulus());
        let r = e.modulus() / sc;
        acc += r * r;
    }
    (acc / err.len().max(1) as f64).sqrt()
}

fn initial_step<T: OdeScalar, F: FnMut(f64, &[T], &mut [T])>(
    rhs: &mut F,
    t0: f64,
    y0: &[T],
    f0: &[T],
    span: f64,
    opts: &OdeOptions,
) -> f64 {
    let n = y0.len();
    let scale = |v: &T, y: &T| v.modulus() / (opts.atol + opts.rtol * y.modulus());
    let rms = |it: &mut dyn Iterator<Item = f64>| (it.map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let d0 = rms(&mut y0.iter().zip(y0).map(|(y, s)| scale(y, s)));
    let d1 = rms(&mut f0.iter().zip(y0).map(|(f, s)| scale(f, s)));
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span).min(opts.h_max);
    let y1: Vec<T> = y0.iter().zip(f0).map(|(&y, &f)| y + f * h0).collect();
    let mut f1 = vec![T::default(); n];
    rhs(t0 + h0, &y1, &mut f1);
    let d2 = rms(&mut f1.iter().zip(f0).zip(y0).map(|((a, b), s)| scale(&(*a - *b), s))) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).min(opts.h_max)
}

/// Integrates `y' = rhs(t, y)` from `t0`, calling `observe(k, t_out[k], y)` at
/// each requested output time. `post_step` may modify the state after every
/// accepted step and returns the size of its correction.
pub fn dopri5<T, F, P, O>(
    mut rhs: F,
    t0: f64,
    y0: &[T],
    t_out: &[f64],
    opts: &OdeOptions,
    mut post_step: P,
    mut observe: O,
) -> Result<OdeStats>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
    P: FnMut(&mut [T]) -> f64,
    O: FnMut(usize, f64, &[T]) -> Result<()>,
{
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(invalid("tolerance", "rtol and atol must be positive"));
    }
    for w in t_out.windows(2) {
        if w[1] <= w[0] {
            return Err(invalid("t_grid", "output times must be strictly increasing"));
        }
    }
    if let Some(&first) = t_out.first() {
        if first < t0 {
            return Err(invalid("t_grid", "output times must not precede the start time"));
        }
    }

    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut y: Vec<T> = y0.to_vec();
    let mut next_out = 0usize;
    while next_out < t_out.len() && t_out[next_out] == t0 {
        observe(next_out, t0, &y)?;
        next_out += 1;
    }
    if next_out == t_out.len() {
        return Ok(stats);
    }
    let t_end = *t_out.last().unwrap();
    let span = t_end - t0;

    let mut k1 = vec![T::default(); n];
    let mut k2 = vec![T::default(); n];
    let mut k3 = vec![T::default(); n];
    let mut k4 = vec![T::default(); n];
    let mut k5 = vec![T::default(); n];
    let mut k6 = vec![T::default(); n];
    let mut k7 = vec![T::default(); n];
    let mut ytmp = vec![T::default(); n];
    let mut ynew = vec![T::default(); n];
    let mut err = vec![T::default(); n];
    let mut r5 = vec![T::default(); n];
    let mut dense = vec![T::default(); n];

    rhs(t0, &y, &mut k1);
    stats.rhs_evals += 1;
    let mut h = match opts.h0 {
        Some(h) => h.min(span),
        None => {
            stats.rhs_evals += 1;
            initial_step(&mut rhs, t0, &y, &k1, span, opts)
        }
    };
    let mut t = t0;
    let mut facold = 1e-4f64;
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: opts.max_steps,
                t_last: t,
            });
        }
        if h.abs() <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t_last: t });
        }
        let last = t + h * 1.01 >= t_end;
        if last {
            h = t_end - t;
        }

        for i in 0..n {
            ytmp[i] = y[i] + k1[i] * (h * A21);
        }
        rhs(t + C2 * h, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        rhs(t + C3 * h, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        rhs(t + C4 * h, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        rhs(t + C5 * h, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] =
                y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        rhs(t + h, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] =
                y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        rhs(t + h, &ynew, &mut k7);
        stats.rhs_evals += 6;

        for i in 0..n {
            err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        let e = error_norm(&err, &y, &ynew, opts.rtol, opts.atol);
        if !e.is_finite() {
            stats.rejected += 1;
            h *= 0.1;
            last_rejected = true;
            continue;
        }
        let fac11 = e.powf(EXPO1);

        if e <= 1.0 {
            stats.accepted += 1;
            let t_new = t + h;
            let mut r5_ready = false;
            // continuous extension on [t, t + h]
            while next_out < t_out.len() && t_out[next_out] <= t_new + 1e-12 * t_new.abs().max(1.0) {
                let tq = t_out[next_out];
                if (tq - t_new).abs() <= 1e-12 * t_new.abs().max(1.0) || (last && next_out + 1 == t_out.len()) {
                    dense.copy_from_slice(&ynew);
                } else {
                    if !r5_ready {
                        for i in 0..n {
                            r5[i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
                        }
                        r5_ready = true;
                    }
                    let th = (tq - t) / h;
                    let th1 = 1.0 - th;
                    for i in 0..n {
                        let ydiff = ynew[i] - y[i];
                        let bspl = k1[i] * h - ydiff;
                        let r4 = ydiff - k7[i] * h - bspl;
                        dense[i] = y[i] + (ydiff + (bspl + (r4 + r5[i] * th1) * th) * th1) * th;
                    }
                }
                observe(next_out, tq, &dense)?;
                next_out += 1;
            }
            std::mem::swap(&mut y, &mut ynew);
            let drift = post_step(&mut y);
            stats.max_post_step_drift = stats.max_post_step_drift.max(drift);
            if drift > 0.0 {
                rhs(t_new, &y, &mut k1);
                stats.rhs_evals += 1;
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            t = t_new;
            if last || next_out >= t_out.len() {
                return Ok(stats);
            }
            let mut fac = fac11 / facold.powf(BETA);
            fac = (fac / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = (h / fac).min(opts.h_max);
            if last_rejected {
                h_new = h_new.min(h);
            }
            facold = e.max(1e-4);
            last_rejected = false;
            h = h_new;
        } else {
            stats.rejected += 1;
            h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
}

/// Convenience wrapper returning the states at every output time.
pub fn dopri5_collect<T, F>(
    rhs: F,
    t0: f64,
    y0: &[T],
    t_out: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<Vec<T>>, OdeStats)>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
{
    let mut out = Vec::with_capacity(t_out.len());
    let stats = dopri5(rhs, t0, y0, t_out, opts, |_| 0.0, |_, _, y| {
        out.push(y.to_vec());
        Ok(())
    })?;
    Ok((out, stats))
}
