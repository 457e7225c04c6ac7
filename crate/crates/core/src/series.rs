//! Time series of observables on a common time grid.

use indexmap::IndexMap;

use crate::error::{invalid, Error, Result};
use crate::opalg::ComplexMatrix;

pub const ENERGY: &str = "energy";
pub const ERGOTROPY: &str = "ergotropy";
pub const ENTROPY: &str = "entropy";
/// <sigma^z_B> for a two-level battery.
pub const SZ_B: &str = "sz_b";
/// Real and imaginary parts of <sigma^-_B> (two-level) or <a_B> (oscillator).
pub const RE_LOWER_B: &str = "re_lower_b";
pub const IM_LOWER_B: &str = "im_lower_b";
/// <a^dag a> of an oscillator battery.
pub const N_B: &str = "n_b";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    /// Observable columns in insertion order.
    pub columns: IndexMap<String, Vec<f64>>,
    /// Standard errors, keyed like `columns`, for sampled estimates.
    pub errors: IndexMap<String, Vec<f64>>,
    /// Free-form run metadata.
    pub meta: IndexMap<String, String>,
    /// Full states, when requested.
    pub states: Option<Vec<ComplexMatrix>>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        check_grid(&times)?;
        Ok(Self {
            times,
            ..Self::default()
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::DimMismatch {
                expected: self.times.len(),
                found: values.len(),
            });
        }
        self.columns.insert(name.into(), values);
        Ok(())
    }

    pub fn insert_error(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::DimMismatch {
                expected: self.times.len(),
                found: values.len(),
            });
        }
        self.errors.insert(name.into(), values);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(|v| v.as_slice())
    }

    pub fn error(&self, name: &str) -> Option<&[f64]> {
        self.errors.get(name).map(|v| v.as_slice())
    }

    /// Column lookup that fails with a descriptive error.
    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| Error::Incompatible(format!("series has no column '{name}'")))
    }

    pub fn energy(&self) -> Result<&[f64]> {
        self.require(ENERGY)
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        self.column(name).and_then(|c| c.last().copied())
    }

    /// Mean of a column over the final `fraction` of the time span.
    pub fn tail_mean(&self, name: &str, fraction: f64) -> Result<f64> {
        let col = self.require(name)?;
        let t_end = *self.times.last().ok_or_else(|| invalid("series", "empty"))?;
        let t0 = self.times[0];
        let cut = t_end - fraction * (t_end - t0);
        let vals: Vec<f64> = self
            .times
            .iter()
            .zip(col)
            .filter(|(t, _)| **t >= cut)
            .map(|(_, v)| *v)
            .collect();
        Ok(vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Linear interpolation of a column at time `t` inside the grid.
    pub fn interp(&self, name: &str, t: f64) -> Result<f64> {
        let col = self.require(name)?;
        let k = self.times.partition_point(|&x| x < t);
        if k == 0 {
            return Ok(col[0]);
        }
        if k >= self.times.len() {
            return Ok(col[col.len() - 1]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        Ok(col[k - 1] * (1.0 - w) + col[k] * w)
    }
}

pub fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(invalid("t_grid", "empty time grid"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(invalid("t_grid", "non-finite time"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("t_grid", "times must be strictly increasing"));
    }
    Ok(())
}

/// `n` evenly spaced points on [a, b].
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    b
                } else {
                    a + (b - a) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// `n` log-spaced points with endpoints `a` and `b` (values, not exponents).
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > 0.0, "logspace endpoints must be positive");
    let (la, lb) = (a.ln(), b.ln());
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| {
                if k == 0 {
                    a
                } else if k == n - 1 {
                    b
                } else {
                    (la + (lb - la) * k as f64 / (n - 1) as f64).exp()
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(linspace(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let l = logspace(0.01, 100.0, 5);
        assert_eq!(l[0], 0.01);
        assert_eq!(l[4], 100.0);
        assert!((l[2] - 1.0).abs() < 1e-14);
        assert_eq!(logspace(0.01, 100.0, 60).len(), 60);
    }

    #[test]
    fn rejects_non_monotone_times() {
        assert!(TimeSeries::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeSeries::new(vec![]).is_err());
    }

    #[test]
    fn column_length_checked() {
        let mut s = TimeSeries::new(vec![0.0, 1.0]).unwrap();
        assert!(s.insert(ENERGY, vec![1.0]).is_err());
        s.insert(ENERGY, vec![1.0, 3.0]).unwrap();
        assert_eq!(s.interp(ENERGY, 0.25).unwrap(), 1.5);
        assert_eq!(s.tail_mean(ENERGY, 0.1).unwrap(), 3.0);
    }
}
