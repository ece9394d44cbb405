use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::SpectralDensityModel;

/// Spectral density given on a strictly increasing frequency grid, linearly
/// interpolated and zero outside the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedDensity<T> {
    pub omega: Vec<T>,
    pub j: Vec<T>,
    /// Propagation speed of the (linear) waveguide.
    pub c: T,
}

impl<T: Real> TabulatedDensity<T> {
    pub fn new(omega: Vec<T>, j: Vec<T>, c: T) -> Result<Self> {
        let t = TabulatedDensity { omega, j, c };
        t.validate()?;
        Ok(t)
    }

    /// Samples `model` on `n` uniform points of `[lo, hi]`.
    pub fn sample(model: &SpectralDensityModel<T>, lo: T, hi: T, n: usize, c: T) -> Result<Self> {
        let omega: Vec<T> = (0..n).map(|k| lo + (hi - lo) * T::from_count(k) / T::from_count(n - 1)).collect();
        let j = omega.iter().map(|&w| model.eval_j(w)).collect::<Result<Vec<_>>>()?;
        Self::new(omega, j, c)
    }

    /// Reads a two-column `(ω, J)` text file. Columns may be separated by
    /// whitespace or commas; blank lines and `#` comments are skipped.
    pub fn read(path: &Path, c: T) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text, c).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, c: T) -> Result<Self> {
        let mut omega = Vec::new();
        let mut j = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let cols: Vec<&str> = body.split(|ch: char| ch == ',' || ch.is_whitespace()).filter(|s| !s.is_empty()).collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected two columns, found {}", lineno + 1, cols.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::Parse(format!("line {}: {s:?}: {e}", lineno + 1)))
            };
            omega.push(num(cols[0])?);
            j.push(num(cols[1])?);
        }
        Self::new(omega, j, c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.len() < 2 || self.omega.len() != self.j.len() {
            return Err(Error::InvalidModel("tabulated density needs at least two (omega, J) rows".into()));
        }
        if !(self.c > T::zero()) {
            return Err(Error::InvalidModel(format!("c must be positive, got {}", self.c)));
        }
        if self.omega[0] < T::zero() {
            return Err(Error::InvalidModel("tabulated frequencies must be non-negative".into()));
        }
        for (k, w) in self.omega.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidModel(format!("frequencies not strictly increasing at row {}", k + 2)));
            }
        }
        if let Some(bad) = self.j.iter().position(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidModel(format!("J must be finite and non-negative (row {})", bad + 1)));
        }
        Ok(())
    }

    pub fn eval(&self, omega: T) -> T {
        let w = &self.omega;
        if omega < w[0] || omega > w[w.len() - 1] {
            return T::zero();
        }
        let k = w.partition_point(|&x| x <= omega).clamp(1, w.len() - 1);
        let s = (omega - w[k - 1]) / (w[k] - w[k - 1]);
        self.j[k - 1] + (self.j[k] - self.j[k - 1]) * s
    }

    /// Peak location and a resolution width (smallest grid spacing).
    pub(crate) fn feature(&self) -> (T, T) {
        let (imax, _) = self
            .j
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let spacing = self.omega.windows(2).map(|w| w[1] - w[0]).fold(T::infinity(), T::min);
        (self.omega[imax], spacing)
    }
}
