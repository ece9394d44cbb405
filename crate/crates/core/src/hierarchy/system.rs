use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::scalar::{Cplx, Real};

/// A Hamiltonian held constant from `start` until the next segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSegment<T> {
    pub start: T,
    pub h: Mat2<T>,
}

/// Qubit with a piecewise-constant Hamiltonian and a fixed coupling operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemModel<T> {
    pub omega_s: T,
    pub coupling: Mat2<T>,
    /// Sorted by `start`; the first segment also covers all earlier times.
    pub segments: Vec<HamiltonianSegment<T>>,
}

impl<T: Real> SystemModel<T> {
    /// `H = (ω_s/2) σ_z`, coupled through `σ_x`.
    pub fn qubit(omega_s: T) -> Self {
        let h = Mat2::sigma_z().scale(Cplx::new(omega_s * T::lit(0.5), T::zero()));
        SystemModel { omega_s, coupling: Mat2::sigma_x(), segments: vec![HamiltonianSegment { start: T::zero(), h }] }
    }

    /// Raises the qubit splitting by `factor` at `t_q`:
    /// `H(t) = (ω_s/2) q(t) σ_z`, `q = 1` before and `factor` after.
    pub fn with_quench(mut self, t_q: T, factor: T) -> Self {
        let h = Mat2::sigma_z().scale(Cplx::new(self.omega_s * factor * T::lit(0.5), T::zero()));
        self.segments.push(HamiltonianSegment { start: t_q, h });
        self
    }

    pub fn validate(&self) -> Result<()> {
        let herm = |m: &Mat2<T>| (*m - m.dagger()).max_abs() <= T::lit(1e-12) * m.max_abs().max(T::one());
        if !herm(&self.coupling) {
            return Err(Error::InvalidModel("coupling operator must be Hermitian".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::InvalidModel("at least one Hamiltonian segment is required".into()));
        }
        for w in self.segments.windows(2) {
            if !(w[1].start > w[0].start) {
                return Err(Error::InvalidModel("Hamiltonian segments must have increasing start times".into()));
            }
        }
        if let Some(s) = self.segments.iter().find(|s| !herm(&s.h)) {
            return Err(Error::InvalidModel(format!("Hamiltonian starting at t = {} is not Hermitian", s.start)));
        }
        Ok(())
    }

    /// Hamiltonian in force at `t` (right-continuous at breakpoints).
    pub fn hamiltonian(&self, t: T) -> &Mat2<T> {
        let k = self.segments.partition_point(|s| s.start <= t);
        &self.segments[k.saturating_sub(1)].h
    }

    /// Times where the Hamiltonian jumps.
    pub fn breakpoints(&self) -> Vec<T> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quench_schedule() {
        let s = SystemModel::qubit(1.0).with_quench(30.0, 20.0);
        s.validate().unwrap();
        assert_eq!(s.hamiltonian(10.0).0[0].re, 0.5);
        assert_eq!(s.hamiltonian(30.0).0[0].re, 10.0);
        assert_eq!(s.hamiltonian(-1.0).0[0].re, 0.5);
        assert_eq!(s.breakpoints(), vec![30.0]);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut s = SystemModel::qubit(1.0);
        s.coupling = Mat2::sigma_x() + Mat2::sigma_y().scale(Cplx::new(0.0, 1.0));
        assert!(s.validate().is_err());
    }
}
