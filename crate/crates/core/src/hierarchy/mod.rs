//! Hierarchical equations of motion for a qubit in a Gaussian bath.

mod generator;
mod index;
mod system;

use std::io::Write;

pub use generator::HeomGenerator;
pub use index::{binomial, HierarchyIndexSet};
pub use system::{HamiltonianSegment, SystemModel};

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::ode::{self, OdeOptions, OdeStats, OdeSystem};
use crate::scalar::{Cplx, Real};

impl<T: Real> OdeSystem<T> for HeomGenerator<T> {
    fn dim(&self) -> usize {
        HeomGenerator::dim(self)
    }

    fn rhs(&self, t: T, y: &[Cplx<T>], dy: &mut [Cplx<T>]) {
        self.apply(self.system.hamiltonian(t), y, dy)
    }

    fn rhs_on_segment(&self, _t: T, mid: T, y: &[Cplx<T>], dy: &mut [Cplx<T>]) {
        self.apply(self.system.hamiltonian(mid), y, dy)
    }

    fn breakpoints(&self) -> Vec<T> {
        self.system.breakpoints()
    }
}

/// Flat vector of auxiliary density operators, zero except for `ρ^0`.
pub fn initial_state<T: Real>(len: usize, rho0: &Mat2<T>) -> Vec<Cplx<T>> {
    let mut y = vec![Cplx::new(T::zero(), T::zero()); 4 * len];
    y[..4].copy_from_slice(&rho0.0);
    y
}

/// Reduced density matrix at each output time.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Mat2<T>>,
    pub stats: OdeStats,
    /// Full ADO vector at the last time reached.
    pub final_state: Vec<Cplx<T>>,
    /// Set when the integrator stopped early; `times` then holds what was reached.
    pub failure: Option<Error>,
}

impl<T: Real> Trajectory<T> {
    /// `⟨op⟩(t)`; the imaginary residue is dropped.
    pub fn expectation(&self, op: &Mat2<T>) -> Vec<T> {
        self.states.iter().map(|r| op.expect(r).re).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Propagates from `ρ(0) = rho0` with no initial bath correlations and
/// records `ρ^0` at `times`. On solver failure the partial trajectory is
/// returned with `failure` set.
pub fn propagate<T: Real>(gen: &HeomGenerator<T>, rho0: &Mat2<T>, times: &[T], opts: &OdeOptions<T>) -> Trajectory<T> {
    let mut y = initial_state(gen.len(), rho0);
    let mut out_t = Vec::with_capacity(times.len());
    let mut states = Vec::with_capacity(times.len());
    let res = ode::integrate(gen, T::zero(), &mut y, times, opts, |t, s| {
        out_t.push(t);
        states.push(Mat2::from_slice(&s[..4]));
    });
    let (stats, failure) = match res {
        Ok(s) => (s, None),
        Err(f) => {
            log::warn!("HEOM propagation stopped at t = {}: {}", f.reached, f.error);
            (f.stats, Some(f.error))
        }
    };
    Trajectory { times: out_t, states, stats, final_state: y, failure }
}

/// Earliest sample time `t_i` such that every trailing window of `window`
/// samples starting at or after `i` has `(max - min) / |mean| < rel_tol`.
pub fn steady_state_detect<T: Real>(times: &[T], series: &[T], rel_tol: T, window: usize) -> Option<T> {
    let n = series.len().min(times.len());
    if window == 0 || window > n {
        return None;
    }
    let settled = |i: usize| {
        let w = &series[i..i + window];
        let (lo, hi) = w.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let mean = w.iter().copied().sum::<T>() / T::from_count(window);
        hi - lo < rel_tol * mean.abs()
    };
    let mut start = None;
    for i in (0..=n - window).rev() {
        if settled(i) {
            start = Some(i);
        } else {
            break;
        }
    }
    start.map(|i| times[i])
}

/// Writes `# key: value` header lines followed by a CSV header and rows.
pub fn write_csv<W: Write, T: Real>(
    mut w: W,
    meta: &[(&str, String)],
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<T>>,
) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}").map_err(io)?;
    }
    writeln!(w, "{}", columns.join(",")).map_err(io)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}
