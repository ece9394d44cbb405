//! Output-field sectors of the hierarchy and the waveguide photon density.
//!
//! The extended state holds four copies of the ADO vector, one per output
//! sector `[(0,0), (1,0), (0,1), (1,1)]`. Each copy evolves under the base
//! generator; for `t ≤ t_out` the sectors are driven by
//! `Y₁ = -Ω₊(t) [·] S` and `Y₂ = +Ω₋(t) S [·]`:
//!
//! `(1,0) += Y₁ (0,0)`, `(0,1) += Y₂ (0,0)`, `(1,1) += Y₁ (0,1) + Y₂ (1,0)`.
//!
//! The occupation of the output region is `n = -Tr ρ^{(1,1), 0}(t_out)`.

use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{BathOptions, FieldTable, SpectralDensityModel};
use crate::error::{Error, Result};
use crate::hierarchy::{initial_state, HeomGenerator};
use crate::mat2::Mat2;
use crate::ode::{self, OdeOptions, OdeStats, OdeSystem};
use crate::scalar::{Cplx, Real};

/// Where `Ω₊` comes from.
#[derive(Clone, Debug)]
pub enum FieldSource<T> {
    /// Closed form where available, otherwise quadrature.
    Model { model: SpectralDensityModel<T>, opts: BathOptions<T> },
    /// FFT-tabulated transform for linear-dispersion models.
    Table(FieldTable<T>),
    /// A single discrete mode `b` with `H_I = S g (b + b†)`: `Ω₊ = g e^{iω(t_out - t)}`.
    DiscreteMode { coupling: T, frequency: T },
}

impl<T: Real> FieldSource<T> {
    /// Whether occupations are reported per unit length (`n / Δx`).
    pub fn is_continuous(&self) -> bool {
        match self {
            FieldSource::Model { model, .. } => model.speed().is_some(),
            FieldSource::Table(_) => true,
            FieldSource::DiscreteMode { .. } => false,
        }
    }
}

/// Static output field at `(x_out, t_out)` integrated over `dx`.
///
/// For the cavity array `x_out` is the site index (`dx = 1`).
#[derive(Clone, Debug)]
pub struct OutputFieldPair<T> {
    pub x_out: T,
    pub t_out: T,
    pub dx: T,
    pub source: FieldSource<T>,
}

impl<T: Real> OutputFieldPair<T> {
    pub fn new(x_out: T, t_out: T, dx: T, source: FieldSource<T>) -> Result<Self> {
        if !(t_out >= T::zero()) || !(dx > T::zero()) || !x_out.is_finite() {
            return Err(Error::domain("output field", format!("need t_out >= 0, dx > 0 (t_out = {t_out}, dx = {dx})")));
        }
        Ok(OutputFieldPair { x_out, t_out, dx, source })
    }

    pub fn omega_plus(&self, t: T) -> Result<Cplx<T>> {
        match &self.source {
            FieldSource::Model { model, opts } => model.omega_plus(self.x_out, self.t_out, t, self.dx, opts),
            FieldSource::Table(table) => table.omega_plus(self.x_out, self.t_out, t, self.dx),
            FieldSource::DiscreteMode { coupling, frequency } => {
                if t > self.t_out {
                    return Err(Error::BeyondOutputTime {
                        t: t.to_f64().unwrap_or(f64::NAN),
                        t_out: self.t_out.to_f64().unwrap_or(f64::NAN),
                    });
                }
                Ok(Cplx::from_polar(*coupling, *frequency * (self.t_out - t)))
            }
        }
    }

    pub fn omega_minus(&self, t: T) -> Result<Cplx<T>> {
        Ok(self.omega_plus(t)?.conj())
    }

    /// Factor applied to `Ω±` so that sector `(1,1)` carries `n / Δx`
    /// directly; keeps the field sectors O(1) for small regions.
    fn density_scale(&self) -> T {
        if self.source.is_continuous() {
            T::one() / self.dx.sqrt()
        } else {
            T::one()
        }
    }
}

/// Linear action on the four-sector state.
pub struct IoGenerator<'a, T: Real> {
    base: &'a HeomGenerator<T>,
    pair: &'a OutputFieldPair<T>,
    scale: T,
    error: Mutex<Option<Error>>,
}

impl<'a, T: Real> IoGenerator<'a, T> {
    pub fn new(base: &'a HeomGenerator<T>, pair: &'a OutputFieldPair<T>) -> Self {
        IoGenerator { base, pair, scale: pair.density_scale(), error: Mutex::new(None) }
    }

    fn sector_len(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, h: &Mat2<T>, t: T, y: &[Cplx<T>], dy: &mut [Cplx<T>]) {
        let n = self.sector_len();
        for s in 0..4 {
            self.base.apply(h, &y[s * n..(s + 1) * n], &mut dy[s * n..(s + 1) * n]);
        }
        let wp = match self.pair.omega_plus(t) {
            Ok(v) => v * self.scale,
            Err(e) => {
                // poison the step; the integrator rejects it and eventually stops
                self.error.lock().expect("error slot").get_or_insert(e);
                dy.iter_mut().for_each(|v| *v = Cplx::new(T::nan(), T::nan()));
                return;
            }
        };
        let wm = wp.conj();
        let s = &self.base.system.coupling;
        let (y00, rest) = y.split_at(n);
        let (y10, rest) = rest.split_at(n);
        let y01 = &rest[..n];
        let (_, drest) = dy.split_at_mut(n);
        let (d10, drest) = drest.split_at_mut(n);
        let (d01, d11) = drest.split_at_mut(n);
        for a in (0..n).step_by(4) {
            let r00 = Mat2::from_slice(&y00[a..a + 4]);
            let r10 = Mat2::from_slice(&y10[a..a + 4]);
            let r01 = Mat2::from_slice(&y01[a..a + 4]);
            let add = |d: &mut [Cplx<T>], m: Mat2<T>| d.iter_mut().zip(m.0).for_each(|(x, v)| *x = *x + v);
            add(&mut d10[a..a + 4], (r00 * *s).scale(-wp));
            add(&mut d01[a..a + 4], (*s * r00).scale(wm));
            add(&mut d11[a..a + 4], (r01 * *s).scale(-wp) + (*s * r10).scale(wm));
        }
    }

    fn take_error(&self) -> Option<Error> {
        self.error.lock().expect("error slot").take()
    }
}

impl<T: Real> OdeSystem<T> for IoGenerator<'_, T> {
    fn dim(&self) -> usize {
        4 * self.sector_len()
    }

    fn rhs(&self, t: T, y: &[Cplx<T>], dy: &mut [Cplx<T>]) {
        self.apply(self.base.system.hamiltonian(t), t, y, dy)
    }

    fn rhs_on_segment(&self, t: T, mid: T, y: &[Cplx<T>], dy: &mut [Cplx<T>]) {
        self.apply(self.base.system.hamiltonian(mid), t, y, dy)
    }

    fn breakpoints(&self) -> Vec<T> {
        self.base.system.breakpoints()
    }
}

/// Four-sector state at `t_out`.
#[derive(Clone, Debug)]
pub struct IoState<T> {
    pub t_out: T,
    pub state: Vec<Cplx<T>>,
    pub stats: OdeStats,
}

impl<T: Real> IoState<T> {
    fn sector(&self, s: usize) -> &[Cplx<T>] {
        let n = self.state.len() / 4;
        &self.state[s * n..(s + 1) * n]
    }

    /// Reduced qubit state at `t_out` (sector `(0,0)`, index 0).
    pub fn reduced(&self) -> Mat2<T> {
        Mat2::from_slice(&self.sector(0)[..4])
    }
}

/// Propagates all four sectors from `ρ(0) = rho0` ⊗ vacuum to `t_out`.
pub fn propagate_io<T: Real>(
    base: &HeomGenerator<T>,
    pair: &OutputFieldPair<T>,
    rho0: &Mat2<T>,
    opts: &OdeOptions<T>,
) -> Result<IoState<T>> {
    let gen = IoGenerator::new(base, pair);
    let mut y = initial_state(base.len(), rho0);
    y.resize(4 * base.dim(), Cplx::new(T::zero(), T::zero()));
    let stats = match ode::integrate(&gen, T::zero(), &mut y, &[pair.t_out], opts, |_, _| {}) {
        Ok(s) => s,
        Err(f) => return Err(gen.take_error().unwrap_or(f.error)),
    };
    Ok(IoState { t_out: pair.t_out, state: y, stats })
}

/// Photon occupation of an output region.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhotonDensity<T> {
    /// `n / Δx` for continuous waveguides, `n` otherwise.
    pub density: T,
    /// Occupation `n` of the region.
    pub occupation: T,
    /// Imaginary part of the density, a convergence diagnostic.
    pub imag_residue: T,
}

/// `n = -Tr ρ^{(1,1), 0}(t_out)`, using the normalisation of `pair`.
pub fn photon_density<T: Real>(pair: &OutputFieldPair<T>, state: &IoState<T>) -> PhotonDensity<T> {
    let tr = -Mat2::from_slice(&state.sector(3)[..4]).trace();
    let scale = pair.density_scale();
    let occupation = tr.re / (scale * scale);
    if tr.im.abs() > T::lit(1e-4) * tr.re.abs() && tr.im.abs() > T::lit(1e-10) {
        log::warn!("photon density at x = {}, t = {} has imaginary residue {} (value {})", pair.x_out, pair.t_out, tr.im, tr.re);
    }
    PhotonDensity { density: tr.re, occupation, imag_residue: tr.im }
}

/// One entry of a density grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridPoint<T> {
    pub t_out: T,
    pub x_out: T,
    pub result: Option<PhotonDensity<T>>,
    pub rhs_evaluations: usize,
    pub error: Option<String>,
}

/// `n(x, t)` on a grid, row-major with `t` outer; failed points carry their
/// error and no value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityGrid<T> {
    pub xs: Vec<T>,
    pub ts: Vec<T>,
    pub points: Vec<GridPoint<T>>,
}

impl<T: Real> DensityGrid<T> {
    /// Density at `(t_i, x_j)`, NaN where the point failed.
    pub fn value(&self, i: usize, j: usize) -> T {
        self.points[i * self.xs.len() + j].result.map_or(T::nan(), |r| r.density)
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.xs.len()).map(|j| self.value(i, j)).collect()
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }
}

/// One independent io propagation per `(t, x)` point. `threads = 1` runs
/// serially; otherwise a dedicated pool of that size is used. The result
/// does not depend on the execution order.
pub fn density_grid<T: Real>(
    base: &HeomGenerator<T>,
    source: &FieldSource<T>,
    dx: T,
    xs: &[T],
    ts: &[T],
    rho0: &Mat2<T>,
    opts: &OdeOptions<T>,
    threads: usize,
) -> Result<DensityGrid<T>> {
    let jobs: Vec<(T, T)> = ts.iter().flat_map(|&t| xs.iter().map(move |&x| (t, x))).collect();
    let run = |&(t, x): &(T, T)| {
        let outcome =
            OutputFieldPair::new(x, t, dx, source.clone()).and_then(|pair| Ok((propagate_io(base, &pair, rho0, opts)?, pair)));
        match outcome {
            Ok((state, pair)) => GridPoint {
                t_out: t,
                x_out: x,
                result: Some(photon_density(&pair, &state)),
                rhs_evaluations: state.stats.rhs_evaluations,
                error: None,
            },
            Err(e) => {
                log::warn!("density grid point (t = {t}, x = {x}) failed: {e}");
                GridPoint { t_out: t, x_out: x, result: None, rhs_evaluations: 0, error: Some(e.to_string()) }
            }
        }
    };
    let points: Vec<GridPoint<T>> = if threads <= 1 {
        jobs.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidModel(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    };
    Ok(DensityGrid { xs: xs.to_vec(), ts: ts.to_vec(), points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{HeomCoefficients, HeomMode};
    use crate::hierarchy::SystemModel;

    fn c(re: f64, im: f64) -> Cplx<f64> {
        Cplx::new(re, im)
    }

    fn uncoupled() -> HeomGenerator<f64> {
        let co = HeomCoefficients { modes: vec![HeomMode { rate: c(1.0, 0.0), c_r: c(1e-300, 0.0), c_i: c(0.0, 0.0) }] };
        HeomGenerator::new(SystemModel::qubit(1.0), co, 2, 100).unwrap()
    }

    fn tight() -> OdeOptions<f64> {
        OdeOptions { abs_tol: 1e-12, rel_tol: 1e-10, ..Default::default() }
    }

    #[test]
    fn no_field_no_photons() {
        let base = uncoupled();
        let pair = OutputFieldPair::new(0.0, 5.0, 1.0, FieldSource::DiscreteMode { coupling: 0.0, frequency: 1.0 }).unwrap();
        let st = propagate_io(&base, &pair, &Mat2::excited(), &tight()).unwrap();
        assert!(st.state[base.dim()..].iter().all(|v| v.norm() == 0.0));
        assert_eq!(photon_density(&pair, &st).density, 0.0);
    }

    #[test]
    fn zero_output_time_is_empty() {
        let base = uncoupled();
        let pair = OutputFieldPair::new(0.0, 0.0, 1.0, FieldSource::DiscreteMode { coupling: 0.3, frequency: 1.0 }).unwrap();
        let st = propagate_io(&base, &pair, &Mat2::excited(), &tight()).unwrap();
        assert_eq!(photon_density(&pair, &st).density, 0.0);
    }

    /// Without bath memory the double drive gives the lowest-order emission
    /// `n = |∫₀^{t_out} Ω₊(t) e^{iω_s t} dt|²` from the excited state.
    #[test]
    fn uncoupled_base_gives_lowest_order_emission() {
        let base = uncoupled();
        let (g, w, t_out) = (0.2, 0.7, 6.0);
        let pair = OutputFieldPair::new(0.0, t_out, 1.0, FieldSource::DiscreteMode { coupling: g, frequency: w }).unwrap();
        let st = propagate_io(&base, &pair, &Mat2::excited(), &tight()).unwrap();
        let n = photon_density(&pair, &st);
        // ∫ g e^{iω(t_out - t)} e^{iω_s t} dt
        let d = 1.0 - w;
        let amp = c(0.0, w * t_out).exp() * ((c(0.0, d * t_out).exp() - 1.0) / c(0.0, d)) * g;
        assert!((n.density - amp.norm_sqr()).abs() < 1e-9, "{} vs {}", n.density, amp.norm_sqr());
        assert!(n.imag_residue.abs() < 1e-10);
    }

    #[test]
    fn beyond_output_time_is_rejected() {
        let pair = OutputFieldPair::new(0.0, 1.0, 1.0, FieldSource::DiscreteMode { coupling: 0.1, frequency: 1.0 }).unwrap();
        assert!(matches!(pair.omega_plus(1.5), Err(Error::BeyondOutputTime { .. })));
        assert_eq!(pair.omega_minus(0.3).unwrap(), pair.omega_plus(0.3).unwrap().conj());
    }

    #[test]
    fn base_sector_is_untouched_by_outputs() {
        let co = HeomCoefficients::from_discrete_modes(&[0.15], &[1.1]);
        let base = HeomGenerator::new(SystemModel::qubit(1.0), co, 3, 100).unwrap();
        let pair = OutputFieldPair::new(0.0, 4.0, 1.0, FieldSource::DiscreteMode { coupling: 0.15, frequency: 1.1 }).unwrap();
        let st = propagate_io(&base, &pair, &Mat2::excited(), &tight()).unwrap();
        let plain = crate::hierarchy::propagate(&base, &Mat2::excited(), &[4.0], &tight());
        assert!((st.reduced() - plain.states[0]).max_abs() < 1e-9);
    }

    #[test]
    fn grid_is_order_independent() {
        let co = HeomCoefficients::from_discrete_modes(&[0.15], &[1.1]);
        let base = HeomGenerator::new(SystemModel::qubit(1.0), co, 2, 100).unwrap();
        let model = SpectralDensityModel::ohmic(0.05, 2.0, 1.0);
        let src = FieldSource::Model { model, opts: BathOptions::default() };
        let xs = [-1.0f64, 0.0, 1.0];
        let ts = [1.0, 2.0];
        let a = density_grid(&base, &src, 0.05, &xs, &ts, &Mat2::excited(), &OdeOptions::default(), 1).unwrap();
        let b = density_grid(&base, &src, 0.05, &xs, &ts, &Mat2::excited(), &OdeOptions::default(), 3).unwrap();
        assert_eq!(a.failures(), 0);
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p.result.unwrap().density.to_bits(), q.result.unwrap().density.to_bits());
        }
        assert!((a.value(1, 0) - a.value(1, 2)).abs() < 1e-12);
    }

    #[test]
    fn failed_points_are_recorded() {
        let base = uncoupled();
        let src = FieldSource::Model { model: SpectralDensityModel::cavity_array(0.2, 0.4, 1.0), opts: BathOptions { bessel_order_cap: 3, ..Default::default() } };
        let g = density_grid(&base, &src, 1.0, &[0.0, 5.0], &[1.0], &Mat2::excited(), &OdeOptions::default(), 1).unwrap();
        assert_eq!(g.failures(), 1);
        assert!(g.value(0, 1).is_nan() && g.value(0, 0).is_finite());
        assert!(g.points[1].error.as_deref().unwrap().contains("Bessel"));
    }
}
