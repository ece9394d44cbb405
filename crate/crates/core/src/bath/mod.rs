//! Spectral densities, dispersion relations and every bath-side function
//! the hierarchy needs: `J(ω)`, `C(t)`, `g(p)`, `g(x)` and `Ω±`.

mod correlation;
mod field;
mod tabulated;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};
use crate::scalar::{Cplx, Real};
use crate::special::bessel_k0;

pub use correlation::CorrelationKernel;
pub use field::FieldTable;
pub use tabulated::TabulatedDensity;

/// Bath-side numerical settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathOptions<T> {
    /// Absolute tolerance of frequency quadratures.
    pub abs_tol: T,
    pub rel_tol: T,
    /// Semi-infinite integrals stop where `J < truncation * max J`.
    pub truncation: T,
    /// Largest site index accepted by the cavity-array Bessel forms.
    pub bessel_order_cap: i64,
}

impl<T: Real> Default for BathOptions<T> {
    fn default() -> Self {
        BathOptions { abs_tol: T::lit(1e-11), rel_tol: T::lit(1e-10), truncation: T::lit(1e-12), bessel_order_cap: 2000 }
    }
}

impl<T: Real> BathOptions<T> {
    pub(crate) fn quad(&self) -> QuadOptions<T> {
        QuadOptions { abs_tol: self.abs_tol, rel_tol: self.rel_tol, max_intervals: 400_000 }
    }
}

/// Dispersion relation `ω̄(p)` of the waveguide.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DispersionModel<T> {
    /// `ω̄(p) = c|p|`.
    Linear { c: T },
    /// `ω̄(p) = Ω + 2 g_c cos p` on `p ∈ [-π, π)`.
    CosineBand { omega: T, gc: T },
}

impl<T: Real> DispersionModel<T> {
    pub fn eval(&self, p: T) -> T {
        match *self {
            DispersionModel::Linear { c } => c * p.abs(),
            DispersionModel::CosineBand { omega, gc } => omega + T::lit(2.0) * gc * p.cos(),
        }
    }

    /// Frequency range covered by the dispersion.
    pub fn range(&self) -> (T, T) {
        match *self {
            DispersionModel::Linear { .. } => (T::zero(), T::infinity()),
            DispersionModel::CosineBand { omega, gc } => (omega - T::lit(2.0) * gc, omega + T::lit(2.0) * gc),
        }
    }

    /// Largest group velocity `|dω̄/dp|`.
    pub fn max_group_velocity(&self) -> T {
        match *self {
            DispersionModel::Linear { c } => c,
            DispersionModel::CosineBand { gc, .. } => T::lit(2.0) * gc,
        }
    }
}

/// Spectral density families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralDensityModel<T> {
    /// `J(ω) = λ ω e^{-ω/ω_c}`, linear dispersion.
    OhmicExp { lambda: T, omega_c: T, c: T },
    /// `J(ω) = λ² Γ ω / ((ω_0² - ω²)² + Γ² ω²)`, linear dispersion.
    /// `narrow_bath` switches `g(x)` to the Lorentzian closed form.
    UnderdampedBrownian {
        lambda: T,
        gamma: T,
        omega_0: T,
        c: T,
        #[serde(default)]
        narrow_bath: bool,
    },
    /// Point-coupled cavity array with cosine band.
    CavityArray { g0: T, gc: T, omega: T },
    /// Linearly interpolated samples, linear dispersion.
    Tabulated(TabulatedDensity<T>),
}

impl<T: Real> SpectralDensityModel<T> {
    pub fn ohmic(lambda: T, omega_c: T, c: T) -> Self {
        SpectralDensityModel::OhmicExp { lambda, omega_c, c }
    }

    pub fn underdamped(lambda: T, gamma: T, omega_0: T, c: T) -> Self {
        SpectralDensityModel::UnderdampedBrownian { lambda, gamma, omega_0, c, narrow_bath: false }
    }

    pub fn cavity_array(g0: T, gc: T, omega: T) -> Self {
        SpectralDensityModel::CavityArray { g0, gc, omega }
    }

    /// Checks the positivity invariants of the parameters.
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            SpectralDensityModel::OhmicExp { lambda, omega_c, c } => {
                check("lambda", *lambda)?;
                check("omega_c", *omega_c)?;
                check("c", *c)
            }
            SpectralDensityModel::UnderdampedBrownian { lambda, gamma, omega_0, c, .. } => {
                check("lambda", *lambda)?;
                check("gamma", *gamma)?;
                check("omega_0", *omega_0)?;
                check("c", *c)
            }
            SpectralDensityModel::CavityArray { g0, gc, omega } => {
                check("g0", *g0)?;
                check("gc", *gc)?;
                check("omega", *omega)?;
                if *omega <= T::lit(2.0) * *gc {
                    return Err(Error::InvalidModel(format!(
                        "band [{}, {}] must lie at positive frequency",
                        *omega - T::lit(2.0) * *gc,
                        *omega + T::lit(2.0) * *gc
                    )));
                }
                Ok(())
            }
            SpectralDensityModel::Tabulated(t) => t.validate(),
        }
    }

    pub fn dispersion(&self) -> DispersionModel<T> {
        match self {
            SpectralDensityModel::OhmicExp { c, .. } | SpectralDensityModel::UnderdampedBrownian { c, .. } => {
                DispersionModel::Linear { c: *c }
            }
            SpectralDensityModel::Tabulated(t) => DispersionModel::Linear { c: t.c },
            SpectralDensityModel::CavityArray { gc, omega, .. } => DispersionModel::CosineBand { omega: *omega, gc: *gc },
        }
    }

    /// Propagation speed for linear-dispersion models.
    pub fn speed(&self) -> Option<T> {
        match self.dispersion() {
            DispersionModel::Linear { c } => Some(c),
            DispersionModel::CosineBand { .. } => None,
        }
    }

    /// Spectral density `J(ω)`; zero outside the support.
    pub fn eval_j(&self, omega: T) -> Result<T> {
        if omega <= T::zero() && !matches!(self, SpectralDensityModel::CavityArray { .. }) {
            return Ok(T::zero());
        }
        Ok(match self {
            SpectralDensityModel::OhmicExp { lambda, omega_c, .. } => *lambda * omega * (-omega / *omega_c).exp(),
            SpectralDensityModel::UnderdampedBrownian { lambda, gamma, omega_0, .. } => {
                let d = *omega_0 * *omega_0 - omega * omega;
                *lambda * *lambda * *gamma * omega / (d * d + *gamma * *gamma * omega * omega)
            }
            SpectralDensityModel::CavityArray { g0, gc, omega: centre } => {
                let u = (omega - *centre) / (T::lit(2.0) * *gc);
                let slack = T::lit(8.0) * T::epsilon();
                if u.abs() > T::one() + slack {
                    T::zero()
                } else if T::one() - u * u <= slack {
                    return Err(Error::BandEdge { omega: omega.to_f64().unwrap_or(f64::NAN) });
                } else {
                    *g0 * *g0 / (T::lit(2.0) * *gc * (T::one() - u * u).sqrt())
                }
            }
            SpectralDensityModel::Tabulated(t) => t.eval(omega),
        })
    }

    /// Upper frequency where semi-infinite integrals are truncated.
    pub fn omega_max(&self, opts: &BathOptions<T>) -> T {
        match self {
            SpectralDensityModel::CavityArray { .. } => self.dispersion().range().1,
            SpectralDensityModel::Tabulated(t) => *t.omega.last().expect("validated table"),
            _ => {
                let (centre, width) = self.feature();
                let peak = self.eval_j(centre.max(width)).unwrap_or(T::zero());
                let peak = peak.max(self.eval_j(centre + width).unwrap_or(T::zero()));
                let target = opts.truncation * peak;
                let mut hi = (centre + width).max(T::one());
                while self.eval_j(hi).unwrap_or(T::zero()) > target && hi < T::lit(1e12) {
                    hi = hi * T::lit(2.0);
                }
                let mut lo = hi / T::lit(2.0);
                for _ in 0..60 {
                    let mid = T::lit(0.5) * (lo + hi);
                    if self.eval_j(mid).unwrap_or(T::zero()) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Location and width of the dominant spectral feature.
    fn feature(&self) -> (T, T) {
        match self {
            SpectralDensityModel::OhmicExp { omega_c, .. } => (*omega_c, *omega_c * T::lit(0.5)),
            SpectralDensityModel::UnderdampedBrownian { gamma, omega_0, .. } => (*omega_0, *gamma * T::lit(0.5)),
            SpectralDensityModel::CavityArray { gc, omega, .. } => (*omega, *gc),
            SpectralDensityModel::Tabulated(t) => t.feature(),
        }
    }

    /// Panel break points on `[lo, hi]` resolving the spectral feature and
    /// an oscillation `e^{iωs}`: panels are at most half a period wide and
    /// widen geometrically away from the feature.
    pub(crate) fn frequency_breaks(&self, lo: T, hi: T, s: T) -> Vec<T> {
        let (centre, width) = self.feature();
        let osc = if s == T::zero() { T::infinity() } else { T::PI() / s.abs() };
        let mut breaks = vec![lo];
        let mut w = lo;
        while w < hi {
            let local = width.max(T::lit(0.25) * (w - centre).abs());
            let step = local.min(osc);
            w = (w + step).min(hi);
            breaks.push(w);
        }
        if let SpectralDensityModel::Tabulated(t) = self {
            breaks.extend(t.omega.iter().copied().filter(|&o| o > lo && o < hi));
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breaks.dedup();
        }
        breaks
    }

    /// Momentum-space coupling `g(p)` (even in `p`).
    pub fn coupling_momentum(&self, p: T) -> Result<T> {
        match self {
            SpectralDensityModel::CavityArray { g0, .. } => {
                if !(p.abs() <= T::PI()) {
                    return Err(Error::domain("coupling_momentum", format!("lattice momentum {p} outside [-pi, pi]")));
                }
                Ok(*g0 / T::TAU().sqrt())
            }
            _ => {
                let c = self.speed().expect("linear dispersion");
                let j = self.eval_j(c * p.abs())?;
                Ok((c * j / T::TAU()).sqrt())
            }
        }
    }

    /// Real-space coupling `g(x) = (2π)^{-1/2} ∫ g(p) e^{ipx} dp`. For the
    /// cavity array `x` is rounded to a site index.
    pub fn coupling_position(&self, x: T, opts: &BathOptions<T>) -> Result<T> {
        let half = T::lit(0.5);
        match self {
            SpectralDensityModel::OhmicExp { lambda, omega_c, c } => {
                let a = Cplx::new(*c / (T::lit(2.0) * *omega_c), -x);
                let v = a.powf(T::lit(-1.5)).re;
                Ok(*c * half * (*lambda / T::PI()).sqrt() * v)
            }
            SpectralDensityModel::UnderdampedBrownian { lambda, gamma, omega_0, c, narrow_bath: true } => {
                if x == T::zero() {
                    return Err(Error::domain("coupling_position", "narrow-bath g(x) diverges at x = 0"));
                }
                let k0 = *omega_0 / *c;
                let pref = *lambda / T::PI() * (*gamma / (*c * *omega_0)).sqrt();
                Ok(pref * (k0 * x).cos() * bessel_k0(*gamma * x.abs() / (T::lit(2.0) * *c))?)
            }
            SpectralDensityModel::CavityArray { g0, .. } => {
                Ok(if x.round() == T::zero() { *g0 } else { T::zero() })
            }
            _ => self.coupling_position_numeric(x, opts),
        }
    }

    /// `g(x) = (1/π√c) ∫ √J(ω) cos(ωx/c) dω` by quadrature, for any
    /// linear-dispersion model.
    pub fn coupling_position_numeric(&self, x: T, opts: &BathOptions<T>) -> Result<T> {
        let c = self
            .speed()
            .ok_or_else(|| Error::domain("coupling_position_numeric", "requires linear dispersion"))?;
        let hi = self.omega_max(opts);
        let breaks = self.frequency_breaks(T::zero(), hi, x / c);
        let r = quad::integrate_panels(
            |w| Cplx::new(self.eval_j(w).unwrap_or(T::zero()).sqrt() * (w * x / c).cos(), T::zero()),
            &breaks,
            &opts.quad(),
        )?;
        Ok(r.value.re / (T::PI() * c.sqrt()))
    }
}

/// Adaptive quadrature of `f` over `[0, ω_max]` to absolute accuracy `tol`.
pub fn oscillatory_integral<T: Real, F: FnMut(T) -> Cplx<T>>(f: F, omega_max: T, tol: T) -> Result<Cplx<T>> {
    let breaks = quad::uniform_breaks(T::zero(), omega_max, omega_max / T::lit(64.0));
    let opts = QuadOptions { abs_tol: tol, rel_tol: T::zero(), max_intervals: 400_000 };
    Ok(quad::integrate_panels(f, &breaks, &opts)?.value)
}
