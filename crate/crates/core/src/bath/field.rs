use std::sync::Arc;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::quad;
use crate::scalar::{Cplx, Real};
use crate::special::bessel_j;

use super::{BathOptions, SpectralDensityModel};

// ζ(-1/2), leading endpoint correction of the trapezoid rule for √ω integrands
const ZETA_MINUS_HALF: f64 = -0.207_886_224_977_354_6;

fn check_time<T: Real>(t_out: T, t: T) -> Result<()> {
    if t > t_out {
        return Err(Error::BeyondOutputTime { t: t.to_f64().unwrap_or(f64::NAN), t_out: t_out.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(())
}

/// Site index `m = int(x / Δx)`, truncated toward zero.
pub(crate) fn site_index<T: Real>(x_out: T, dx: T) -> i64 {
    (x_out / dx).trunc().to_i64().unwrap_or(i64::MAX)
}

impl<T: Real> SpectralDensityModel<T> {
    /// Output-field correlation `Ω₊(t)` for the static output field at
    /// `(x_out, t_out)` integrated over a region `dx`; requires `t ≤ t_out`.
    ///
    /// Ohmic and cavity-array models use closed forms; other models use
    /// [`omega_plus_quadrature`](Self::omega_plus_quadrature). Repeated
    /// evaluation for linear-dispersion models is cheaper through a
    /// [`FieldTable`].
    pub fn omega_plus(&self, x_out: T, t_out: T, t: T, dx: T, opts: &BathOptions<T>) -> Result<Cplx<T>> {
        check_time(t_out, t)?;
        let tau = t_out - t;
        match *self {
            SpectralDensityModel::OhmicExp { lambda, omega_c, c } => {
                let pref = (lambda * omega_c * omega_c * omega_c * dx / (T::TAU() * c)).sqrt();
                let term = |s: T| Cplx::new(T::one(), -T::lit(2.0) * omega_c * s).powf(T::lit(-1.5));
                Ok((term(tau - x_out / c) + term(tau + x_out / c)) * pref)
            }
            SpectralDensityModel::CavityArray { g0, gc, omega } => {
                let m = site_index(x_out, dx);
                if m.abs() > opts.bessel_order_cap {
                    return Err(Error::BesselOrder { order: m, cap: opts.bessel_order_cap });
                }
                // (-i)^m
                let phase_m = match m.rem_euclid(4) {
                    0 => Cplx::new(T::one(), T::zero()),
                    1 => Cplx::new(T::zero(), -T::one()),
                    2 => Cplx::new(-T::one(), T::zero()),
                    _ => Cplx::new(T::zero(), T::one()),
                };
                let j = bessel_j(m, T::lit(2.0) * gc * (t - t_out));
                Ok(phase_m * Cplx::from_polar(g0 * j, omega * tau))
            }
            _ => self.omega_plus_quadrature(x_out, t_out, t, dx, opts),
        }
    }

    /// `Ω₋(t) = conj Ω₊(t)`.
    pub fn omega_minus(&self, x_out: T, t_out: T, t: T, dx: T, opts: &BathOptions<T>) -> Result<Cplx<T>> {
        Ok(self.omega_plus(x_out, t_out, t, dx, opts)?.conj())
    }

    /// Direct quadrature of `Ω₊ = √(Δx/2π) ∫ dp g(p) e^{-ipx} e^{iω̄(p)(t_out - t)}`
    /// for any model. For the cavity array `x_out` is rounded to its site
    /// and the momentum integral runs over the Brillouin zone.
    pub fn omega_plus_quadrature(&self, x_out: T, t_out: T, t: T, dx: T, opts: &BathOptions<T>) -> Result<Cplx<T>> {
        check_time(t_out, t)?;
        let tau = t_out - t;
        match *self {
            SpectralDensityModel::CavityArray { g0, gc, omega } => {
                let m = T::from_i64(site_index(x_out, dx)).expect("site index representable");
                let panels = ((T::lit(2.0) * gc * tau.abs() + m.abs()) / T::PI()).ceil().to_usize().unwrap_or(1).max(8);
                let breaks = quad::uniform_breaks(-T::PI(), T::PI(), T::TAU() / T::from_count(panels));
                let r = quad::integrate_panels(
                    |p: T| Cplx::from_polar(T::one(), -p * m + (omega + T::lit(2.0) * gc * p.cos()) * tau),
                    &breaks,
                    &opts.quad(),
                )?;
                Ok(r.value * ((dx / T::TAU()).sqrt() * g0 / T::TAU().sqrt()))
            }
            _ => {
                // (√Δx / π√c) ∫ √J(ω) cos(ωx/c) e^{iωτ} dω
                let c = self.speed().expect("linear dispersion");
                let hi = self.omega_max(opts);
                let s = tau.abs() + x_out.abs() / c;
                let breaks = self.frequency_breaks(T::zero(), hi, s);
                let r = quad::integrate_panels(
                    |w: T| {
                        let a = self.eval_j(w).unwrap_or(T::zero()).sqrt() * (w * x_out / c).cos();
                        Cplx::from_polar(a, w * tau)
                    },
                    &breaks,
                    &opts.quad(),
                )?;
                Ok(r.value * (dx.sqrt() / (T::PI() * c.sqrt())))
            }
        }
    }
}

/// Tabulated half-line transform `h(s) = ∫₀^∞ √J(ω) e^{iωs} dω` for a
/// linear-dispersion model, from which
/// `Ω₊ = √Δx/(2π√c) [h(τ - x/c) + h(τ + x/c)]`.
///
/// The table is built once by a single FFT of trapezoid-rule weights (with
/// the leading `√ω` endpoint correction) and read by four-point Lagrange
/// interpolation.
#[derive(Clone, Debug)]
pub struct FieldTable<T> {
    c: T,
    ds: T,
    s_min: T,
    values: Arc<Vec<Cplx<T>>>,
}

impl<T: Real> FieldTable<T> {
    /// Builds a table valid for `|s| ≤ s_max`.
    pub fn build(model: &SpectralDensityModel<T>, s_max: T, opts: &BathOptions<T>) -> Result<Self> {
        let c = model
            .speed()
            .ok_or_else(|| Error::domain("FieldTable::build", "requires a linear-dispersion model"))?;
        if !(s_max > T::zero()) || !s_max.is_finite() {
            return Err(Error::domain("FieldTable::build", format!("s_max must be positive, got {s_max}")));
        }
        let (centre, width) = model.feature();
        let w_max = model.omega_max(opts);
        // s-resolution for the interpolation, reached by zero padding
        let ds_max = T::lit(0.02) / (centre + T::lit(2.0) * width);
        let dw = (width / T::lit(20.0)).min(T::PI() / (T::lit(2.0) * s_max)).min(T::lit(2e-3));
        let needed = (w_max / dw).ceil().to_usize().unwrap_or(usize::MAX).saturating_add(1);
        if needed > 1 << 24 {
            return Err(Error::domain("FieldTable::build", format!("table of {needed} frequencies is too large")));
        }
        let padded = (T::TAU() / (ds_max * dw)).ceil().to_usize().unwrap_or(usize::MAX);
        let n = needed.max(padded).next_power_of_two().max(1024);
        if n > 1 << 24 {
            return Err(Error::domain("FieldTable::build", format!("FFT length {n} is too large")));
        }
        let mut buf: Vec<Cplx<T>> = (0..n)
            .map(|k| {
                if k >= needed {
                    return Cplx::new(T::zero(), T::zero());
                }
                let w = dw * T::from_count(k);
                let weight = if k == 0 || k + 1 == needed { T::lit(0.5) } else { T::one() };
                Cplx::new(model.eval_j(w).unwrap_or(T::zero()).sqrt() * weight * dw, T::zero())
            })
            .collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);

        // √J ≈ φ(0) √ω near the origin
        let eps = dw * T::lit(1e-4);
        let j0 = model.eval_j(T::zero()).unwrap_or(T::zero());
        let phi0 = (model.eval_j(eps).unwrap_or(T::zero()) / eps).sqrt();
        let correction = if j0 == T::zero() && phi0.is_finite() {
            -T::lit(ZETA_MINUS_HALF) * phi0 * dw * dw.sqrt()
        } else {
            T::zero()
        };

        let ds = T::TAU() / (T::from_count(n) * dw);
        // reorder so index 0 holds s = -(n/2) ds
        let half = n / 2;
        let values: Vec<Cplx<T>> =
            (0..n).map(|i| buf[(i + half) % n] + Cplx::new(correction, T::zero())).collect();
        Ok(FieldTable { c, ds, s_min: -ds * T::from_count(half), values: Arc::new(values) })
    }

    /// Largest `|s|` covered by the table.
    pub fn s_max(&self) -> T {
        -self.s_min - T::lit(2.0) * self.ds
    }

    /// `h(s)` by four-point Lagrange interpolation.
    pub fn h(&self, s: T) -> Result<Cplx<T>> {
        if s.abs() > self.s_max() {
            return Err(Error::domain("FieldTable::h", format!("|s| = {} beyond table range {}", s.abs(), self.s_max())));
        }
        let u = (s - self.s_min) / self.ds;
        let i = u.floor().to_usize().expect("in range");
        let f = u - T::from_count(i);
        let v = &self.values;
        let one = T::one();
        let two = T::lit(2.0);
        let six = T::lit(6.0);
        let w0 = -f * (f - one) * (f - two) / six;
        let w1 = (f + one) * (f - one) * (f - two) / two;
        let w2 = -(f + one) * f * (f - two) / two;
        let w3 = (f + one) * f * (f - one) / six;
        Ok(v[i - 1] * w0 + v[i] * w1 + v[i + 1] * w2 + v[i + 2] * w3)
    }

    /// `Ω₊(t)` at `(x_out, t_out)` for region `dx`.
    pub fn omega_plus(&self, x_out: T, t_out: T, t: T, dx: T) -> Result<Cplx<T>> {
        check_time(t_out, t)?;
        let tau = t_out - t;
        let shift = x_out / self.c;
        let pref = dx.sqrt() / (T::TAU() * self.c.sqrt());
        Ok((self.h(tau - shift)? + self.h(tau + shift)?) * pref)
    }
}
