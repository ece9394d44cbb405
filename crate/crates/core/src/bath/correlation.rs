use crate::error::{Error, Result};
use crate::quad;
use crate::scalar::{Cplx, Real};
use crate::special::bessel_j;

use super::{BathOptions, SpectralDensityModel};

/// `coth(βω/2)`, equal to one at zero temperature.
fn thermal_factor<T: Real>(beta: T, omega: T) -> T {
    if beta.is_infinite() {
        T::one()
    } else {
        T::one() / (beta * omega * T::lit(0.5)).tanh()
    }
}

impl<T: Real> SpectralDensityModel<T> {
    /// Free-bath correlation `C(t) = (1/π) ∫ J(ω) [coth(βω/2) cos ωt - i sin ωt] dω`
    /// for `t ≥ 0`; `beta = ∞` selects zero temperature.
    ///
    /// Closed forms are used for the Ohmic and cavity-array kernels at zero
    /// temperature; everything else goes through quadrature.
    pub fn correlation(&self, beta: T, t: T, opts: &BathOptions<T>) -> Result<Cplx<T>> {
        if !(t >= T::zero()) {
            return Err(Error::domain("correlation", format!("time must be non-negative, got {t}")));
        }
        if beta.is_infinite() {
            match *self {
                SpectralDensityModel::OhmicExp { lambda, omega_c, .. } => {
                    let d = Cplx::new(T::one(), omega_c * t);
                    return Ok((d * d).inv() * (lambda / T::PI() * omega_c * omega_c));
                }
                SpectralDensityModel::CavityArray { g0, gc, omega } => {
                    let phase = Cplx::from_polar(T::one(), -omega * t);
                    return Ok(phase * (g0 * g0 * bessel_j(0, T::lit(2.0) * gc * t)));
                }
                _ => {}
            }
        }
        self.correlation_quadrature(beta, t, opts)
    }

    /// Quadrature branch of [`correlation`](Self::correlation), valid for
    /// every model.
    pub fn correlation_quadrature(&self, beta: T, t: T, opts: &BathOptions<T>) -> Result<Cplx<T>> {
        if !(beta > T::zero()) {
            return Err(Error::domain("correlation", format!("inverse temperature must be positive, got {beta}")));
        }
        let kernel = |w: T, j: T| {
            let (s, c) = (w * t).sin_cos();
            Cplx::new(j * thermal_factor(beta, w) * c, -j * s)
        };
        let value = match *self {
            SpectralDensityModel::CavityArray { g0, gc, omega } => {
                // ω = Ω + 2 g_c sin θ turns J dω into g_0² dθ
                let half_pi = T::FRAC_PI_2();
                let panels = (T::lit(2.0) * gc * t / T::PI()).ceil().to_usize().unwrap_or(1).max(8);
                let breaks = quad::uniform_breaks(-half_pi, half_pi, T::PI() / T::from_count(panels));
                let r = quad::integrate_panels(
                    |th: T| kernel(omega + T::lit(2.0) * gc * th.sin(), g0 * g0),
                    &breaks,
                    &opts.quad(),
                )?;
                r.value
            }
            _ => {
                let hi = self.omega_max(opts);
                let breaks = self.frequency_breaks(T::zero(), hi, t);
                let r = quad::integrate_panels(
                    |w: T| {
                        let j = self.eval_j(w).unwrap_or(T::zero());
                        if j == T::zero() {
                            Cplx::new(T::zero(), T::zero())
                        } else {
                            kernel(w, j)
                        }
                    },
                    &breaks,
                    &opts.quad(),
                )?;
                r.value
            }
        };
        Ok(value / T::PI())
    }
}

/// A correlation function bound to a model, temperature and time window.
#[derive(Clone, Debug)]
pub struct CorrelationKernel<T> {
    pub model: SpectralDensityModel<T>,
    /// Inverse temperature; `∞` for zero temperature.
    pub beta: T,
    pub t_max: T,
    pub opts: BathOptions<T>,
}

impl<T: Real> CorrelationKernel<T> {
    pub fn new(model: SpectralDensityModel<T>, beta: T, t_max: T) -> Self {
        CorrelationKernel { model, beta, t_max, opts: BathOptions::default() }
    }

    /// `C(t)` on `[-t_max, t_max]`, using `C(-t) = conj C(t)`.
    pub fn eval(&self, t: T) -> Result<Cplx<T>> {
        if t.abs() > self.t_max {
            return Err(Error::domain("CorrelationKernel::eval", format!("|t| = {} beyond window {}", t.abs(), self.t_max)));
        }
        let v = self.model.correlation(self.beta, t.abs(), &self.opts)?;
        Ok(if t < T::zero() { v.conj() } else { v })
    }

    /// `(1/π) ∫ J(ω) coth(βω/2) dω`, the expected value of `C(0)`.
    pub fn zero_time_weight(&self) -> Result<T> {
        Ok(self.model.correlation_quadrature(self.beta, T::zero(), &self.opts)?.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> BathOptions<f64> {
        BathOptions::default()
    }

    #[test]
    fn zero_time_values() {
        let cav = SpectralDensityModel::cavity_array(0.2, 0.4, 1.0);
        assert!((cav.correlation(f64::INFINITY, 0.0, &opts()).unwrap().re - 0.04).abs() < 1e-15);
        let ohm = SpectralDensityModel::ohmic(0.39, 2.0, 1.0);
        let c0 = ohm.correlation(f64::INFINITY, 0.0, &opts()).unwrap();
        assert!((c0.re - 0.39 / std::f64::consts::PI * 4.0).abs() < 1e-14);
        assert!((c0.re - 0.4966).abs() < 1e-4);
        assert_eq!(c0.im, 0.0);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let models = [SpectralDensityModel::ohmic(0.39, 2.0, 1.0), SpectralDensityModel::cavity_array(0.2, 0.4, 1.0)];
        for m in &models {
            for k in 0..12 {
                let t = 0.7 * k as f64;
                let a = m.correlation(f64::INFINITY, t, &opts()).unwrap();
                let b = m.correlation_quadrature(f64::INFINITY, t, &opts()).unwrap();
                assert!((a - b).norm() < 1e-6, "{m:?} t = {t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn underdamped_matches_refined_oracle() {
        let m = SpectralDensityModel::underdamped(0.4, 0.1, 1.0, 1.0);
        // independent oracle: uniform composite Simpson on [0, 3000]; the
        // discarded tail is below 1e-9
        let simpson = |t: f64| {
            let n = 15_000_000;
            let h = 3000.0 / n as f64;
            let mut acc = Cplx::new(0.0, 0.0);
            for i in 0..=n {
                let w = h * i as f64;
                let f = Cplx::from_polar(m.eval_j(w).unwrap(), -w * t);
                let wt = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += f * wt;
            }
            acc * (h / 3.0 / std::f64::consts::PI)
        };
        for t in [0.0, 1.5, 7.0] {
            let q = m.correlation(f64::INFINITY, t, &opts()).unwrap();
            let o = simpson(t);
            assert!((q - o).norm() < 1e-8, "t = {t}: {q} vs {o}");
        }
    }

    #[test]
    fn kernel_is_hermitian() {
        let k = CorrelationKernel::new(SpectralDensityModel::cavity_array(0.2, 0.4, 1.0), f64::INFINITY, 50.0);
        for i in 0..100 {
            let t = 0.5 * i as f64;
            assert_eq!(k.eval(-t).unwrap(), k.eval(t).unwrap().conj());
        }
        assert!(k.eval(51.0).is_err());
    }

    #[test]
    fn zero_time_weight_matches_c0() {
        let k = CorrelationKernel::new(SpectralDensityModel::ohmic(0.2, 2.0, 1.0), f64::INFINITY, 10.0);
        assert!((k.zero_time_weight().unwrap() - k.eval(0.0).unwrap().re).abs() < 1e-10);
    }

    #[test]
    fn finite_temperature_raises_real_part() {
        let m = SpectralDensityModel::ohmic(0.2, 2.0, 1.0);
        let cold = m.correlation(f64::INFINITY, 0.0, &opts()).unwrap();
        let hot = m.correlation(1.0, 0.0, &opts()).unwrap();
        assert!(hot.re > cold.re);
        let cold = m.correlation(f64::INFINITY, 0.5, &opts()).unwrap();
        let hot = m.correlation(1.0, 0.5, &opts()).unwrap();
        assert!((hot.im - cold.im).abs() < 1e-10);
    }
}
