//! Variational polaron ground state.
//!
//! The renormalised splitting solves
//! `ω_r = ω_s exp[-(2/π) I(ω_r)]`, `I(ω_r) = ∫ J(ω) / (ω + ω_r)² dω`,
//! and the bound photon profile is `|f(x)|²` with
//! `f(x) = -(1/π√c) ∫ √J(ω) cos(ωx/c) / (ω + ω_r) dω`.

use serde::{Deserialize, Serialize};

use crate::bath::{BathOptions, SpectralDensityModel};
use crate::error::{Error, Result};
use crate::quad;
use crate::scalar::{Cplx, Real};
use crate::special::{bessel_k0, exp1};

const DAMPING: f64 = 0.5;
const MAX_ITERATIONS: usize = 10_000;

/// `I(ω_r)`; closed form for the Ohmic model, quadrature otherwise.
pub fn fixed_point_integral<T: Real>(model: &SpectralDensityModel<T>, omega_r: T, opts: &BathOptions<T>) -> Result<T> {
    match *model {
        SpectralDensityModel::OhmicExp { lambda, omega_c, .. } => {
            let z = omega_r / omega_c;
            Ok(lambda * ((T::one() + z) * z.exp() * exp1(z)? - T::one()))
        }
        _ => fixed_point_integral_numeric(model, omega_r, opts),
    }
}

/// `I(ω_r)` by quadrature for any model.
pub fn fixed_point_integral_numeric<T: Real>(
    model: &SpectralDensityModel<T>,
    omega_r: T,
    opts: &BathOptions<T>,
) -> Result<T> {
    if !(omega_r > T::zero()) {
        return Err(Error::domain("fixed_point_integral", format!("omega_r must be positive, got {omega_r}")));
    }
    let r = match *model {
        SpectralDensityModel::CavityArray { g0, gc, omega } => {
            // ω = Ω + 2g_c sin θ turns J dω into g_0² dθ
            let a = omega + omega_r;
            let b = T::lit(2.0) * gc;
            let h = T::FRAC_PI_2();
            quad::integrate(|th: T| Cplx::new(g0 * g0 / (a + b * th.sin()).powi(2), T::zero()), -h, h, &opts.quad())?
        }
        _ => {
            let breaks = model.frequency_breaks(T::zero(), model.omega_max(opts), T::zero());
            quad::integrate_panels(
                |w: T| Cplx::new(model.eval_j(w).unwrap_or(T::zero()) / (w + omega_r).powi(2), T::zero()),
                &breaks,
                &opts.quad(),
            )?
        }
    };
    Ok(r.value.re)
}

/// Self-consistent polaron solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Serialize"))]
pub struct PolaronSolution<T> {
    pub model: SpectralDensityModel<T>,
    pub omega_s: T,
    pub omega_r: T,
    /// `|ω_r - ω_s exp(-(2/π) I(ω_r))|` at the returned point.
    pub residual: T,
    pub iterations: usize,
    pub opts: BathOptions<T>,
}

/// Solves the fixed point by damped iteration from `ω_r = ω_s`, falling back
/// to bisection. The right-hand side increases with `ω_r`, so iterates from
/// above converge to the largest root.
pub fn solve_omega_r<T: Real>(model: &SpectralDensityModel<T>, omega_s: T, opts: &BathOptions<T>) -> Result<PolaronSolution<T>> {
    model.validate()?;
    if !(omega_s > T::zero()) {
        return Err(Error::domain("solve_omega_r", format!("omega_s must be positive, got {omega_s}")));
    }
    let rhs = |w: T| -> Result<T> { Ok(omega_s * (-T::lit(2.0) / T::PI() * fixed_point_integral(model, w, opts)?).exp()) };
    let tol = T::lit(1e-12) * omega_s;
    let alpha = T::lit(DAMPING);
    let mut w = omega_s;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let next = (T::one() - alpha) * w + alpha * rhs(w)?;
        let step = (next - w).abs();
        w = next;
        if step <= tol {
            converged = true;
            break;
        }
        if !(w > T::lit(1e-300)) {
            break;
        }
    }
    if !converged {
        log::info!("polaron iteration stalled at omega_r = {w}; bisecting");
        let g = |x: T| -> Result<T> { Ok(x - rhs(x)?) };
        let mut hi = omega_s.min(w.max(T::min_positive_value()) * T::lit(2.0));
        if g(hi)? < T::zero() {
            hi = omega_s;
        }
        let mut lo = hi;
        loop {
            lo = lo * T::lit(0.5);
            if lo < T::lit(1e-14) * omega_s {
                return Err(Error::FixedPoint { iterations, residual: g(hi)?.to_f64().unwrap_or(f64::NAN) });
            }
            if g(lo)? < T::zero() {
                break;
            }
            hi = lo;
        }
        while hi - lo > tol {
            let mid = T::lit(0.5) * (lo + hi);
            if g(mid)? < T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        w = T::lit(0.5) * (lo + hi);
    }
    let residual = (w - rhs(w)?).abs();
    if !(w > T::zero()) || residual > T::lit(1e-10) * omega_s {
        return Err(Error::FixedPoint { iterations, residual: residual.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(PolaronSolution { model: model.clone(), omega_s, omega_r: w, residual, iterations, opts: *opts })
}

/// `⟨σ_z⟩ = -ω_r / ω_s`.
pub fn sigma_z_gs<T: Real>(omega_r: T, omega_s: T) -> T {
    -omega_r / omega_s
}

impl<T: Real> PolaronSolution<T> {
    pub fn sigma_z(&self) -> T {
        sigma_z_gs(self.omega_r, self.omega_s)
    }

    /// `f(x)` by quadrature (linear dispersion only).
    pub fn f_x(&self, x: T) -> Result<T> {
        let c = self.model.speed().ok_or_else(|| Error::domain("f_x", "requires linear dispersion"))?;
        let m = &self.model;
        let breaks = m.frequency_breaks(T::zero(), m.omega_max(&self.opts), x / c);
        let r = quad::integrate_panels(
            |w: T| Cplx::new(m.eval_j(w).unwrap_or(T::zero()).sqrt() * (w * x / c).cos() / (w + self.omega_r), T::zero()),
            &breaks,
            &self.opts.quad(),
        )?;
        Ok(-r.value.re / (T::PI() * c.sqrt()))
    }

    /// `f_m = -g_0 r^{|m|} / √(a² - b²)` with `a = Ω + ω_r`, `b = 2g_c`,
    /// `r = (√(a² - b²) - a) / b` (cavity array only).
    pub fn f_site(&self, m: i64) -> Result<T> {
        let (g0, a, b) = self.cavity()?;
        let root = (a * a - b * b).sqrt();
        let r = (root - a) / b;
        Ok(-g0 * r.powi(m.unsigned_abs().min(i32::MAX as u64) as i32) / root)
    }

    /// Ground-state photon density. Linear models give `|f(x)|²` (or the
    /// Lorentzian closed form for the narrow-bath variant); the cavity array
    /// gives `A e^{-|m|/ξ}` with `m = int(x)`.
    pub fn gs_profile(&self, x: T) -> Result<T> {
        match self.model {
            SpectralDensityModel::UnderdampedBrownian { lambda, gamma, omega_0, c, narrow_bath: true } => {
                if x == T::zero() {
                    return Err(Error::domain("gs_profile", "narrow-bath profile diverges at x = 0"));
                }
                let k = bessel_k0(gamma * x.abs() / (T::lit(2.0) * c))?;
                let pref = lambda * lambda * gamma
                    / (T::PI() * T::PI() * c * omega_0 * (omega_0 + self.omega_r).powi(2));
                Ok(pref * (omega_0 * x / c).cos().powi(2) * k * k)
            }
            SpectralDensityModel::CavityArray { .. } => {
                let m = x.trunc().to_i64().unwrap_or(i64::MAX);
                let (g0, a, b) = self.cavity()?;
                Ok(g0 * g0 / (a * a - b * b) * (-T::from_i64(m.abs()).unwrap_or(T::infinity()) / self.localization_length()?).exp())
            }
            _ => Ok(self.f_x(x)?.powi(2)),
        }
    }

    /// `ξ` with `ξ⁻¹ = 2 arccosh[(Ω + ω_r) / 2g_c]` (cavity array only).
    pub fn localization_length(&self) -> Result<T> {
        let (_, a, b) = self.cavity()?;
        Ok(T::one() / (T::lit(2.0) * (a / b).acosh()))
    }

    fn cavity(&self) -> Result<(T, T, T)> {
        match self.model {
            SpectralDensityModel::CavityArray { g0, gc, omega } => Ok((g0, omega + self.omega_r, T::lit(2.0) * gc)),
            _ => Err(Error::domain("polaron", "site profile requires the cavity array")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> BathOptions<f64> {
        BathOptions::default()
    }

    fn ohmic(lambda: f64) -> SpectralDensityModel<f64> {
        SpectralDensityModel::ohmic(lambda, 2.0, 1.0)
    }

    #[test]
    fn weak_coupling_leaves_frequency() {
        let s = solve_omega_r(&ohmic(1e-9), 1.0, &opts()).unwrap();
        assert!((s.omega_r - 1.0).abs() < 1e-7);
        assert!((s.sigma_z() + 1.0).abs() < 1e-7);
    }

    #[test]
    fn stronger_coupling_lowers_frequency() {
        let a = solve_omega_r(&ohmic(0.2), 1.0, &opts()).unwrap();
        let b = solve_omega_r(&ohmic(0.39), 1.0, &opts()).unwrap();
        assert!(a.omega_r > b.omega_r && b.omega_r > 0.0);
        assert!(a.sigma_z() < b.sigma_z());
    }

    #[test]
    fn matches_grid_scan() {
        let model = ohmic(0.39);
        let s = solve_omega_r(&model, 1.0, &opts()).unwrap();
        let g = |w: f64| w - (-2.0 / std::f64::consts::PI * fixed_point_integral(&model, w, &opts()).unwrap()).exp();
        // largest sign change on a fine grid, then linear interpolation
        let n = 200_000;
        let grid: Vec<f64> = (0..=n).map(|k| 1e-3 + (1.0 - 1e-3) * k as f64 / n as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&w| g(w)).collect();
        let k = (0..n).rev().find(|&k| vals[k] < 0.0 && vals[k + 1] >= 0.0).unwrap();
        let root = grid[k] - vals[k] * (grid[k + 1] - grid[k]) / (vals[k + 1] - vals[k]);
        assert!((s.omega_r - root).abs() < 1e-6, "{} vs {root}", s.omega_r);
    }

    #[test]
    fn closed_and_numeric_integrals_agree() {
        for lambda in [0.1, 0.39, 0.8] {
            let m = ohmic(lambda);
            for w in [0.05, 0.3, 1.0] {
                let a = fixed_point_integral(&m, w, &opts()).unwrap();
                let b = fixed_point_integral_numeric(&m, w, &opts()).unwrap();
                assert!((a - b).abs() < 1e-8, "λ = {lambda}, ω_r = {w}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn residuals_are_small_for_all_models() {
        let models = [ohmic(0.39), SpectralDensityModel::underdamped(0.4, 0.1, 1.0, 1.0), SpectralDensityModel::cavity_array(0.2, 0.4, 1.0)];
        for m in models {
            let s = solve_omega_r(&m, 1.0, &opts()).unwrap();
            assert!(s.residual <= 1e-10, "{m:?}: {}", s.residual);
            assert!(s.omega_r > 0.0 && s.omega_r <= 1.0);
        }
    }

    #[test]
    fn cavity_integral_has_closed_form() {
        // ∫ du / (√(1-u²)(a + bu)²) = π a / (a² - b²)^{3/2}
        let m = SpectralDensityModel::cavity_array(0.2, 0.4, 1.0);
        let w = 0.6;
        let (a, b) = (1.0 + w, 0.8);
        let want = 0.04 * std::f64::consts::PI * a / (a * a - b * b).powf(1.5);
        assert!((fixed_point_integral(&m, w, &opts()).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn cavity_profile_is_discrete_transform() {
        let m = SpectralDensityModel::cavity_array(0.2, 0.4, 1.0);
        let s = solve_omega_r(&m, 1.0, &opts()).unwrap();
        for site in [0i64, 1, 4, -3] {
            // f_m = (1/√2π) ∫ f(p) e^{ipm} dp with f(p) = -(g_0/√2π) / (Ω + 2g_c cos p + ω_r)
            let r = quad::integrate(
                |p: f64| Cplx::new((p * site as f64).cos() / (1.0 + 0.8 * p.cos() + s.omega_r), 0.0),
                -std::f64::consts::PI,
                std::f64::consts::PI,
                &opts().quad(),
            )
            .unwrap();
            let want = -0.2 * r.value.re / std::f64::consts::TAU;
            assert!((s.f_site(site).unwrap() - want).abs() < 1e-12);
            assert!((s.gs_profile(site as f64).unwrap() - want * want).abs() < 1e-12);
        }
    }

    #[test]
    fn ohmic_f_is_even_negative_and_decays_as_power_law() {
        let s = solve_omega_r(&ohmic(0.39), 1.0, &opts()).unwrap();
        assert!(s.f_x(0.0).unwrap() < 0.0);
        for x in [0.3, 2.0, 7.5] {
            assert_eq!(s.f_x(x).unwrap(), s.f_x(-x).unwrap());
        }
        // |f(x)| |x|^{3/2} settles, with corrections of relative order 1/(ω_r x)
        let r = |x: f64| s.f_x(x).unwrap().abs() * x.powf(1.5);
        let (d1, d2) = ((r(50.0) / r(100.0) - 1.0).abs(), (r(100.0) / r(200.0) - 1.0).abs());
        assert!(d1 < 0.03 && d2 < 0.6 * d1, "{d1} {d2}");
    }

    #[test]
    fn lorentzian_closed_form_tracks_numeric_profile() {
        let exact = SpectralDensityModel::underdamped(0.4, 0.1, 1.0, 1.0);
        let mut narrow = exact.clone();
        if let SpectralDensityModel::UnderdampedBrownian { narrow_bath, .. } = &mut narrow {
            *narrow_bath = true;
        }
        let s = solve_omega_r(&exact, 1.0, &opts()).unwrap();
        let sn = PolaronSolution { model: narrow, ..s.clone() };
        assert!(sn.gs_profile(0.0).is_err());
        for k in 0..5 {
            let x = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI;
            assert!(sn.gs_profile(x).unwrap() < 1e-25);
        }
        // compare away from the nodes, where relative errors are meaningful
        for k in 1..8 {
            let x = k as f64 * std::f64::consts::PI;
            let a = s.gs_profile(x).unwrap();
            let b = sn.gs_profile(x).unwrap();
            assert!((a - b).abs() < 0.15 * a, "x = {x}: {a} vs {b}");
        }
    }

    #[test]
    fn zero_coupling_profile_vanishes() {
        let s = PolaronSolution { model: ohmic(1e-300), omega_s: 1.0, omega_r: 1.0, residual: 0.0, iterations: 0, opts: opts() };
        assert!(s.gs_profile(1.3).unwrap().abs() < 1e-290);
    }
}
