//! Multi-exponential decomposition of the bath correlation function.
//!
//! `C(t) ≈ Σ_k a_k e^{-γ_k t}` is obtained with the matrix-pencil form of
//! Prony's method and then split into the real/imaginary coefficient lists
//! the hierarchy consumes.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::{BathOptions, SpectralDensityModel};
use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

/// Uniform samples `C(t_n)`, `t_n = n dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSeries<T> {
    pub dt: T,
    pub values: Vec<Cplx<T>>,
}

impl<T: Real> SampleSeries<T> {
    pub fn times(&self) -> Vec<T> {
        (0..self.values.len()).map(|n| self.dt * T::from_count(n)).collect()
    }

    /// Samples an arbitrary function on `n` points of `[0, t_fit]`.
    pub fn from_fn<F: FnMut(T) -> Cplx<T>>(t_fit: T, n: usize, mut f: F) -> Result<Self> {
        if n < 2 || !(t_fit > T::zero()) {
            return Err(Error::domain("sample", format!("need N >= 2 and T_fit > 0 (N = {n}, T_fit = {t_fit})")));
        }
        let dt = t_fit / T::from_count(n - 1);
        Ok(SampleSeries { dt, values: (0..n).map(|k| f(dt * T::from_count(k))).collect() })
    }
}

/// Samples `C(t)` on `n` uniform points of `[0, t_fit]`.
pub fn sample_correlation<T: Real>(
    model: &SpectralDensityModel<T>,
    beta: T,
    t_fit: T,
    n: usize,
    opts: &BathOptions<T>,
) -> Result<SampleSeries<T>> {
    let probe = SampleSeries::from_fn(t_fit, n, |_| Cplx::new(T::zero(), T::zero()))?;
    let values = probe
        .times()
        .into_iter()
        .map(|t| model.correlation(beta, t, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSeries { dt: probe.dt, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm<T> {
    pub amplitude: Cplx<T>,
    pub rate: Cplx<T>,
}

impl<T: Real> ExpTerm<T> {
    pub fn eval(&self, t: T) -> Cplx<T> {
        self.amplitude * (-self.rate * t).exp()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitResidual<T> {
    pub max_abs: T,
    pub rel_l2: T,
}

/// Multi-exponential approximation of a sampled kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit<T> {
    pub terms: Vec<ExpTerm<T>>,
    pub t_fit: T,
    pub samples: usize,
    pub requested_order: usize,
    /// Order after rank truncation and removal of growing roots.
    pub effective_order: usize,
    /// Roots dropped for `Re γ < 0`.
    pub discarded: usize,
    pub residual: FitResidual<T>,
}

impl<T: Real> ExponentialFit<T> {
    pub fn eval(&self, t: T) -> Cplx<T> {
        self.terms.iter().fold(Cplx::new(T::zero(), T::zero()), |acc, term| acc + term.eval(t))
    }

    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).expect("fit serializes")
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("fit record: {e}")))
    }
}

fn to_c64<T: Real>(z: Cplx<T>) -> Complex64 {
    Complex64::new(z.re.to_f64().unwrap_or(f64::NAN), z.im.to_f64().unwrap_or(f64::NAN))
}

fn from_c64<T: Real>(z: Complex64) -> Cplx<T> {
    Cplx::new(T::lit(z.re), T::lit(z.im))
}

// singular values below this fraction of the largest are treated as noise
const RANK_TOL: f64 = 1e-13;

/// Least-squares amplitudes for fixed roots `z_k` (`y_n ≈ Σ a_k z_k^n`).
fn solve_amplitudes(y: &[Complex64], z: &[Complex64]) -> Result<Vec<Complex64>> {
    let v = DMatrix::from_fn(y.len(), z.len(), |n, k| z[k].powu(n as u32));
    let rhs = DMatrix::from_column_slice(y.len(), 1, y);
    let a = v
        .svd(true, true)
        .solve(&rhs, 1e-15)
        .map_err(|e| Error::Fit(format!("amplitude solve failed: {e}")))?;
    Ok(a.iter().copied().collect())
}

/// Matrix-pencil Prony fit of order `k`.
///
/// The linear algebra runs in double precision regardless of `T`. Roots
/// with `Re γ < 0` are discarded and the remaining amplitudes re-solved by
/// least squares; numerically rank-deficient data lowers the effective
/// order, which is recorded in the result.
pub fn prony_fit<T: Real>(samples: &SampleSeries<T>, k: usize) -> Result<ExponentialFit<T>> {
    let n = samples.values.len();
    if k == 0 || 2 * k > n {
        return Err(Error::Fit(format!("model order {k} needs 1 <= 2K <= N (N = {n})")));
    }
    let y: Vec<Complex64> = samples.values.iter().map(|&v| to_c64(v)).collect();
    let dt = samples.dt.to_f64().unwrap_or(f64::NAN);
    let pencil = (n / 3).max(k).min(n - k);
    let hankel = DMatrix::from_fn(n - pencil, pencil + 1, |i, j| y[i + j]);
    let svd = hankel.svd(false, true);
    let sv = &svd.singular_values;
    let s0 = sv[0];
    if !(s0 > 0.0) {
        return Err(Error::Fit("samples are identically zero".into()));
    }
    let rank = sv.iter().take(k).filter(|&&s| s > RANK_TOL * s0).count();
    if rank < k {
        log::warn!("Prony data rank {rank} below requested order {k}; fitting {rank} terms");
    }
    let v_t = svd.v_t.expect("right singular vectors requested");
    // rows of V^H span the signal space; shift invariance of its columns
    let w = v_t.rows(0, rank).transpose();
    let w1 = w.rows(0, pencil).into_owned();
    let w2 = w.rows(1, pencil).into_owned();
    let psi = w1
        .svd(true, true)
        .solve(&w2, 1e-15)
        .map_err(|e| Error::Fit(format!("shift-invariance solve failed: {e}")))?;
    let roots = psi
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Fit("eigenvalue computation failed".into()))?;

    let mut kept = Vec::new();
    let mut discarded = 0;
    for &z in roots.iter() {
        if z.norm() > 1.0 {
            discarded += 1;
        } else if z.norm() > 0.0 {
            kept.push(z);
        }
    }
    if discarded > 0 {
        log::info!("Prony fit discarded {discarded} growing root(s)");
    }
    let amps = if kept.is_empty() { Vec::new() } else { solve_amplitudes(&y, &kept)? };
    let terms: Vec<ExpTerm<T>> = kept
        .iter()
        .zip(&amps)
        .map(|(&z, &a)| ExpTerm { amplitude: from_c64(a), rate: from_c64(-z.ln() / dt) })
        .collect();
    let mut fit = ExponentialFit {
        effective_order: terms.len(),
        terms,
        t_fit: samples.dt * T::from_count(n - 1),
        samples: n,
        requested_order: k,
        discarded,
        residual: FitResidual::default(),
    };
    fit.residual = fit_error(&fit, samples);
    Ok(fit)
}

/// Max absolute and relative L2 deviation of `fit` over the sample grid.
pub fn fit_error<T: Real>(fit: &ExponentialFit<T>, samples: &SampleSeries<T>) -> FitResidual<T> {
    let mut max_abs = T::zero();
    let mut num = T::zero();
    let mut den = T::zero();
    for (t, &y) in samples.times().into_iter().zip(&samples.values) {
        let d = (fit.eval(t) - y).norm();
        max_abs = max_abs.max(d);
        num = num + d * d;
        den = den + y.norm_sqr();
    }
    let rel_l2 = if den > T::zero() { (num / den).sqrt() } else { num.sqrt() };
    FitResidual { max_abs, rel_l2 }
}

/// Fits every order in `orders` and reports the residuals.
pub fn order_sweep<T: Real>(samples: &SampleSeries<T>, orders: &[usize]) -> Result<Vec<(usize, FitResidual<T>)>> {
    orders.iter().map(|&k| Ok((k, prony_fit(samples, k)?.residual))).collect()
}

/// One hierarchy mode: a shared rate with real- and imaginary-part weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeomMode<T> {
    pub rate: Cplx<T>,
    pub c_r: Cplx<T>,
    pub c_i: Cplx<T>,
}

/// Coefficients of `C(t) = Σ c^R_k e^{-γ_k t} + i Σ c^I_k e^{-γ_k t}` where
/// the two sums are separately `Re C` and `Im C` for real `t`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeomCoefficients<T> {
    pub modes: Vec<HeomMode<T>>,
}

impl<T: Real> HeomCoefficients<T> {
    /// `(c^R_k, γ_k)` pairs with nonzero weight.
    pub fn real_list(&self) -> Vec<(Cplx<T>, Cplx<T>)> {
        self.modes.iter().filter(|m| m.c_r.norm() > T::zero()).map(|m| (m.c_r, m.rate)).collect()
    }

    /// `(c^I_k, γ_k)` pairs with nonzero weight.
    pub fn imag_list(&self) -> Vec<(Cplx<T>, Cplx<T>)> {
        self.modes.iter().filter(|m| m.c_i.norm() > T::zero()).map(|m| (m.c_i, m.rate)).collect()
    }

    pub fn correlation(&self, t: T) -> Cplx<T> {
        let i = Cplx::new(T::zero(), T::one());
        self.modes
            .iter()
            .fold(Cplx::new(T::zero(), T::zero()), |acc, m| acc + (m.c_r + i * m.c_i) * (-m.rate * t).exp())
    }

    /// Exact discrete-mode kernel `Σ_j g_j² e^{-iω_j t}`.
    pub fn from_discrete_modes(couplings: &[T], frequencies: &[T]) -> Self {
        let terms: Vec<ExpTerm<T>> = couplings
            .iter()
            .zip(frequencies)
            .map(|(&g, &w)| ExpTerm { amplitude: Cplx::new(g * g, T::zero()), rate: Cplx::new(T::zero(), w) })
            .collect();
        split_terms(&terms)
    }
}

fn same_rate<T: Real>(a: Cplx<T>, b: Cplx<T>) -> bool {
    (a - b).norm() <= T::lit(1e-12) * a.norm().max(b.norm()).max(T::min_positive_value())
}

/// Splits complex exponentials into hierarchy modes.
///
/// `a e^{-γt}` contributes `(c^R, c^I) = (a/2, -ia/2)` at rate `γ` and
/// `(ā/2, iā/2)` at rate `γ̄`; identical rates are merged, so real rates
/// give `c^R = Re a`, `c^I = Im a`.
pub fn split_ri<T: Real>(fit: &ExponentialFit<T>) -> HeomCoefficients<T> {
    split_terms(&fit.terms)
}

fn split_terms<T: Real>(terms: &[ExpTerm<T>]) -> HeomCoefficients<T> {
    let half = T::lit(0.5);
    let i = Cplx::new(T::zero(), T::one());
    let mut modes: Vec<HeomMode<T>> = Vec::new();
    let mut add = |rate: Cplx<T>, c_r: Cplx<T>, c_i: Cplx<T>| {
        if let Some(m) = modes.iter_mut().find(|m| same_rate(m.rate, rate)) {
            m.c_r = m.c_r + c_r;
            m.c_i = m.c_i + c_i;
        } else {
            modes.push(HeomMode { rate, c_r, c_i });
        }
    };
    for term in terms {
        let a = term.amplitude;
        add(term.rate, a * half, -i * a * half);
        add(term.rate.conj(), a.conj() * half, i * a.conj() * half);
    }
    let mut modes: Vec<HeomMode<T>> = modes
        .into_iter()
        .map(|mut m| {
            // merged real-rate pairs are real up to rounding
            if m.rate.im == T::zero() {
                m.c_r.im = T::zero();
                m.c_i.im = T::zero();
            }
            m
        })
        .filter(|m| m.c_r.norm() > T::zero() || m.c_i.norm() > T::zero())
        .collect();
    modes.sort_by(|a, b| {
        (a.rate.re, a.rate.im).partial_cmp(&(b.rate.re, b.rate.im)).unwrap_or(std::cmp::Ordering::Equal)
    });
    HeomCoefficients { modes }
}

/// `J_rec(ω) = Re Σ_k a_k / (γ_k - iω)`, the real part of the one-sided
/// Fourier transform `∫_0^∞ C(t) e^{iωt} dt` of the fitted kernel.
pub fn reconstruct_sd<T: Real>(fit: &ExponentialFit<T>, omegas: &[T]) -> Result<Vec<T>> {
    if let Some(bad) = fit.terms.iter().find(|t| !(t.rate.re > T::zero())) {
        return Err(Error::Fit(format!("non-decaying term with rate {} has no one-sided transform", bad.rate)));
    }
    Ok(omegas
        .iter()
        .map(|&w| {
            fit.terms
                .iter()
                .map(|t| (t.amplitude / (t.rate - Cplx::new(T::zero(), w))).re)
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(terms: &[(Cplx<f64>, Cplx<f64>)], t_fit: f64, n: usize) -> SampleSeries<f64> {
        SampleSeries::from_fn(t_fit, n, |t| terms.iter().map(|&(a, g)| a * (-g * t).exp()).sum()).unwrap()
    }

    fn c(re: f64, im: f64) -> Cplx<f64> {
        Cplx::new(re, im)
    }

    #[test]
    fn sampling_grid() {
        let m = SpectralDensityModel::ohmic(0.39, 2.0, 1.0);
        let s = sample_correlation(&m, f64::INFINITY, 10.0, 2, &BathOptions::default()).unwrap();
        assert_eq!(s.values.len(), 2);
        assert_eq!(s.times(), vec![0.0, 10.0]);
        let s = sample_correlation(&m, f64::INFINITY, 10.0, 41, &BathOptions::default()).unwrap();
        assert_eq!(s.dt, 10.0 / 40.0);
        assert!((s.values[0].re - 0.39 / std::f64::consts::PI * 4.0).abs() < 1e-15);
    }

    #[test]
    fn recovers_two_real_exponentials() {
        let s = synthetic(&[(c(1.0, 0.0), c(1.0, 0.0)), (c(0.5, 0.0), c(2.0, 0.0))], 8.0, 81);
        let fit = prony_fit(&s, 2).unwrap();
        let mut terms = fit.terms.clone();
        terms.sort_by(|a, b| a.rate.re.partial_cmp(&b.rate.re).unwrap());
        assert!((terms[0].rate - c(1.0, 0.0)).norm() < 1e-8);
        assert!((terms[1].rate - c(2.0, 0.0)).norm() < 1e-8);
        assert!((terms[0].amplitude - c(1.0, 0.0)).norm() < 1e-8);
        assert!((terms[1].amplitude - c(0.5, 0.0)).norm() < 1e-8);
        assert!(fit.residual.max_abs < 1e-10);
    }

    #[test]
    fn recovers_complex_rate() {
        let s = synthetic(&[(c(1.0, 0.0), c(1.0, 3.0))], 4.0, 64);
        let fit = prony_fit(&s, 1).unwrap();
        assert!((fit.terms[0].rate - c(1.0, 3.0)).norm() < 1e-8);
    }

    #[test]
    fn discards_growing_roots() {
        let s = synthetic(&[(c(1.0, 0.0), c(0.5, 0.0)), (c(1e-3, 0.0), c(-0.2, 0.0))], 10.0, 60);
        let fit = prony_fit(&s, 2).unwrap();
        assert_eq!(fit.discarded, 1);
        assert_eq!(fit.effective_order, 1);
        assert!(fit.terms.iter().all(|t| t.rate.re >= 0.0));
    }

    #[test]
    fn rank_deficient_data_reduces_order() {
        let s = synthetic(&[(c(2.0, 0.0), c(0.3, 0.0))], 10.0, 60);
        let fit = prony_fit(&s, 4).unwrap();
        assert_eq!(fit.effective_order, 1);
        assert_eq!(fit.requested_order, 4);
        assert!(fit.residual.max_abs < 1e-10);
    }

    #[test]
    fn rejects_oversized_order() {
        let s = synthetic(&[(c(1.0, 0.0), c(1.0, 0.0))], 1.0, 5);
        assert!(prony_fit(&s, 3).is_err());
    }

    #[test]
    fn split_real_term_has_no_imaginary_part() {
        let fit = ExponentialFit {
            terms: vec![ExpTerm { amplitude: c(0.7, 0.0), rate: c(1.5, 0.0) }],
            t_fit: 1.0,
            samples: 2,
            requested_order: 1,
            effective_order: 1,
            discarded: 0,
            residual: FitResidual::default(),
        };
        let co = split_ri(&fit);
        assert!(co.imag_list().is_empty());
        assert_eq!(co.real_list(), vec![(c(0.7, 0.0), c(1.5, 0.0))]);
    }

    #[test]
    fn split_imaginary_amplitude_lands_in_imag_list() {
        let mut fit = prony_fit(&synthetic(&[(c(1.0, 0.0), c(1.0, 0.0))], 1.0, 8), 1).unwrap();
        fit.terms = vec![ExpTerm { amplitude: c(0.0, 1.0), rate: c(2.0, 0.0) }];
        let co = split_ri(&fit);
        assert!(co.real_list().is_empty());
        assert_eq!(co.imag_list(), vec![(c(1.0, 0.0), c(2.0, 0.0))]);
    }

    #[test]
    fn reconstruction_single_term_at_zero_frequency() {
        let mut fit = prony_fit(&synthetic(&[(c(1.0, 0.0), c(1.0, 0.0))], 1.0, 8), 1).unwrap();
        fit.terms = vec![ExpTerm { amplitude: c(0.3, 0.4), rate: c(2.0, 1.0) }];
        let j = reconstruct_sd(&fit, &[0.0]).unwrap();
        assert!((j[0] - (c(0.3, 0.4) / c(2.0, 1.0)).re).abs() < 1e-15);
        fit.terms[0].rate = c(0.0, 1.0);
        assert!(reconstruct_sd(&fit, &[0.0]).is_err());
    }

    #[test]
    fn ohmic_fit_reconstructs_spectral_density() {
        let m = SpectralDensityModel::ohmic(0.39, 2.0, 1.0);
        let s = sample_correlation(&m, f64::INFINITY, 40.0, 801, &BathOptions::default()).unwrap();
        let fit = prony_fit(&s, 8).unwrap();
        let grid: Vec<f64> = (0..=38).map(|i| 0.2 + 0.1 * i as f64).collect();
        let rec = reconstruct_sd(&fit, &grid).unwrap();
        for (&w, &jr) in grid.iter().zip(&rec) {
            let j = m.eval_j(w).unwrap();
            assert!(((jr - j) / j).abs() < 0.05, "omega = {w}: {jr} vs {j}");
        }
    }

    #[test]
    fn fit_error_metrics() {
        let s = synthetic(&[(c(1.0, 0.0), c(1.0, 0.0))], 3.0, 31);
        let mut fit = prony_fit(&s, 1).unwrap();
        assert!(fit.residual.max_abs < 1e-12);
        fit.terms.push(ExpTerm { amplitude: c(1e-3, 0.0), rate: c(0.0, 0.0) });
        let r = fit_error(&fit, &s);
        assert!((r.max_abs - 1e-3).abs() < 1e-12);
        let num: f64 = s.values.iter().map(|_| 1e-6).sum();
        let den: f64 = s.values.iter().map(|v| v.norm_sqr()).sum();
        assert!((r.rel_l2 - (num / den).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn fit_record_round_trips_through_json() {
        let fit = prony_fit(&synthetic(&[(c(1.0, 0.5), c(0.4, 2.0))], 5.0, 40), 1).unwrap();
        let back = ExponentialFit::<f64>::from_json(&fit.to_json()).unwrap();
        assert_eq!(back, fit);
    }

    #[test]
    fn discrete_modes_are_exact() {
        let co = HeomCoefficients::from_discrete_modes(&[0.1, 0.2], &[0.8, 1.3]);
        for k in 0..20 {
            let t = 0.37 * k as f64;
            let want = c(0.01, 0.0) * c(0.0, -0.8 * t).exp() + c(0.04, 0.0) * c(0.0, -1.3 * t).exp();
            assert!((co.correlation(t) - want).norm() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn split_round_trip(
            a_re in -2.0f64..2.0, a_im in -2.0f64..2.0,
            g_re in 0.01f64..3.0, g_im in -5.0f64..5.0,
            b_re in -2.0f64..2.0, h_re in 0.01f64..3.0,
            t in 0.0f64..20.0,
        ) {
            let terms = vec![
                ExpTerm { amplitude: c(a_re, a_im), rate: c(g_re, g_im) },
                ExpTerm { amplitude: c(b_re, 0.0), rate: c(h_re, 0.0) },
            ];
            let fit = ExponentialFit {
                terms, t_fit: 1.0, samples: 2, requested_order: 2, effective_order: 2, discarded: 0,
                residual: FitResidual::default(),
            };
            let co = split_ri(&fit);
            prop_assert!((co.correlation(t) - fit.eval(t)).norm() < 1e-12);
        }

        #[test]
        fn prony_exact_recovery(
            g1 in 0.2f64..1.0, w1 in -2.0f64..2.0, a1 in 0.2f64..2.0,
            dg in 0.3f64..1.0, w2 in -2.0f64..2.0, a2 in 0.2f64..2.0,
        ) {
            let truth = [(c(a1, 0.0), c(g1, w1)), (c(0.0, a2), c(g1 + dg, w2))];
            let s = synthetic(&truth, 6.0, 60);
            let fit = prony_fit(&s, 2).unwrap();
            for (a, g) in truth {
                let hit = fit.terms.iter().any(|t| (t.rate - g).norm() < 1e-8 && (t.amplitude - a).norm() < 1e-8);
                prop_assert!(hit, "missing term {a} e^(-{g} t) in {:?}", fit.terms);
            }
        }
    }
}
