//! Adaptive Dormand–Prince 5(4) integrator for complex linear systems.
//!
//! Steps are clamped so that every requested output time and every
//! breakpoint of the right-hand side is hit exactly; piecewise-constant
//! generators therefore never straddle a discontinuity.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

/// A first-order system `dy/dt = f(t, y)` over complex state vectors.
pub trait OdeSystem<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn rhs(&self, t: T, y: &[Cplx<T>], dy: &mut [Cplx<T>]);

    /// Right-hand side restricted to the integration segment containing
    /// `segment_mid`. Piecewise systems override this so that stages landing
    /// exactly on a breakpoint still see the segment being integrated.
    fn rhs_on_segment(&self, t: T, _segment_mid: T, y: &[Cplx<T>], dy: &mut [Cplx<T>]) {
        self.rhs(t, y, dy)
    }

    /// Times at which the right-hand side is discontinuous.
    fn breakpoints(&self) -> Vec<T> {
        Vec::new()
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct OdeOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    /// Upper bound on the step; the stiffness escape hatch.
    pub max_step: T,
    pub min_step: T,
    pub max_steps: usize,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        OdeOptions {
            abs_tol: T::lit(1e-8),
            rel_tol: T::lit(1e-6),
            max_step: T::infinity(),
            min_step: T::lit(1e-12),
            max_steps: 5_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, serde::Serialize, serde::Deserialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

/// Failure carrying the time the integration reached.
#[derive(Debug, Clone)]
pub struct OdeFailure<T> {
    pub error: Error,
    pub reached: T,
    pub stats: OdeStats,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus embedded fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Workspace<T> {
    k: [Vec<Cplx<T>>; 7],
    tmp: Vec<Cplx<T>>,
    y_new: Vec<Cplx<T>>,
}

fn axpy_stage<T: Real>(out: &mut [Cplx<T>], y: &[Cplx<T>], h: T, terms: &[(f64, &[Cplx<T>])]) {
    let coeffs: Vec<(T, &[Cplx<T>])> = terms.iter().map(|&(c, k)| (h * T::lit(c), k)).collect();
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = y[i];
        for (c, k) in &coeffs {
            acc = acc + k[i] * *c;
        }
        *o = acc;
    }
}

/// Integrates `system` from `t0` with state `y` (updated in place), calling
/// `observe` at every time in `outputs` (sorted, each `>= t0`). An output
/// equal to `t0` is reported before stepping.
pub fn integrate<T, S, F>(
    system: &S,
    t0: T,
    y: &mut Vec<Cplx<T>>,
    outputs: &[T],
    opts: &OdeOptions<T>,
    mut observe: F,
) -> std::result::Result<OdeStats, OdeFailure<T>>
where
    T: Real,
    S: OdeSystem<T> + ?Sized,
    F: FnMut(T, &[Cplx<T>]),
{
    let n = system.dim();
    assert_eq!(y.len(), n, "state dimension mismatch");
    let mut stats = OdeStats::default();
    let mut ws = Workspace {
        k: std::array::from_fn(|_| vec![Cplx::zero(); n]),
        tmp: vec![Cplx::zero(); n],
        y_new: vec![Cplx::zero(); n],
    };
    let last = outputs.iter().copied().fold(t0, |a, b| a.max(b));
    let mut stops: Vec<T> = system.breakpoints().into_iter().filter(|&b| b > t0 && b < last).collect();
    stops.extend(outputs.iter().copied().filter(|&o| o > t0));
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stops.dedup();
    let is_output = |t: T| outputs.contains(&t);

    for &o in outputs {
        if o == t0 {
            observe(t0, y);
        }
    }

    let mut t = t0;
    let mut h = T::zero();
    let mut fsal_valid = false;
    for &stop in &stops {
        let mid = T::lit(0.5) * (t + stop);
        if h == T::zero() {
            h = initial_step(system, t, mid, y, stop - t, opts, &mut ws, &mut stats);
        }
        while t < stop {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(OdeFailure {
                    error: Error::TooManySteps { t: t.to_f64().unwrap_or(f64::NAN), max_steps: opts.max_steps },
                    reached: t,
                    stats,
                });
            }
            let remaining = stop - t;
            let mut step = h.min(opts.max_step);
            let landing = step >= remaining * T::lit(1.0 - 1e-10);
            if landing {
                step = remaining;
            }
            if !fsal_valid {
                system.rhs_on_segment(t, mid, y, &mut ws.k[0]);
                stats.rhs_evaluations += 1;
            }
            let err = dopri_step(system, t, mid, y, step, &mut ws, opts);
            stats.rhs_evaluations += 6;
            if err <= T::one() {
                t = if landing { stop } else { t + step };
                std::mem::swap(y, &mut ws.y_new);
                ws.k.swap(0, 6);
                fsal_valid = true;
                stats.accepted += 1;
                let factor = if err == T::zero() {
                    T::lit(5.0)
                } else {
                    (T::lit(0.9) * err.powf(T::lit(-0.2))).min(T::lit(5.0))
                };
                if !landing {
                    h = step * factor;
                } else {
                    h = h.max(step * factor);
                }
            } else {
                stats.rejected += 1;
                fsal_valid = true;
                h = step * (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2));
                if h < opts.min_step {
                    return Err(OdeFailure {
                        error: Error::StepUnderflow {
                            t: t.to_f64().unwrap_or(f64::NAN),
                            h: h.to_f64().unwrap_or(f64::NAN),
                        },
                        reached: t,
                        stats,
                    });
                }
            }
        }
        // derivative jumps at breakpoints
        fsal_valid = false;
        if is_output(stop) {
            observe(stop, y);
        }
    }
    Ok(stats)
}

fn initial_step<T: Real, S: OdeSystem<T> + ?Sized>(
    system: &S,
    t: T,
    mid: T,
    y: &[Cplx<T>],
    span: T,
    opts: &OdeOptions<T>,
    ws: &mut Workspace<T>,
    stats: &mut OdeStats,
) -> T {
    system.rhs_on_segment(t, mid, y, &mut ws.k[0]);
    stats.rhs_evaluations += 1;
    let mut d0 = T::zero();
    let mut d1 = T::zero();
    for (yi, fi) in y.iter().zip(&ws.k[0]) {
        let sc = opts.abs_tol + opts.rel_tol * yi.norm();
        d0 = d0.max(yi.norm() / sc);
        d1 = d1.max(fi.norm() / sc);
    }
    let h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    h0.min(span).min(opts.max_step).max(opts.min_step)
}

/// One trial step; fills `ws.y_new` and the FSAL stage `ws.k[6]`. Returns the
/// scaled error norm (accept when `<= 1`).
fn dopri_step<T: Real, S: OdeSystem<T> + ?Sized>(
    system: &S,
    t: T,
    mid: T,
    y: &[Cplx<T>],
    h: T,
    ws: &mut Workspace<T>,
    opts: &OdeOptions<T>,
) -> T {
    let Workspace { k, tmp, y_new } = ws;
    let [k1, k2, k3, k4, k5, k6, k7] = k;
    axpy_stage(tmp, y, h, &[(A21, k1)]);
    system.rhs_on_segment(t + h * T::lit(C2), mid, tmp, k2);
    axpy_stage(tmp, y, h, &[(A31, k1), (A32, k2)]);
    system.rhs_on_segment(t + h * T::lit(C3), mid, tmp, k3);
    axpy_stage(tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
    system.rhs_on_segment(t + h * T::lit(C4), mid, tmp, k4);
    axpy_stage(tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
    system.rhs_on_segment(t + h * T::lit(C5), mid, tmp, k5);
    axpy_stage(tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
    system.rhs_on_segment(t + h, mid, tmp, k6);
    axpy_stage(y_new, y, h, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
    system.rhs_on_segment(t + h, mid, y_new, k7);
    let (e1, e3, e4, e5, e6, e7) = (T::lit(E1), T::lit(E3), T::lit(E4), T::lit(E5), T::lit(E6), T::lit(E7));
    let mut err = T::zero();
    for i in 0..y.len() {
        let e = (k1[i] * e1 + k3[i] * e3 + k4[i] * e4 + k5[i] * e5 + k6[i] * e6 + k7[i] * e7) * h;
        let sc = opts.abs_tol + opts.rel_tol * y[i].norm().max(y_new[i].norm());
        let r = e.norm() / sc;
        if !(r <= err) {
            err = if r.is_nan() { T::infinity() } else { r };
        }
    }
    err
}

/// Convenience wrapper returning the state at each output time.
pub fn solve<T: Real, S: OdeSystem<T> + ?Sized>(
    system: &S,
    t0: T,
    y0: Vec<Cplx<T>>,
    outputs: &[T],
    opts: &OdeOptions<T>,
) -> Result<Vec<Vec<Cplx<T>>>> {
    let mut y = y0;
    let mut out = Vec::with_capacity(outputs.len());
    integrate(system, t0, &mut y, outputs, opts, |_, s| out.push(s.to_vec())).map_err(|f| f.error)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    struct Rotor {
        freq: f64,
        decay: f64,
    }

    impl OdeSystem<f64> for Rotor {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[Cplx<f64>], dy: &mut [Cplx<f64>]) {
            dy[0] = y[0] * cplx(-self.decay, -self.freq);
        }
    }

    #[test]
    fn damped_rotation_matches_closed_form() {
        let sys = Rotor { freq: 3.0, decay: 0.2 };
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let opts = OdeOptions { abs_tol: 1e-11, rel_tol: 1e-11, ..OdeOptions::default() };
        let states = solve(&sys, 0.0, vec![cplx(1.0, 0.0)], &times, &opts).unwrap();
        for (t, s) in times.iter().zip(states) {
            let exact = cplx(-0.2 * t, -3.0 * t).exp();
            assert!((s[0] - exact).norm() < 1e-8, "t = {t}");
        }
    }

    struct Switch;

    impl OdeSystem<f64> for Switch {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, _y: &[Cplx<f64>], dy: &mut [Cplx<f64>]) {
            dy[0] = cplx(if t < 1.0 { 1.0 } else { -2.0 }, 0.0);
        }
        fn breakpoints(&self) -> Vec<f64> {
            vec![1.0]
        }
        fn rhs_on_segment(&self, _t: f64, mid: f64, y: &[Cplx<f64>], dy: &mut [Cplx<f64>]) {
            self.rhs(mid, y, dy)
        }
    }

    #[test]
    fn breakpoints_are_hit_exactly() {
        let states = solve(&Switch, 0.0, vec![cplx(0.0, 0.0)], &[2.0], &OdeOptions::default()).unwrap();
        assert!((states[0][0].re - (1.0 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn later_breakpoints_do_not_extend_the_run() {
        struct Bounded(std::sync::Mutex<f64>);
        impl OdeSystem<f64> for Bounded {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&self, t: f64, y: &[Cplx<f64>], dy: &mut [Cplx<f64>]) {
                let mut m = self.0.lock().unwrap();
                *m = m.max(t);
                dy[0] = y[0] * cplx(0.0, -1.0);
            }
            fn breakpoints(&self) -> Vec<f64> {
                vec![5.0]
            }
        }
        let sys = Bounded(std::sync::Mutex::new(0.0));
        solve(&sys, 0.0, vec![cplx(1.0, 0.0)], &[2.0], &OdeOptions::default()).unwrap();
        assert_eq!(*sys.0.lock().unwrap(), 2.0);
    }

    #[test]
    fn step_cap_reports_partial_progress() {
        let sys = Rotor { freq: 50.0, decay: 0.0 };
        let opts = OdeOptions { max_steps: 10, ..OdeOptions::default() };
        let mut y = vec![cplx(1.0, 0.0)];
        let mut seen = Vec::new();
        let fail = integrate(&sys, 0.0, &mut y, &[0.0, 0.01, 10.0], &opts, |t, _| seen.push(t)).unwrap_err();
        assert!(matches!(fail.error, Error::TooManySteps { .. }));
        assert!(fail.reached > 0.0 && fail.reached < 10.0);
        assert_eq!(seen, vec![0.0, 0.01]);
    }
}
