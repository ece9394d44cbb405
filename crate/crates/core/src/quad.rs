//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex-valued
//! integrands of a real variable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        QuadOptions { abs_tol: T::lit(1e-12), rel_tol: T::lit(1e-10), max_intervals: 200_000 }
    }
}

impl<T: Real> QuadOptions<T> {
    pub fn with_abs_tol(mut self, tol: T) -> Self {
        self.abs_tol = tol;
        self
    }
    pub fn with_rel_tol(mut self, tol: T) -> Self {
        self.rel_tol = tol;
        self
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: Cplx<T>,
    pub error: T,
    pub evaluations: usize,
}

struct Panel<T> {
    a: T,
    b: T,
    value: Cplx<T>,
    error: T,
}

impl<T: Real> PartialEq for Panel<T> {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl<T: Real> Eq for Panel<T> {}
impl<T: Real> PartialOrd for Panel<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Real> Ord for Panel<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.partial_cmp(&o.error).unwrap_or(Ordering::Equal)
    }
}

fn kronrod<T: Real, F: FnMut(T) -> Cplx<T>>(f: &mut F, a: T, b: T) -> (Cplx<T>, T) {
    let half = T::lit(0.5);
    let centre = half * (a + b);
    let hl = half * (b - a);
    let fc = f(centre);
    let mut rk = fc * T::lit(WGK[7]);
    let mut rg = fc * T::lit(WG[3]);
    let mut vals = [(Cplx::zero(), Cplx::zero()); 7];
    for j in 0..7 {
        let dx = hl * T::lit(XGK[j]);
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        vals[j] = (f1, f2);
        rk = rk + (f1 + f2) * T::lit(WGK[j]);
        if j % 2 == 1 {
            rg = rg + (f1 + f2) * T::lit(WG[j / 2]);
        }
    }
    let mean = rk * half;
    let mut asc = (fc - mean).norm() * T::lit(WGK[7]);
    for j in 0..7 {
        let (f1, f2) = vals[j];
        asc = asc + ((f1 - mean).norm() + (f2 - mean).norm()) * T::lit(WGK[j]);
    }
    let asc = asc * hl.abs();
    let value = rk * hl;
    let mut err = ((rk - rg) * hl).norm();
    if asc > T::zero() && err > T::zero() {
        let ratio = (T::lit(200.0) * err / asc).powf(T::lit(1.5));
        err = asc * ratio.min(T::one());
    }
    (value, err)
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T: Real, F: FnMut(T) -> Cplx<T>>(f: F, a: T, b: T, opts: &QuadOptions<T>) -> Result<QuadResult<T>> {
    integrate_panels(f, &[a, b], opts)
}

/// Integrates `f` over the union of consecutive panels delimited by
/// `breaks` (at least two points, non-decreasing). Pre-splitting at known
/// features (oscillation periods, peaks) lets the global refinement start
/// from a resolved partition.
pub fn integrate_panels<T: Real, F: FnMut(T) -> Cplx<T>>(
    mut f: F,
    breaks: &[T],
    opts: &QuadOptions<T>,
) -> Result<QuadResult<T>> {
    if breaks.len() < 2 {
        return Err(Error::domain("integrate_panels", "need at least two break points"));
    }
    let mut heap = BinaryHeap::with_capacity(breaks.len() * 2);
    let mut total = Cplx::zero();
    let mut total_err = T::zero();
    let mut evals = 0usize;
    for w in breaks.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (v, e) = kronrod(&mut f, w[0], w[1]);
        evals += 15;
        total = total + v;
        total_err = total_err + e;
        heap.push(Panel { a: w[0], b: w[1], value: v, error: e });
    }
    let tiny = T::epsilon() * T::lit(50.0);
    // panels too narrow to split further keep their value and error
    let mut frozen: Vec<Panel<T>> = Vec::new();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.norm());
        if total_err <= tol {
            break;
        }
        if heap.len() + frozen.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                re: total.re.to_f64().unwrap_or(f64::NAN),
                im: total.im.to_f64().unwrap_or(f64::NAN),
                error: total_err.to_f64().unwrap_or(f64::NAN),
                tolerance: tol.to_f64().unwrap_or(f64::NAN),
            });
        }
        let Some(p) = heap.pop() else { break };
        let mid = T::lit(0.5) * (p.a + p.b);
        if (p.b - p.a).abs() <= tiny * (p.a.abs() + p.b.abs()).max(T::one()) {
            frozen.push(p);
            continue;
        }
        let (v1, e1) = kronrod(&mut f, p.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, p.b);
        evals += 30;
        total = total - p.value + v1 + v2;
        total_err = total_err - p.error + e1 + e2;
        heap.push(Panel { a: p.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: p.b, value: v2, error: e2 });
    }
    // resum to shed drift from the running updates
    let all = heap.iter().chain(frozen.iter());
    let (value, error) = all.fold((Cplx::zero(), T::zero()), |(v, e), p| (v + p.value, e + p.error));
    Ok(QuadResult { value, error, evaluations: evals })
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, opts: &QuadOptions<T>) -> Result<(T, T)> {
    let r = integrate(|x| Cplx::new(f(x), T::zero()), a, b, opts)?;
    Ok((r.value.re, r.error))
}

/// Break points splitting `[a, b]` into panels no wider than `width`.
pub fn uniform_breaks<T: Real>(a: T, b: T, width: T) -> Vec<T> {
    let span = b - a;
    let n = if width > T::zero() && width.is_finite() {
        (span / width).ceil().to_usize().unwrap_or(1).max(1)
    } else {
        1
    };
    (0..=n).map(|k| a + span * T::from_count(k) / T::from_count(n)).collect()
}
