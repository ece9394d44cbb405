//! Special functions: exponential integral, Bessel `J_n` and `K_0`.

use crate::error::{Error, Result};
use crate::scalar::Real;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `E1(z) = ∫_z^∞ e^{-x}/x dx` for `z > 0`.
///
/// Power series for `z <= 1`, modified Lentz continued fraction above.
pub fn exp1<T: Real>(z: T) -> Result<T> {
    if !(z > T::zero()) || !z.is_finite() {
        return Err(Error::domain("exp1", format!("argument must be positive and finite, got {z}")));
    }
    let eps = T::epsilon();
    if z <= T::one() {
        let mut sum = T::zero();
        let mut term = T::one();
        let mut k = 1usize;
        loop {
            let kf = T::from_count(k);
            term = -term * z / kf;
            let contrib = -term / kf;
            sum = sum + contrib;
            if contrib.abs() <= eps * sum.abs() || k > 200 {
                break;
            }
            k += 1;
        }
        Ok(-T::lit(EULER_GAMMA) - z.ln() + sum)
    } else {
        let tiny = T::min_positive_value() / eps;
        let mut b = z + T::one();
        let mut c = T::one() / tiny;
        let mut d = T::one() / b;
        let mut h = d;
        for i in 1..=500usize {
            let a = -T::from_count(i * i);
            b = b + T::lit(2.0);
            d = T::one() / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h = h * del;
            if (del - T::one()).abs() <= eps {
                return Ok(h * (-z).exp());
            }
        }
        Err(Error::domain("exp1", "continued fraction failed to converge"))
    }
}

/// Bessel function of the first kind of integer order, `J_n(x)`.
///
/// Evaluated from `J_n(x) = (1/2π) ∫_0^{2π} cos(nθ - x sin θ) dθ` with the
/// trapezoid rule, which converges geometrically for a periodic analytic
/// integrand once the node count exceeds `|x| + |n|`. Absolute accuracy is
/// close to machine precision; relative accuracy is lost deep in the
/// evanescent region `|n| >> |x|` where `J_n` itself is tiny.
pub fn bessel_j<T: Real>(n: i64, x: T) -> T {
    let scale = x.abs().to_f64().unwrap_or(0.0) + n.unsigned_abs() as f64;
    let nodes = (1.3 * scale).ceil() as usize + 40;
    let step = T::TAU() / T::from_count(nodes);
    let order = T::from_i64(n).expect("order representable");
    let mut sum = T::zero();
    for j in 0..nodes {
        let theta = step * T::from_count(j);
        sum = sum + (order * theta - x * theta.sin()).cos();
    }
    sum / T::from_count(nodes)
}

/// Modified Bessel function of the second kind of order zero, `K_0(x)`, `x > 0`.
///
/// Trapezoid rule on `K_0(x) = ∫_0^∞ exp(-x cosh t) dt`; the doubly
/// exponential decay of the integrand gives full precision with step 0.2.
pub fn bessel_k0<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::domain("bessel_k0", format!("argument must be positive and finite, got {x}")));
    }
    let h = T::lit(0.2);
    // scaled by e^{x} to avoid underflow for large x
    let mut sum = T::lit(0.5);
    let mut k = 1usize;
    loop {
        let t = h * T::from_count(k);
        let term = (-x * (t.cosh() - T::one())).exp();
        sum = sum + term;
        if term <= T::epsilon() * sum * T::lit(1e-2) || k > 10_000 {
            break;
        }
        k += 1;
    }
    Ok(h * sum * (-x).exp())
}
