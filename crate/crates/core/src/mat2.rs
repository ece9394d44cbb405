//! Dense 2x2 complex matrices, the system-sized operators of a qubit.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::{cplx, Cplx, Real};

/// Row-major 2x2 complex matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2<T>(pub [Cplx<T>; 4]);

impl<T: Real> Mat2<T> {
    pub fn new(a: Cplx<T>, b: Cplx<T>, c: Cplx<T>, d: Cplx<T>) -> Self {
        Mat2([a, b, c, d])
    }

    pub fn from_real(a: T, b: T, c: T, d: T) -> Self {
        let z = T::zero();
        Mat2([cplx(a, z), cplx(b, z), cplx(c, z), cplx(d, z)])
    }

    pub fn zero() -> Self {
        Mat2([Cplx::zero(); 4])
    }

    pub fn identity() -> Self {
        Self::from_real(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn sigma_x() -> Self {
        Self::from_real(T::zero(), T::one(), T::one(), T::zero())
    }

    pub fn sigma_y() -> Self {
        let z = Cplx::zero();
        Mat2([z, cplx(T::zero(), -T::one()), cplx(T::zero(), T::one()), z])
    }

    pub fn sigma_z() -> Self {
        Self::from_real(T::one(), T::zero(), T::zero(), -T::one())
    }

    /// Projector onto the excited state (`<sigma_z> = +1`).
    pub fn excited() -> Self {
        Self::from_real(T::one(), T::zero(), T::zero(), T::zero())
    }

    pub fn from_slice(s: &[Cplx<T>]) -> Self {
        Mat2([s[0], s[1], s[2], s[3]])
    }

    pub fn trace(&self) -> Cplx<T> {
        self.0[0] + self.0[3]
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2([m[0].conj(), m[2].conj(), m[1].conj(), m[3].conj()])
    }

    pub fn scale(&self, s: Cplx<T>) -> Self {
        Mat2(self.0.map(|x| x * s))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        *self * *other + *other * *self
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.0.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> [T; 2] {
        let h = (*self + self.dagger()).scale(cplx(T::lit(0.5), T::zero()));
        let a = h.0[0].re;
        let d = h.0[3].re;
        let b = h.0[1];
        let mean = (a + d) / T::lit(2.0);
        let half = (a - d) / T::lit(2.0);
        let r = (half * half + b.norm_sqr()).sqrt();
        [mean - r, mean + r]
    }

    /// `Tr[self * rho]`.
    pub fn expect(&self, rho: &Self) -> Cplx<T> {
        (*self * *rho).trace()
    }
}

impl<T: Real> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Mat2([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
    }
}

impl<T: Real> AddAssign for Mat2<T> {
    fn add_assign(&mut self, o: Self) {
        for (x, y) in self.0.iter_mut().zip(o.0) {
            *x = *x + y;
        }
    }
}

impl<T: Real> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Mat2([a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]])
    }
}

impl<T: Real> Neg for Mat2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Mat2(self.0.map(|x| -x))
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Mat2([
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ])
    }
}

impl<T: Real> One for Mat2<T> {
    fn one() -> Self {
        Self::identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let x = Mat2::<f64>::sigma_x();
        let y = Mat2::<f64>::sigma_y();
        let z = Mat2::<f64>::sigma_z();
        let i2 = cplx(0.0, 2.0);
        assert_eq!(x.commutator(&y), z.scale(i2));
        assert_eq!(x * x, Mat2::identity());
        assert_eq!(x.anticommutator(&z), Mat2::zero());
    }

    #[test]
    fn hermitian_spectrum() {
        let m = Mat2::<f64>::sigma_x().scale(cplx(0.3, 0.0)) + Mat2::excited();
        let [lo, hi] = m.hermitian_eigenvalues();
        assert!((lo + hi - 1.0).abs() < 1e-14);
        assert!((lo * hi + 0.09).abs() < 1e-14);
    }
}
