use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fitting::HeomCoefficients;
use crate::mat2::Mat2;
use crate::scalar::{Cplx, Real};

use super::index::HierarchyIndexSet;
use super::system::SystemModel;

/// Contribution of ADO `src` to the derivative of its owner:
/// `d ρ̂ += S (left ρ̂_src) + (right ρ̂_src) S`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Link<T> {
    pub src: u32,
    pub left: Cplx<T>,
    pub right: Cplx<T>,
}

/// Linear HEOM action on a flat vector of scaled ADOs.
///
/// With `ρ^n = Π_k √(n_k! s_k^{n_k}) ρ̂^n` and `s_k = |c^R_k| + |c^I_k|`,
///
/// `dρ̂^n/dt = -i[H, ρ̂^n] - Σ n_k γ_k ρ̂^n - i Σ √((n_k+1) s_k) S^× ρ̂^{n+e_k}
///            + Σ √(n_k/s_k) (-i c^R_k S^× + c^I_k S^∘) ρ̂^{n-e_k}`.
///
/// ADO `i` occupies entries `4i..4i+4` (row-major 2x2).
#[derive(Clone, Debug)]
pub struct HeomGenerator<T> {
    pub system: SystemModel<T>,
    pub coefficients: HeomCoefficients<T>,
    index: Arc<HierarchyIndexSet>,
    damping: Vec<Cplx<T>>,
    link_start: Vec<usize>,
    links: Vec<Link<T>>,
    partner: Vec<usize>,
}

impl<T: Real> HeomGenerator<T> {
    pub fn new(system: SystemModel<T>, coefficients: HeomCoefficients<T>, cutoff: usize, cap: usize) -> Result<Self> {
        system.validate()?;
        let modes = &coefficients.modes;
        for m in modes {
            if !(m.rate.re >= T::zero()) {
                return Err(Error::InvalidModel(format!("hierarchy mode with growing rate {}", m.rate)));
            }
        }
        let index = Arc::new(HierarchyIndexSet::enumerate(modes.len(), cutoff, cap)?);
        let scale: Vec<T> = modes.iter().map(|m| m.c_r.norm() + m.c_i.norm()).collect();
        if let Some(k) = scale.iter().position(|&s| !(s > T::zero())) {
            return Err(Error::InvalidModel(format!("hierarchy mode {k} has zero weight")));
        }
        let i = Cplx::new(T::zero(), T::one());
        let n = index.len();
        let mut damping = Vec::with_capacity(n);
        let mut link_start = Vec::with_capacity(n + 1);
        let mut links = Vec::new();
        for a in 0..n {
            let occ = index.index(a);
            let mut d = Cplx::new(T::zero(), T::zero());
            link_start.push(links.len());
            for (k, m) in modes.iter().enumerate() {
                let nk = T::from_count(occ[k] as usize);
                d = d + m.rate * nk;
                if let Some(b) = index.raise(a, k) {
                    // -i a S^x: left -i a, right +i a
                    let f = ((nk + T::one()) * scale[k]).sqrt();
                    links.push(Link { src: b as u32, left: -i * f, right: i * f });
                }
                if let Some(b) = index.lower(a, k) {
                    let f = (nk / scale[k]).sqrt();
                    // (-i c^R S^x + c^I S^o) = (-i c^R + c^I) S. + (i c^R + c^I) .S
                    links.push(Link { src: b as u32, left: (-i * m.c_r + m.c_i) * f, right: (i * m.c_r + m.c_i) * f });
                }
            }
            damping.push(d);
        }
        link_start.push(links.len());
        let partner = conjugate_partners(&coefficients);
        Ok(HeomGenerator { system, coefficients, index, damping, link_start, links, partner })
    }

    pub fn index_set(&self) -> &HierarchyIndexSet {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of the flat state vector.
    pub fn dim(&self) -> usize {
        4 * self.index.len()
    }

    /// `dy = L y` for Hamiltonian `h`, writing (not accumulating) into `dy`.
    pub fn apply(&self, h: &Mat2<T>, y: &[Cplx<T>], dy: &mut [Cplx<T>]) {
        let s = &self.system.coupling;
        let mi = Cplx::new(T::zero(), -T::one());
        for a in 0..self.index.len() {
            let rho = Mat2::from_slice(&y[4 * a..4 * a + 4]);
            let mut out = (*h * rho - rho * *h).scale(mi) - rho.scale(self.damping[a]);
            let mut left = Mat2::zero();
            let mut right = Mat2::zero();
            for l in &self.links[self.link_start[a]..self.link_start[a + 1]] {
                let src = l.src as usize;
                let r = Mat2::from_slice(&y[4 * src..4 * src + 4]);
                left += r.scale(l.left);
                right += r.scale(l.right);
            }
            out += *s * left + right * *s;
            dy[4 * a..4 * a + 4].copy_from_slice(&out.0);
        }
    }

    /// Sparse matrix of the action for Hamiltonian `h`, as `(row, col, value)`.
    pub fn triplets(&self, h: &Mat2<T>) -> Vec<(usize, usize, Cplx<T>)> {
        let dim = self.dim();
        let mut out = Vec::new();
        let mut e = vec![Cplx::new(T::zero(), T::zero()); dim];
        let mut col = vec![Cplx::new(T::zero(), T::zero()); dim];
        for j in 0..dim {
            e[j] = Cplx::new(T::one(), T::zero());
            self.apply(h, &e, &mut col);
            for (r, v) in col.iter().enumerate() {
                if *v != Cplx::new(T::zero(), T::zero()) {
                    out.push((r, j, *v));
                }
            }
            e[j] = Cplx::new(T::zero(), T::zero());
        }
        out
    }

    /// Position of `n̄`, the index with conjugate-paired modes swapped.
    pub fn conjugate_index(&self, a: usize) -> usize {
        let occ = self.index.index(a);
        let mut swapped = vec![0u16; occ.len()];
        for (k, &p) in self.partner.iter().enumerate() {
            swapped[p] = occ[k];
        }
        self.index.find(&swapped).expect("conjugate index lies in the same truncation")
    }

    /// Largest deviation from the pattern `(ρ̂^n)† = ρ̂^{n̄}`.
    pub fn hermiticity_defect(&self, y: &[Cplx<T>]) -> T {
        let conj: Vec<usize> = self.conjugate_map();
        (0..self.len())
            .map(|a| {
                let m = Mat2::from_slice(&y[4 * a..4 * a + 4]);
                let b = conj[a];
                (m.dagger() - Mat2::from_slice(&y[4 * b..4 * b + 4])).max_abs()
            })
            .fold(T::zero(), T::max)
    }

    pub(crate) fn conjugate_map(&self) -> Vec<usize> {
        use std::collections::HashMap;
        let lookup: HashMap<&[u16], usize> = (0..self.len()).map(|a| (self.index.index(a), a)).collect();
        (0..self.len())
            .map(|a| {
                let occ = self.index.index(a);
                let mut swapped = vec![0u16; occ.len()];
                for (k, &p) in self.partner.iter().enumerate() {
                    swapped[p] = occ[k];
                }
                lookup[swapped.as_slice()]
            })
            .collect()
    }
}

/// Mode `k'` with `γ_{k'} = γ̄_k` and conjugate weights (self for real modes).
fn conjugate_partners<T: Real>(co: &HeomCoefficients<T>) -> Vec<usize> {
    let close = |a: Cplx<T>, b: Cplx<T>| (a - b).norm() <= T::lit(1e-10) * a.norm().max(b.norm()).max(T::one());
    co.modes
        .iter()
        .enumerate()
        .map(|(k, m)| {
            co.modes
                .iter()
                .position(|o| close(o.rate, m.rate.conj()) && close(o.c_r, m.c_r.conj()) && close(o.c_i, m.c_i.conj()))
                .unwrap_or(k)
        })
        .collect()
}
