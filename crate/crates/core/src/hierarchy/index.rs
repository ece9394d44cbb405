use std::collections::HashMap;

use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

/// All multi-indices `n ∈ ℕ^K` with `Σ n_k ≤ N_c`, ordered by level, with
/// `±e_k` neighbour maps.
#[derive(Clone, Debug)]
pub struct HierarchyIndexSet {
    modes: usize,
    cutoff: usize,
    levels: Vec<u16>,
    up: Vec<u32>,
    down: Vec<u32>,
}

/// `binomial(n, k)`, saturating on overflow.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

impl HierarchyIndexSet {
    /// Enumerates the index set, refusing sets larger than `cap`.
    pub fn enumerate(modes: usize, cutoff: usize, cap: usize) -> Result<Self> {
        let size = binomial(modes + cutoff, cutoff);
        if size > cap || cutoff > u16::MAX as usize {
            return Err(Error::HierarchyTooLarge { size, cap });
        }
        let mut list: Vec<Vec<u16>> = vec![vec![0; modes]];
        let mut frontier = list.clone();
        let mut lookup: HashMap<Vec<u16>, usize> = HashMap::with_capacity(size);
        lookup.insert(vec![0; modes], 0);
        for _ in 0..cutoff {
            let mut next = Vec::new();
            for n in &frontier {
                // raise only from the last nonzero mode onward so each index is built once
                let first = n.iter().rposition(|&v| v > 0).unwrap_or(0);
                for k in first..modes {
                    let mut m = n.clone();
                    m[k] += 1;
                    lookup.insert(m.clone(), list.len() + next.len());
                    next.push(m);
                }
            }
            list.extend(next.iter().cloned());
            frontier = next;
        }
        debug_assert_eq!(list.len(), size);
        let mut up = vec![NONE; size * modes];
        let mut down = vec![NONE; size * modes];
        for (i, n) in list.iter().enumerate() {
            for k in 0..modes {
                let mut m = n.clone();
                m[k] += 1;
                if let Some(&j) = lookup.get(&m) {
                    up[i * modes + k] = j as u32;
                    down[j * modes + k] = i as u32;
                }
            }
        }
        let levels = list.concat();
        Ok(HierarchyIndexSet { modes, cutoff, levels, up, down })
    }

    pub fn len(&self) -> usize {
        self.levels.len().checked_div(self.modes).unwrap_or(1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Occupation of each mode at index `i`.
    pub fn index(&self, i: usize) -> &[u16] {
        &self.levels[i * self.modes..(i + 1) * self.modes]
    }

    pub fn level(&self, i: usize) -> usize {
        self.index(i).iter().map(|&v| v as usize).sum()
    }

    /// Position of `n + e_k`, if inside the truncation.
    pub fn raise(&self, i: usize, k: usize) -> Option<usize> {
        let j = self.up[i * self.modes + k];
        (j != NONE).then_some(j as usize)
    }

    /// Position of `n - e_k`, if `n_k > 0`.
    pub fn lower(&self, i: usize, k: usize) -> Option<usize> {
        let j = self.down[i * self.modes + k];
        (j != NONE).then_some(j as usize)
    }

    /// Position of an explicit multi-index.
    pub fn find(&self, n: &[u16]) -> Option<usize> {
        (0..self.len()).find(|&i| self.index(i) == n)
    }
}
