//! Qubit ⊗ truncated Fock basis: |s, n⟩ with Σn_λ ≤ max_quanta.

use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QubitLevel {
    Ground,
    Excited,
}

impl QubitLevel {
    pub fn flipped(self) -> Self {
        match self {
            QubitLevel::Ground => QubitLevel::Excited,
            QubitLevel::Excited => QubitLevel::Ground,
        }
    }
}

/// One basis state; `quanta` lists occupied mode indices with multiplicity,
/// sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub level: QubitLevel,
    pub quanta: Vec<u16>,
}

impl BasisState {
    pub fn total_quanta(&self) -> usize {
        self.quanta.len()
    }

    pub fn occupation(&self, mode: usize) -> usize {
        self.quanta.iter().filter(|&&q| q as usize == mode).count()
    }

    /// 0 for even, 1 for odd total excitation number (qubit + bath).
    pub fn parity(&self) -> usize {
        (self.quanta.len() + usize::from(self.level == QubitLevel::Excited)) % 2
    }

    pub(crate) fn with_added(&self, mode: u16) -> Vec<u16> {
        let mut q = self.quanta.clone();
        let pos = q.partition_point(|&x| x <= mode);
        q.insert(pos, mode);
        q
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedBasis {
    n_modes: usize,
    max_quanta: usize,
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

impl TruncatedBasis {
    pub fn new(n_modes: usize, max_quanta: usize) -> Result<Self> {
        if n_modes == 0 || n_modes > u16::MAX as usize {
            return Err(Error::domain(format!("mode count {n_modes} out of range")));
        }
        let mut bath = Vec::new();
        let mut current = Vec::new();
        for q in 0..=max_quanta {
            multisets(n_modes as u16, q, 0, &mut current, &mut bath);
        }
        let mut states = Vec::with_capacity(2 * bath.len());
        for level in [QubitLevel::Ground, QubitLevel::Excited] {
            for quanta in &bath {
                states.push(BasisState { level, quanta: quanta.clone() });
            }
        }
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(TruncatedBasis { n_modes, max_quanta, states, index })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn max_quanta(&self) -> usize {
        self.max_quanta
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &BasisState {
        &self.states[i]
    }

    pub fn index_of(&self, s: &BasisState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Basis indices of each parity sector, ascending.
    pub fn sectors(&self) -> [Vec<usize>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for (i, s) in self.states.iter().enumerate() {
            out[s.parity()].push(i);
        }
        out
    }
}

/// Sorted multisets of size `size` over 0..n starting at `from`.
fn multisets(n: u16, size: usize, from: u16, current: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
    if current.len() == size {
        out.push(current.clone());
        return;
    }
    for m in from..n {
        current.push(m);
        multisets(n, size, m, current, out);
        current.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn dimension_two_quanta() {
        for n in [1usize, 3, 10, 40] {
            let b = TruncatedBasis::new(n, 2).unwrap();
            assert_eq!(b.dim(), 2 * (1 + n + n * (n + 1) / 2));
            let [even, odd] = b.sectors();
            assert_eq!(even.len(), odd.len());
        }
    }

    #[test]
    fn complete_and_unique() {
        let b = TruncatedBasis::new(4, 3).unwrap();
        let set: HashSet<_> = b.states().iter().cloned().collect();
        assert_eq!(set.len(), b.dim());
        // C(n+q, q) bath states with at most q quanta
        assert_eq!(b.dim(), 2 * 35);
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
            assert!(s.quanta.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn occupations_and_parity() {
        let s = BasisState { level: QubitLevel::Excited, quanta: vec![2, 2] };
        assert_eq!(s.occupation(2), 2);
        assert_eq!(s.parity(), 1);
        assert_eq!(s.with_added(1), vec![1, 2, 2]);
        assert_eq!(s.with_added(3), vec![2, 2, 3]);
    }
}
