//! H = ω_a|e⟩⟨e| + Σω_λ a†_λa_λ + σ_x ⊗ Σ η_λ(a_λ + a†_λ) on a truncated basis
//! (no rotating-wave approximation; elements leaving the truncation are dropped).

use nalgebra::DMatrix;

use super::basis::{BasisState, QubitLevel, TruncatedBasis};
use crate::error::Result;
use crate::spectrum::DiscreteBathModel;

/// Sparse real symmetric Hamiltonian split into its parts.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    basis: TruncatedBasis,
    omega_a: f64,
    mode_freqs: Vec<f64>,
    /// ⟨i|H_S|i⟩.
    pub system_diag: Vec<f64>,
    /// ⟨i|H_B|i⟩.
    pub bath_diag: Vec<f64>,
    /// Nonzero ⟨i|H_SB|j⟩ with i < j.
    pub coupling: Vec<(usize, usize, f64)>,
}

pub fn build_hamiltonian(model: &DiscreteBathModel, max_quanta: usize) -> Result<Hamiltonian> {
    let basis = TruncatedBasis::new(model.len(), max_quanta)?;
    let mode_freqs: Vec<f64> = model.modes.iter().map(|m| m.0).collect();
    let mut system_diag = Vec::with_capacity(basis.dim());
    let mut bath_diag = Vec::with_capacity(basis.dim());
    let mut coupling = Vec::new();
    for (i, s) in basis.states().iter().enumerate() {
        system_diag.push(if s.level == QubitLevel::Excited { model.omega_a } else { 0.0 });
        bath_diag.push(s.quanta.iter().map(|&q| mode_freqs[q as usize]).sum());
        // σ_x a†_λ: |s, n⟩ → √(n_λ+1)|s̄, n + 1_λ⟩; the a_λ half is the transpose
        for (lambda, &(_, eta)) in model.modes.iter().enumerate() {
            let target = BasisState { level: s.level.flipped(), quanta: s.with_added(lambda as u16) };
            if let Some(j) = basis.index_of(&target) {
                let amp = eta * ((s.occupation(lambda) + 1) as f64).sqrt();
                coupling.push((i.min(j), i.max(j), amp));
            }
        }
    }
    coupling.sort_by_key(|a| (a.0, a.1));
    Ok(Hamiltonian { basis, omega_a: model.omega_a, mode_freqs, system_diag, bath_diag, coupling })
}

impl Hamiltonian {
    pub fn basis(&self) -> &TruncatedBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_a
    }

    pub fn mode_freqs(&self) -> &[f64] {
        &self.mode_freqs
    }

    pub fn element(&self, i: usize, j: usize) -> f64 {
        let mut v = 0.0;
        if i == j {
            v += self.system_diag[i] + self.bath_diag[i];
        }
        let key = (i.min(j), i.max(j));
        if let Ok(k) = self.coupling.binary_search_by(|c| (c.0, c.1).cmp(&key)) {
            v += self.coupling[k].2;
        }
        v
    }

    /// Dense restriction to `indices` (all of H when `indices` covers the basis).
    pub fn dense_block(&self, indices: &[usize], include_coupling: bool) -> DMatrix<f64> {
        let pos = self.positions(indices);
        let n = indices.len();
        let mut m = DMatrix::zeros(n, n);
        for (a, &i) in indices.iter().enumerate() {
            m[(a, a)] = self.system_diag[i] + self.bath_diag[i];
        }
        if include_coupling {
            for &(i, j, v) in &self.coupling {
                if let (Some(a), Some(b)) = (pos[i], pos[j]) {
                    m[(a, b)] = v;
                    m[(b, a)] = v;
                }
            }
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.dim()).collect();
        self.dense_block(&all, true)
    }

    /// Symmetric coupling entries of a block in local indices, both triangles.
    pub(crate) fn sparse_coupling_block(&self, indices: &[usize]) -> Vec<(usize, usize, f64)> {
        let pos = self.positions(indices);
        let mut out = Vec::new();
        for &(i, j, v) in &self.coupling {
            if let (Some(a), Some(b)) = (pos[i], pos[j]) {
                out.push((a, b, v));
                out.push((b, a, v));
            }
        }
        out.sort_by_key(|x| (x.0, x.1));
        out
    }

    fn positions(&self, indices: &[usize]) -> Vec<Option<usize>> {
        let mut pos = vec![None; self.dim()];
        for (a, &i) in indices.iter().enumerate() {
            pos[i] = Some(a);
        }
        pos
    }
}
