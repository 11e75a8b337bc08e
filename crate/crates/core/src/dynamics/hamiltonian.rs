//! Two-transmon Hamiltonian in the Fock basis `|n_F n_T⟩` (fixed ⊗ tunable).
//!
//! Both transmons are Duffing oscillators `f n − (|η|/2) n(n−1)`; the
//! coupling is excitation conserving, `g (a_F† a_T + a_F a_T†)`. All entries
//! are cyclic frequencies in GHz.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::device::{flux_frequency, CoupledPair};

pub type CMatrix = DMatrix<Complex64>;

/// Index bookkeeping for the truncated product space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub fixed_levels: usize,
    pub tunable_levels: usize,
}

impl Basis {
    pub fn for_pair(pair: &CoupledPair) -> Self {
        Self { fixed_levels: pair.fixed.levels, tunable_levels: pair.tunable.levels }
    }

    pub fn dim(&self) -> usize {
        self.fixed_levels * self.tunable_levels
    }

    pub fn index(&self, n_fixed: usize, n_tunable: usize) -> usize {
        n_fixed * self.tunable_levels + n_tunable
    }

    pub fn occupation(&self, index: usize) -> (usize, usize) {
        (index / self.tunable_levels, index % self.tunable_levels)
    }

    /// Indices of |00⟩, |01⟩, |10⟩, |11⟩ (first label = fixed qubit).
    pub fn computational(&self) -> [usize; 4] {
        [self.index(0, 0), self.index(0, 1), self.index(1, 0), self.index(1, 1)]
    }

    /// Index groups of equal total excitation number.
    pub fn excitation_blocks(&self) -> Vec<Vec<usize>> {
        let max = self.fixed_levels + self.tunable_levels - 2;
        (0..=max)
            .map(|n| (0..self.dim()).filter(|&i| { let (a, b) = self.occupation(i); a + b == n }).collect())
            .filter(|b: &Vec<usize>| !b.is_empty())
            .collect()
    }
}

/// Lab-frame Hamiltonian (GHz) with the tunable transmon at flux `flux`.
pub fn build_hamiltonian(pair: &CoupledPair, flux: f64) -> CMatrix {
    let basis = Basis::for_pair(pair);
    let f_t = flux_frequency(&pair.tunable, flux);
    let f_f = pair.fixed.f_max;
    let (eta_f, eta_t) = (pair.fixed.anharmonicity / 1e3, pair.tunable.anharmonicity / 1e3);
    let g = pair.g / 1e3;
    let dim = basis.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let (nf, nt) = basis.occupation(i);
        let (nf, nt) = (nf as f64, nt as f64);
        let e = f_f * nf - 0.5 * eta_f * nf * (nf - 1.0) + f_t * nt - 0.5 * eta_t * nt * (nt - 1.0);
        h[(i, i)] = Complex64::new(e, 0.0);
    }
    for (i, j, amp) in coupling_terms(&basis) {
        h[(i, j)] += Complex64::new(g * amp, 0.0);
        h[(j, i)] += Complex64::new(g * amp, 0.0);
    }
    h
}

/// `(i, j, ⟨i|a_F† a_T|j⟩)` for every nonzero hop of one excitation from the
/// tunable to the fixed transmon.
pub(crate) fn coupling_terms(basis: &Basis) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for nf in 0..basis.fixed_levels - 1 {
        for nt in 1..basis.tunable_levels {
            let i = basis.index(nf + 1, nt - 1);
            let j = basis.index(nf, nt);
            out.push((i, j, ((nf + 1) as f64).sqrt() * (nt as f64).sqrt()));
        }
    }
    out
}

/// Hamiltonian pieces in the frame rotating at the parked frequencies,
/// grouped by excitation block, evaluated cheaply at any flux value.
#[derive(Debug, Clone)]
pub(crate) struct FrameHamiltonian {
    pub blocks: Vec<Vec<usize>>,
    /// Per block: for each member, (tunable occupation, static anharmonic energy in GHz).
    diag: Vec<Vec<(f64, f64)>>,
    /// Per block: (row, col, coupling in GHz, frame frequency difference E0_row − E0_col in GHz).
    hops: Vec<Vec<(usize, usize, f64, f64)>>,
    pub parked_tunable: f64,
    pub parked_fixed: f64,
    tunable: crate::device::TransmonSpec,
}

impl FrameHamiltonian {
    pub fn new(pair: &CoupledPair) -> Self {
        let basis = Basis::for_pair(pair);
        let blocks = basis.excitation_blocks();
        let parked_tunable = flux_frequency(&pair.tunable, pair.dc_bias);
        let parked_fixed = pair.fixed.f_max;
        let (eta_f, eta_t) = (pair.fixed.anharmonicity / 1e3, pair.tunable.anharmonicity / 1e3);
        let g = pair.g / 1e3;
        let mut position = vec![(0usize, 0usize); basis.dim()];
        for (b, members) in blocks.iter().enumerate() {
            for (k, &i) in members.iter().enumerate() {
                position[i] = (b, k);
            }
        }
        let diag = blocks
            .iter()
            .map(|members| {
                members
                    .iter()
                    .map(|&i| {
                        let (nf, nt) = basis.occupation(i);
                        let (nf, nt) = (nf as f64, nt as f64);
                        (nt, -0.5 * eta_f * nf * (nf - 1.0) - 0.5 * eta_t * nt * (nt - 1.0))
                    })
                    .collect()
            })
            .collect();
        let mut hops = vec![Vec::new(); blocks.len()];
        for (i, j, amp) in coupling_terms(&basis) {
            let (b, ki) = position[i];
            let (_, kj) = position[j];
            // i has one more fixed and one fewer tunable excitation than j.
            hops[b].push((ki, kj, g * amp, parked_fixed - parked_tunable));
        }
        Self { blocks, diag, hops, parked_tunable, parked_fixed, tunable: pair.tunable }
    }

    pub fn block_with_shift(&self, b: usize, t: f64, shift: f64, out: &mut CMatrix) {
        out.fill(Complex64::new(0.0, 0.0));
        for (k, &(nt, stat)) in self.diag[b].iter().enumerate() {
            out[(k, k)] = Complex64::new(stat + shift * nt, 0.0);
        }
        for &(i, j, amp, freq) in &self.hops[b] {
            let ph = Complex64::from_polar(amp, std::f64::consts::TAU * freq * t);
            out[(i, j)] += ph;
            out[(j, i)] += ph.conj();
        }
    }

    pub fn frequency_shift(&self, flux: f64) -> f64 {
        flux_frequency(&self.tunable, flux) - self.parked_tunable
    }
}
