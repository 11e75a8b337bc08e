use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{Basis, CMatrix};
use super::propagate::{evolve_batch, propagate_unitary, FrameInfo, IntegratorOptions};
use super::DecoherenceRates;
use crate::device::CoupledPair;
use crate::error::{Error, Result};
use crate::pulse::FluxSignal;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Linear map on `dim × dim` matrices, acting on column-stacked vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    pub dim: usize,
    pub matrix: CMatrix,
}

impl Superoperator {
    pub fn new(dim: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: matrix.nrows() });
        }
        Ok(Self { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, matrix: CMatrix::identity(dim * dim, dim * dim) }
    }

    /// `ρ ↦ U ρ U†`.
    pub fn from_unitary(u: &CMatrix) -> Self {
        let dim = u.nrows();
        Self { dim, matrix: u.map(|z| z.conj()).kronecker(u) }
    }

    /// `ρ ↦ p ρ + (1 − p) Tr(ρ) I/d`.
    pub fn depolarizing(dim: usize, p: f64) -> Self {
        let id = CMatrix::identity(dim, dim);
        let v = DMatrix::from_column_slice(dim * dim, 1, id.as_slice());
        let matrix = CMatrix::identity(dim * dim, dim * dim) * Complex64::new(p, 0.0)
            + &v * v.transpose() * Complex64::new((1.0 - p) / dim as f64, 0.0);
        Self { dim, matrix }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = DMatrix::from_column_slice(self.dim * self.dim, 1, rho.as_slice());
        let out = &self.matrix * v;
        CMatrix::from_column_slice(self.dim, self.dim, out.as_slice())
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &Superoperator) -> Superoperator {
        Superoperator { dim: self.dim, matrix: &next.matrix * &self.matrix }
    }

    /// Choi matrix `Σ |i⟩⟨j| ⊗ E(|i⟩⟨j|)`.
    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        let mut choi = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let mut unit = CMatrix::zeros(d, d);
                unit[(i, j)] = C1;
                let out = self.apply(&unit);
                for a in 0..d {
                    for b in 0..d {
                        choi[(i * d + a, j * d + b)] = out[(a, b)];
                    }
                }
            }
        }
        choi
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        let choi = self.choi();
        let herm = (&choi + choi.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest |Tr E(|i⟩⟨j|) − δ_ij| over matrix units.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for col in 0..d * d {
            let tr: Complex64 = (0..d).map(|k| self.matrix[(k * d + k, col)]).sum();
            let want = if col % (d + 1) == 0 { 1.0 } else { 0.0 };
            worst = worst.max((tr - Complex64::new(want, 0.0)).norm());
        }
        worst
    }
}

/// Single-qubit Pauli `I, X, Y, Z` for `k = 0..4`.
pub fn single_qubit_pauli(k: usize) -> CMatrix {
    let i = Complex64::new(0.0, 1.0);
    let m = match k {
        0 => [C1, C0, C0, C1],
        1 => [C0, C1, C1, C0],
        2 => [C0, i, -i, C0],
        3 => [C1, C0, C0, -C1],
        _ => panic!("Pauli index {k} out of range"),
    };
    // column-major
    CMatrix::from_column_slice(2, 2, &m)
}

/// Pauli basis element for `qubits` qubits; the first qubit is the most
/// significant base-4 digit of `index` and the left Kronecker factor.
pub fn pauli_matrix(qubits: usize, index: usize) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for q in 0..qubits {
        let digit = (index / 4usize.pow((qubits - 1 - q) as u32)) % 4;
        out = out.kronecker(&single_qubit_pauli(digit));
    }
    out
}

fn qubit_count(dim: usize) -> Result<usize> {
    match dim {
        2 => Ok(1),
        4 => Ok(2),
        _ => Err(Error::DimensionMismatch { expected: 4, found: dim }),
    }
}

/// `R_ij = (1/d) Tr[P_i E(P_j)]`.
pub fn pauli_transfer_matrix(ch: &Superoperator) -> Result<DMatrix<f64>> {
    let n = qubit_count(ch.dim)?;
    let count = ch.dim * ch.dim;
    let paulis: Vec<CMatrix> = (0..count).map(|k| pauli_matrix(n, k)).collect();
    let mut r = DMatrix::zeros(count, count);
    for (j, pj) in paulis.iter().enumerate() {
        let out = ch.apply(pj);
        for (i, pi) in paulis.iter().enumerate() {
            r[(i, j)] = (pi * &out).trace().re / ch.dim as f64;
        }
    }
    Ok(r)
}

/// Average gate fidelity of `ch` against the unitary `target`,
/// `F̄ = (d·F_e + Tr[E(I)]/d)/(d + 1)` with `F_e = Tr[S_U† S]/d²`.
/// For trace-preserving channels this is `(d·F_e + 1)/(d + 1)`.
pub fn average_gate_fidelity(ch: &Superoperator, target: &CMatrix) -> Result<f64> {
    let d = ch.dim;
    if target.nrows() != d || target.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: target.nrows() });
    }
    let ideal = Superoperator::from_unitary(target);
    let fe = (ideal.matrix.adjoint() * &ch.matrix).trace().re / (d * d) as f64;
    let kept = ch.apply(&CMatrix::identity(d, d)).trace().re / d as f64;
    Ok(((d as f64 * fe + kept) / (d as f64 + 1.0)).clamp(0.0, 1.0))
}

pub fn cz_unitary() -> CMatrix {
    let mut u = CMatrix::identity(4, 4);
    u[(3, 3)] = -C1;
    u
}

/// Single-qubit Z frame updates applied after the gate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameCorrection {
    /// Phase (rad) removed from the fixed qubit's |1⟩.
    pub theta_fixed: f64,
    /// Phase (rad) removed from the tunable qubit's |1⟩.
    pub theta_tunable: f64,
}

impl FrameCorrection {
    /// `diag(1, e^{−iθ_T}, e^{−iθ_F}, e^{−i(θ_F+θ_T)})` in the `|n_F n_T⟩` ordering.
    pub fn unitary(&self) -> CMatrix {
        let (f, t) = (self.theta_fixed, self.theta_tunable);
        CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C1,
            Complex64::from_polar(1.0, -t),
            Complex64::from_polar(1.0, -f),
            Complex64::from_polar(1.0, -(f + t)),
        ]))
    }
}

/// A simulated two-qubit gate restricted to the computational subspace.
#[derive(Debug, Clone)]
pub struct GateChannel {
    pub superop: Superoperator,
    /// Population leaving the computational subspace from |00⟩, |01⟩, |10⟩, |11⟩.
    pub leakage: [f64; 4],
    pub frame: FrameInfo,
}

impl GateChannel {
    pub fn mean_leakage(&self) -> f64 {
        self.leakage.iter().sum::<f64>() / 4.0
    }
}

/// Propagate the 16 computational matrix units through the pulse and keep
/// the computational block of each output. Frame corrections, if given, are
/// applied after the gate.
pub fn gate_superoperator(
    pair: &CoupledPair,
    drive: &dyn FluxSignal,
    rates: Option<&DecoherenceRates>,
    corrections: Option<&FrameCorrection>,
    opts: &IntegratorOptions,
) -> Result<GateChannel> {
    let basis = Basis::for_pair(pair);
    let comp = basis.computational();
    let dim = basis.dim();
    let noisy = rates.filter(|r| !r.is_zero());

    let (mut superop, frame) = match noisy {
        None => {
            let (u, frame) = propagate_unitary(pair, drive, opts)?;
            let v = CMatrix::from_fn(4, 4, |a, b| u[(comp[a], comp[b])]);
            (Superoperator::from_unitary(&v), frame)
        }
        Some(r) => {
            // E(|j⟩⟨i|) = E(|i⟩⟨j|)†, so only i ≤ j is propagated.
            let pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).collect();
            let inputs: Vec<CMatrix> = pairs
                .iter()
                .map(|&(i, j)| {
                    let mut m = CMatrix::zeros(dim, dim);
                    m[(comp[i], comp[j])] = C1;
                    m
                })
                .collect();
            let (outputs, frame) = evolve_batch(pair, drive, &inputs, Some(r), opts)?;
            let mut s = CMatrix::zeros(16, 16);
            let mut put = |i: usize, j: usize, out: &CMatrix| {
                let col = j * 4 + i;
                for b in 0..4 {
                    for a in 0..4 {
                        s[(b * 4 + a, col)] = out[(comp[a], comp[b])];
                    }
                }
            };
            for (&(i, j), out) in pairs.iter().zip(&outputs) {
                put(i, j, out);
                if i != j {
                    put(j, i, &out.adjoint());
                }
            }
            (Superoperator { dim: 4, matrix: s }, frame)
        }
    };

    if let Some(c) = corrections {
        superop = superop.then(&Superoperator::from_unitary(&c.unitary()));
    }

    let mut leakage = [0.0; 4];
    for (k, l) in leakage.iter_mut().enumerate() {
        let mut unit = CMatrix::zeros(4, 4);
        unit[(k, k)] = C1;
        *l = (1.0 - superop.apply(&unit).trace().re).max(0.0);
    }

    let min_eig = superop.min_choi_eigenvalue();
    if min_eig < -1e-6 {
        return Err(Error::ChannelValidation(format!("Choi matrix eigenvalue {min_eig:.3e} below -1e-6")));
    }
    Ok(GateChannel { superop, leakage, frame })
}
