//! Two-transmon dynamics: Hamiltonian, closed and open-system propagation,
//! gate channels, Pauli transfer matrices and average gate fidelity.
//!
//! The product space is ordered fixed ⊗ tunable everywhere, so `|02⟩` means
//! the fixed transmon in `|0⟩` and the tunable one in `|2⟩`.

mod channel;
mod hamiltonian;
mod propagate;

pub use channel::{
    average_gate_fidelity, cz_unitary, gate_superoperator, pauli_matrix, pauli_transfer_matrix, single_qubit_pauli,
    FrameCorrection, GateChannel, Superoperator,
};
pub use hamiltonian::{build_hamiltonian, Basis, CMatrix};
pub use propagate::{
    evolve, evolve_batch, fastest_frequency, propagate_unitary, Evolution, FrameInfo, IntegratorOptions,
};

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device::{CoupledPair, TransmonSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-10), unit trace (1e-9) and positivity (−1e-8).
    pub fn new(rho: CMatrix) -> Result<Self> {
        let dm = Self { rho };
        dm.check()?;
        Ok(dm)
    }

    pub(crate) fn from_matrix_unchecked(rho: CMatrix) -> Self {
        Self { rho }
    }

    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::invalid("zero state vector"));
        }
        let v = v / Complex64::new(norm, 0.0);
        Self::new(&v * v.adjoint())
    }

    /// Projector on Fock state `index`.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(index, index)] = Complex64::new(1.0, 0.0);
        Self { rho }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn population(&self, index: usize) -> f64 {
        self.rho[(index, index)].re
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn check(&self) -> Result<()> {
        let herm = (&self.rho - self.rho.adjoint()).norm();
        if herm > 1e-10 {
            return Err(Error::invalid(format!("density matrix not Hermitian (deviation {herm:.2e})")));
        }
        let tr = self.rho.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::invalid(format!("density matrix trace {tr} differs from 1")));
        }
        let min = SymmetricEigen::new(self.rho.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-8 {
            return Err(Error::invalid(format!("density matrix has negative eigenvalue {min:.2e}")));
        }
        Ok(())
    }

    /// State fidelity ⟨ψ|ρ|ψ⟩ against a pure reference.
    pub fn overlap_with_pure(&self, psi: &[Complex64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(psi);
        (v.adjoint() * &self.rho * &v)[(0, 0)].re
    }
}

/// Relaxation and pure-dephasing times of one transmon (µs). `t_phi` may be
/// infinite (no pure dephasing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitDecoherence {
    pub t1: f64,
    pub t_phi: f64,
}

impl QubitDecoherence {
    /// `1/Tφ = 1/T2* − 1/(2 T1)`.
    pub fn from_t1_t2_star(t1: f64, t2_star: f64) -> Result<Self> {
        if !(t1 > 0.0 && t2_star > 0.0) {
            return Err(Error::invalid("coherence times must be positive"));
        }
        let rate = 1.0 / t2_star - 0.5 / t1;
        if rate < -1e-12 {
            return Err(Error::invalid(format!("T2* = {t2_star} exceeds 2 T1 = {}", 2.0 * t1)));
        }
        let t_phi = if rate <= 0.0 { f64::INFINITY } else { 1.0 / rate };
        Ok(Self { t1, t_phi })
    }

    pub fn from_spec(spec: &TransmonSpec) -> Result<Self> {
        Self::from_t1_t2_star(spec.t1, spec.t2_star)
    }

    pub fn relaxation_rate_per_ns(&self) -> f64 {
        if self.t1.is_infinite() { 0.0 } else { 1.0 / (self.t1 * 1e3) }
    }

    pub fn dephasing_rate_per_ns(&self) -> f64 {
        if self.t_phi.is_infinite() { 0.0 } else { 1.0 / (self.t_phi * 1e3) }
    }

    pub fn none() -> Self {
        Self { t1: f64::INFINITY, t_phi: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceRates {
    pub fixed: QubitDecoherence,
    pub tunable: QubitDecoherence,
}

impl DecoherenceRates {
    pub fn from_pair(pair: &CoupledPair) -> Result<Self> {
        Ok(Self {
            fixed: QubitDecoherence::from_spec(&pair.fixed)?,
            tunable: QubitDecoherence::from_spec(&pair.tunable)?,
        })
    }

    pub fn from_times(t1_fixed: f64, t2s_fixed: f64, t1_tunable: f64, t2s_tunable: f64) -> Result<Self> {
        Ok(Self {
            fixed: QubitDecoherence::from_t1_t2_star(t1_fixed, t2s_fixed)?,
            tunable: QubitDecoherence::from_t1_t2_star(t1_tunable, t2s_tunable)?,
        })
    }

    /// Same rates with both T1 values scaled by `factor` (Tφ unchanged).
    pub fn with_t1_scaled(&self, factor: f64) -> Self {
        let mut r = *self;
        r.fixed.t1 *= factor;
        r.tunable.t1 *= factor;
        r
    }

    pub fn is_zero(&self) -> bool {
        [self.fixed, self.tunable]
            .iter()
            .all(|q| q.relaxation_rate_per_ns() == 0.0 && q.dephasing_rate_per_ns() == 0.0)
    }
}
