//! Time propagation in the frame rotating at the parked qubit frequencies.
//!
//! The coherent part uses the fourth-order Magnus expansion with two Gauss
//! nodes per step, exponentiated exactly per excitation block. Dissipation
//! enters by Strang splitting with the exact exponential of the (constant)
//! Lindblad dissipator.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::hamiltonian::{Basis, CMatrix, FrameHamiltonian};
use super::{DecoherenceRates, DensityMatrix};
use crate::device::CoupledPair;
use crate::error::{Error, Result};
use crate::pulse::FluxSignal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Steps per period of the fastest rotating-frame frequency (≥ 20).
    pub points_per_period: f64,
    /// Optional hard cap on the step (ns).
    pub max_step: Option<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { points_per_period: 24.0, max_step: None }
    }
}

impl IntegratorOptions {
    /// Same options with the step halved.
    pub fn refined(&self) -> Self {
        let step = self.max_step.map(|s| s / 2.0);
        Self { points_per_period: self.points_per_period * 2.0, max_step: step }
    }
}

/// Fastest frequency present in the rotating-frame Hamiltonian (GHz).
pub fn fastest_frequency(pair: &CoupledPair) -> f64 {
    let swing = pair.tunable.f_max - pair.tunable.f_min;
    let levels = (pair.tunable.levels - 1) as f64;
    (pair.tunable.f_max - pair.fixed.f_max).abs()
        + levels * swing
        + (pair.tunable.anharmonicity + pair.fixed.anharmonicity) / 1e3 * levels
}

pub(crate) fn step_count(pair: &CoupledPair, duration: f64, opts: &IntegratorOptions) -> Result<(usize, f64)> {
    if opts.points_per_period < 20.0 {
        return Err(Error::invalid("integrator needs at least 20 points per fastest period"));
    }
    let mut h = 1.0 / (opts.points_per_period * fastest_frequency(pair));
    if let Some(cap) = opts.max_step {
        h = h.min(cap);
    }
    let n = (duration / h).ceil().max(1.0) as usize;
    Ok((n, duration / n as f64))
}

/// Rotating-frame frequencies, recorded with every evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameInfo {
    /// Frame frequency of the fixed transmon (GHz).
    pub fixed_ghz: f64,
    /// Frame frequency of the tunable transmon, its parked value (GHz).
    pub tunable_ghz: f64,
    pub step_ns: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: DensityMatrix,
    pub frame: FrameInfo,
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6

struct Stepper {
    frame: FrameHamiltonian,
    dim: usize,
}

impl Stepper {
    fn new(pair: &CoupledPair) -> Self {
        Self { frame: FrameHamiltonian::new(pair), dim: Basis::for_pair(pair).dim() }
    }

    /// Per-block propagators for `[t, t + h]`.
    fn step(&self, drive: &dyn FluxSignal, t: f64, h: f64) -> Vec<CMatrix> {
        let (t1, t2) = (t + (0.5 - GAUSS_OFFSET) * h, t + (0.5 + GAUSS_OFFSET) * h);
        let (s1, s2) = (
            self.frame.frequency_shift(drive.flux(t1)),
            self.frame.frequency_shift(drive.flux(t2)),
        );
        self.frame
            .blocks
            .iter()
            .enumerate()
            .map(|(b, members)| {
                let n = members.len();
                let mut h1 = CMatrix::zeros(n, n);
                let mut h2 = CMatrix::zeros(n, n);
                self.frame.block_with_shift(b, t1, s1, &mut h1);
                self.frame.block_with_shift(b, t2, s2, &mut h2);
                h1 *= Complex64::new(TAU, 0.0);
                h2 *= Complex64::new(TAU, 0.0);
                if n == 1 {
                    let k = 0.5 * h * (h1[(0, 0)].re + h2[(0, 0)].re);
                    return CMatrix::from_element(1, 1, Complex64::from_polar(1.0, -k));
                }
                let comm = &h2 * &h1 - &h1 * &h2;
                let k = (&h1 + &h2) * Complex64::new(0.5 * h, 0.0)
                    - comm * Complex64::new(0.0, 3f64.sqrt() / 12.0 * h * h);
                hermitian_exp_neg_i(k)
            })
            .collect()
    }

    fn assemble(&self, blocks: &[CMatrix]) -> CMatrix {
        let mut u = CMatrix::zeros(self.dim, self.dim);
        for (members, ub) in self.frame.blocks.iter().zip(blocks) {
            for (a, &i) in members.iter().enumerate() {
                for (b, &j) in members.iter().enumerate() {
                    u[(i, j)] = ub[(a, b)];
                }
            }
        }
        u
    }
}

/// `exp(−iK)` for Hermitian `K`.
pub(crate) fn hermitian_exp_neg_i(k: CMatrix) -> CMatrix {
    let n = k.nrows();
    let eig = SymmetricEigen::new(k);
    let v = eig.eigenvectors;
    let mut scaled = v.clone();
    for (c, lam) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lam);
        for r in 0..n {
            scaled[(r, c)] *= phase;
        }
    }
    scaled * v.adjoint()
}

/// Full propagator (rotating frame) of the closed system over the drive.
pub fn propagate_unitary(pair: &CoupledPair, drive: &dyn FluxSignal, opts: &IntegratorOptions) -> Result<(CMatrix, FrameInfo)> {
    pair.validate()?;
    let stepper = Stepper::new(pair);
    let (steps, h) = step_count(pair, drive.duration(), opts)?;
    let mut blocks: Vec<CMatrix> = stepper.frame.blocks.iter().map(|m| CMatrix::identity(m.len(), m.len())).collect();
    for s in 0..steps {
        let t = s as f64 * h;
        for (acc, step) in blocks.iter_mut().zip(stepper.step(drive, t, h)) {
            *acc = step * &*acc;
        }
    }
    let u = stepper.assemble(&blocks);
    if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Integration { time_ns: drive.duration(), reason: "non-finite propagator".into() });
    }
    Ok((u, frame_info(&stepper, h, steps)))
}

fn frame_info(stepper: &Stepper, h: f64, steps: usize) -> FrameInfo {
    FrameInfo { fixed_ghz: stepper.frame.parked_fixed, tunable_ghz: stepper.frame.parked_tunable, step_ns: h, steps }
}

/// Evolve a density matrix under the drive, optionally with Lindblad
/// relaxation (`√(1/T1)·a`) and dephasing (`√(2/Tφ)·a†a`) on both transmons.
pub fn evolve(
    pair: &CoupledPair,
    drive: &dyn FluxSignal,
    initial: &DensityMatrix,
    rates: Option<&DecoherenceRates>,
    opts: &IntegratorOptions,
) -> Result<Evolution> {
    let (mut out, frame) = evolve_batch(pair, drive, std::slice::from_ref(initial.matrix()), rates, opts)?;
    let state = DensityMatrix::from_matrix_unchecked(out.pop().expect("one output per input"));
    Ok(Evolution { state, frame })
}

/// Evolve several operators through the same (linear) dynamics at once.
pub fn evolve_batch(
    pair: &CoupledPair,
    drive: &dyn FluxSignal,
    inputs: &[CMatrix],
    rates: Option<&DecoherenceRates>,
    opts: &IntegratorOptions,
) -> Result<(Vec<CMatrix>, FrameInfo)> {
    pair.validate()?;
    let basis = Basis::for_pair(pair);
    let dim = basis.dim();
    for m in inputs {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
        }
    }
    let stepper = Stepper::new(pair);
    let (steps, h) = step_count(pair, drive.duration(), opts)?;
    let mut states: Vec<CMatrix> = inputs.to_vec();

    let dissipation = rates.filter(|r| !r.is_zero()).map(|r| {
        let gen = dissipator(&basis, r);
        (SparseOp::from_dense(&(&gen * Complex64::new(0.5 * h, 0.0)).exp()), SparseOp::from_dense(&(gen * Complex64::new(h, 0.0)).exp()))
    });

    if let Some((half, _)) = &dissipation {
        for s in states.iter_mut() {
            half.apply(s);
        }
    }
    for k in 0..steps {
        let t = k as f64 * h;
        let u = stepper.assemble(&stepper.step(drive, t, h));
        let u_dag = u.adjoint();
        for s in states.iter_mut() {
            *s = &u * &*s * &u_dag;
        }
        if let Some((half, full)) = &dissipation {
            let op = if k + 1 == steps { half } else { full };
            for s in states.iter_mut() {
                op.apply(s);
            }
        }
        if k % 512 == 0 && states.iter().any(|s| s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(Error::Integration { time_ns: t, reason: format!("non-finite state after step {k} (h = {h} ns)") });
        }
    }
    if states.iter().any(|s| s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(Error::Integration { time_ns: drive.duration(), reason: "non-finite final state".into() });
    }
    Ok((states, frame_info(&stepper, h, steps)))
}

/// Lindblad dissipator as a superoperator on column-stacked density matrices.
pub(crate) fn dissipator(basis: &Basis, rates: &DecoherenceRates) -> CMatrix {
    let dim = basis.dim();
    let mut collapse: Vec<CMatrix> = Vec::new();
    for (which, qr) in [(0usize, &rates.fixed), (1usize, &rates.tunable)] {
        let mut lower = CMatrix::zeros(dim, dim);
        let mut number = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            let (nf, nt) = basis.occupation(i);
            let n = if which == 0 { nf } else { nt };
            number[(i, i)] = Complex64::new(n as f64, 0.0);
            if n > 0 {
                let j = if which == 0 { basis.index(nf - 1, nt) } else { basis.index(nf, nt - 1) };
                lower[(j, i)] = Complex64::new((n as f64).sqrt(), 0.0);
            }
        }
        let gamma1 = qr.relaxation_rate_per_ns();
        let gamma_phi = qr.dephasing_rate_per_ns();
        if gamma1 > 0.0 {
            collapse.push(lower * Complex64::new(gamma1.sqrt(), 0.0));
        }
        if gamma_phi > 0.0 {
            collapse.push(number * Complex64::new((2.0 * gamma_phi).sqrt(), 0.0));
        }
    }
    let id = CMatrix::identity(dim, dim);
    let mut gen = CMatrix::zeros(dim * dim, dim * dim);
    for c in &collapse {
        let cdc = c.adjoint() * c;
        gen += c.map(|z| z.conj()).kronecker(c);
        gen -= id.kronecker(&cdc) * Complex64::new(0.5, 0.0);
        gen -= cdc.transpose().kronecker(&id) * Complex64::new(0.5, 0.0);
    }
    gen
}

/// Sparse copy of a dense superoperator, applied in place to a column-stacked matrix.
struct SparseOp {
    entries: Vec<(usize, usize, Complex64)>,
    len: usize,
}

impl SparseOp {
    fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let entries = (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
            .filter_map(|(r, c)| {
                let z = m[(r, c)];
                (z.norm() > 1e-17 * scale).then_some((r, c, z))
            })
            .collect();
        Self { entries, len: m.nrows() }
    }

    fn apply(&self, rho: &mut CMatrix) {
        let src = rho.as_slice().to_vec();
        let dst = rho.as_mut_slice();
        debug_assert_eq!(dst.len(), self.len);
        dst.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for &(r, c, z) in &self.entries {
            dst[r] += z * src[c];
        }
    }
}
