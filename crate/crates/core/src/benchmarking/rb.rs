//! Randomized-benchmarking sequence simulation on precomputed gate channels.

use std::sync::Arc;

use nalgebra::{SMatrix, SVector};
use rand::seq::SliceRandom;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clifford::{CliffordGroup, NativeOp, SINGLE_QUBIT_ORDER};
use crate::dynamics::{pauli_transfer_matrix, Superoperator};
use crate::error::{Error, Result};
use crate::numeric::rng::stream;

pub type Ptm = SMatrix<f64, 16, 16>;
pub type PauliVector = SVector<f64, 16>;

/// Channels may lose at most this much trace to leakage.
pub const MAX_TRACE_LOSS: f64 = 0.05;

const TAG_SEQUENCE: u64 = 0x5345_5155;
const TAG_SHOTS: u64 = 0x5348_4f54;
const TAG_ORDER: u64 = 0x4f52_4452;

/// Pauli indices of `I⊗I, I⊗Z, Z⊗I, Z⊗Z`: the populations of |00⟩ are
/// `Tr[|00⟩⟨00| ρ] = ¼ Σ_{P ∈ {I,Z}⊗²} Tr[P ρ]`.
const DIAGONAL_PAULIS: [usize; 4] = [0, 3, 12, 15];

pub fn ptm_of(ch: &Superoperator) -> Result<Ptm> {
    let r = pauli_transfer_matrix(ch)?;
    Ok(Ptm::from_fn(|i, j| r[(i, j)]))
}

/// Noisy implementations of the native gates: the CZ channel (frame
/// corrections included) and a channel applied after every single-qubit
/// layer, whose ideal part is exact.
#[derive(Debug, Clone)]
pub struct NativeChannels {
    pub cz: Superoperator,
    pub local_noise: Superoperator,
}

impl NativeChannels {
    pub fn new(cz: Superoperator, local_noise: Superoperator) -> Result<Self> {
        for (name, ch) in [("cz", &cz), ("local noise", &local_noise)] {
            if ch.dim != 4 {
                return Err(Error::DimensionMismatch { expected: 4, found: ch.dim });
            }
            let loss = ch.trace_preservation_error();
            if loss > MAX_TRACE_LOSS {
                return Err(Error::ChannelValidation(format!("{name} channel loses {loss:.3e} of the trace")));
            }
            let min_eig = ch.min_choi_eigenvalue();
            if min_eig < -1e-8 {
                return Err(Error::ChannelValidation(format!("{name} channel is not CP (Choi eigenvalue {min_eig:.3e})")));
            }
        }
        Ok(Self { cz, local_noise })
    }

    pub fn ideal() -> Self {
        Self {
            cz: Superoperator::from_unitary(&crate::dynamics::cz_unitary()),
            local_noise: Superoperator::identity(4),
        }
    }
}

/// PTMs of all native operations for one set of channels.
#[derive(Debug)]
pub(crate) struct CompiledChannels {
    locals: Vec<Ptm>,
    cz: Ptm,
}

impl CompiledChannels {
    fn new(ch: &NativeChannels) -> Result<Self> {
        let group = CliffordGroup::get();
        let noise = ptm_of(&ch.local_noise)?;
        let locals = (0..SINGLE_QUBIT_ORDER * SINGLE_QUBIT_ORDER)
            .map(|k| {
                let op = NativeOp::Local { fixed: (k / SINGLE_QUBIT_ORDER) as u8, tunable: (k % SINGLE_QUBIT_ORDER) as u8 };
                Ok(noise * ptm_of(&Superoperator::from_unitary(&group.native_unitary(op)))?)
            })
            .collect::<Result<_>>()?;
        Ok(Self { locals, cz: ptm_of(&ch.cz)? })
    }

    fn apply(&self, op: NativeOp, r: &mut PauliVector) {
        let m = match op {
            NativeOp::Local { fixed, tunable } => &self.locals[fixed as usize * SINGLE_QUBIT_ORDER + tunable as usize],
            NativeOp::Cz => &self.cz,
        };
        *r = m * *r;
    }
}

/// Channels in force versus wall-clock slot (piecewise constant).
#[derive(Debug, Clone)]
pub struct ChannelSchedule {
    segments: Vec<(usize, Arc<CompiledChannels>)>,
}

impl ChannelSchedule {
    pub fn constant(ch: &NativeChannels) -> Result<Self> {
        Ok(Self { segments: vec![(0, Arc::new(CompiledChannels::new(ch)?))] })
    }

    /// `segments` as `(first slot, channels)`, starts strictly increasing.
    /// Slots before the first start use the first segment's channels.
    pub fn piecewise(segments: &[(usize, NativeChannels)]) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("a channel schedule needs at least one segment"));
        }
        if segments.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("schedule segment starts must increase"));
        }
        let compiled = segments
            .par_iter()
            .map(|(s, ch)| Ok((*s, Arc::new(CompiledChannels::new(ch)?))))
            .collect::<Result<_>>()?;
        Ok(Self { segments: compiled })
    }

    fn at(&self, slot: usize) -> &CompiledChannels {
        let k = self.segments.partition_point(|(s, _)| *s <= slot).max(1) - 1;
        &self.segments[k].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterleavedGate {
    Cz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbConfig {
    /// Number of random Cliffords per sequence, before the inversion element.
    pub lengths: Vec<usize>,
    pub sequences_per_length: usize,
    pub shots_per_sequence: u64,
    pub interleaved_gate: Option<InterleavedGate>,
    /// Symmetric assignment error: a survival `s` is read as `e + (1 − 2e)s`.
    pub spam_error: f64,
}

impl Default for RbConfig {
    fn default() -> Self {
        Self {
            lengths: vec![2, 4, 8, 16, 32, 64],
            sequences_per_length: 32,
            shots_per_sequence: 500,
            interleaved_gate: None,
            spam_error: 0.0,
        }
    }
}

impl RbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() || self.lengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("RB lengths must be non-empty and strictly increasing"));
        }
        if self.lengths[0] == 0 {
            return Err(Error::invalid("RB lengths must be >= 1"));
        }
        if self.lengths.len() < 3 {
            return Err(Error::invalid("a decay fit needs at least 3 RB lengths"));
        }
        if self.sequences_per_length == 0 || self.shots_per_sequence == 0 {
            return Err(Error::invalid("sequence and shot counts must be >= 1"));
        }
        if !(0.0..0.5).contains(&self.spam_error) {
            return Err(Error::invalid("assignment error must lie in [0, 0.5)"));
        }
        Ok(())
    }

    /// Sequences in one decay.
    pub fn sequences_per_decay(&self) -> usize {
        self.lengths.len() * self.sequences_per_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    Reference,
    Interleaved,
}

/// Outcome of one fixed random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub decay: usize,
    pub kind: DecayKind,
    pub length: usize,
    pub sequence: usize,
    pub successes: u64,
    pub shots: u64,
    /// Wall-clock acquisition slot.
    pub slot: usize,
}

impl SequenceRecord {
    pub fn survival(&self) -> f64 {
        self.successes as f64 / self.shots as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RbDataset {
    pub records: Vec<SequenceRecord>,
}

impl RbDataset {
    pub fn decay(&self, decay: usize) -> RbDataset {
        RbDataset { records: self.records.iter().filter(|r| r.decay == decay).copied().collect() }
    }

    pub fn decays(&self, decays: &[usize]) -> RbDataset {
        RbDataset { records: self.records.iter().filter(|r| decays.contains(&r.decay)).copied().collect() }
    }

    pub fn lengths(&self) -> Vec<usize> {
        let mut l: Vec<usize> = self.records.iter().map(|r| r.length).collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// Per-length survival fractions of every sequence, lengths ascending.
    pub fn by_length(&self) -> Vec<(usize, Vec<f64>)> {
        self.lengths()
            .into_iter()
            .map(|l| (l, self.records.iter().filter(|r| r.length == l).map(|r| r.survival()).collect()))
            .collect()
    }

    /// Parametric resample: each sequence's count is redrawn from
    /// Binomial(shots, observed fraction).
    pub fn resampled<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> RbDataset {
        let records = self
            .records
            .iter()
            .map(|r| {
                let successes = Binomial::new(r.shots, r.survival().clamp(0.0, 1.0))
                    .expect("valid binomial")
                    .sample(rng);
                SequenceRecord { successes, ..*r }
            })
            .collect();
        RbDataset { records }
    }
}

/// |00⟩ survival after `ops`, starting from |00⟩⟨00|.
fn survival(channels: &CompiledChannels, ops: impl Iterator<Item = NativeOp>) -> f64 {
    let mut r = PauliVector::zeros();
    for k in DIAGONAL_PAULIS {
        r[k] = 1.0;
    }
    for op in ops {
        channels.apply(op, &mut r);
    }
    0.25 * DIAGONAL_PAULIS.iter().map(|&k| r[k]).sum::<f64>()
}

/// Native operations of sequence `index` at length `config.lengths[length_index]`
/// for a decay: the random Cliffords (each followed by the interleaved CZ if
/// the decay is interleaved), then the compiled recovery element.
pub fn sequence_ops(config: &RbConfig, plan: DecayPlan, length_index: usize, index: usize, seed: u64) -> Vec<NativeOp> {
    let group = CliffordGroup::get();
    let cz = group.cz();
    let n_lengths = config.lengths.len();
    let interleaved = plan.kind == DecayKind::Interleaved;
    let content = (plan.sequence_set * n_lengths + length_index) * config.sequences_per_length + index;
    let mut rng = stream(seed, TAG_SEQUENCE, content as u64);
    let cliffords: Vec<_> = (0..config.lengths[length_index]).map(|_| group.sample(&mut rng)).collect();
    let mut total = group.identity();
    for &c in &cliffords {
        total = group.compose(total, c);
        if interleaved {
            total = group.compose(total, cz);
        }
    }
    let inverse = group.invert(total);
    cliffords
        .iter()
        .flat_map(|&c| group.compile(c).0.iter().copied().chain(interleaved.then_some(NativeOp::Cz)))
        .chain(group.compile(inverse).0.iter().copied())
        .collect()
}

/// Noiseless-readout |00⟩ survival of a native sequence under `channels`.
pub fn sequence_survival(channels: &NativeChannels, ops: &[NativeOp]) -> Result<f64> {
    Ok(survival(&CompiledChannels::new(channels)?, ops.iter().copied()))
}

/// Random acquisition order: a permutation of `first_slot..first_slot + n`.
pub fn acquisition_slots(n: usize, first_slot: usize, seed: u64) -> Vec<usize> {
    let mut slots: Vec<usize> = (first_slot..first_slot + n).collect();
    slots.shuffle(&mut stream(seed, TAG_ORDER, first_slot as u64));
    slots
}

/// One decay of an acquisition: its kind and the random sequence set it
/// measures. Decays sharing a set re-measure the same fixed sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecayPlan {
    pub kind: DecayKind,
    pub sequence_set: usize,
}

/// Simulate decays whose sequences were acquired at `slots` (one slot per
/// sequence, decay-major then length then sequence).
pub(crate) fn simulate_decays(
    config: &RbConfig,
    plan: &[DecayPlan],
    schedule: &ChannelSchedule,
    slots: &[usize],
    seed: u64,
) -> Result<RbDataset> {
    config.validate()?;
    let per_decay = config.sequences_per_decay();
    if slots.len() != plan.len() * per_decay {
        return Err(Error::invalid("one acquisition slot per sequence is required"));
    }
    let n_seq = config.sequences_per_length;
    let items: Vec<(usize, usize, usize)> = (0..plan.len())
        .flat_map(|d| (0..config.lengths.len()).flat_map(move |li| (0..n_seq).map(move |s| (d, li, s))))
        .collect();
    let records = items
        .par_iter()
        .enumerate()
        .map(|(id, &(d, li, s))| {
            let length = config.lengths[li];
            let ops = sequence_ops(config, plan[d], li, s, seed);
            let slot = slots[id];
            let s_true = survival(schedule.at(slot), ops.into_iter()).clamp(0.0, 1.0);
            let p = config.spam_error + (1.0 - 2.0 * config.spam_error) * s_true;
            let successes = Binomial::new(config.shots_per_sequence, p.clamp(0.0, 1.0))
                .expect("valid binomial")
                .sample(&mut stream(seed, TAG_SHOTS, id as u64));
            Ok(SequenceRecord {
                decay: d,
                kind: plan[d].kind,
                length,
                sequence: s,
                successes,
                shots: config.shots_per_sequence,
                slot,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RbDataset { records })
}

/// One RB decay (interleaved if the config names a gate), with the
/// sequences acquired in random order starting at slot 0.
pub fn run_rb(config: &RbConfig, schedule: &ChannelSchedule, seed: u64) -> Result<RbDataset> {
    let kind = if config.interleaved_gate.is_some() { DecayKind::Interleaved } else { DecayKind::Reference };
    run_decays(config, &[DecayPlan { kind, sequence_set: 0 }], schedule, 0, seed)
}

/// Several decays measured together, all sequences scrambled into one
/// acquisition order starting at `first_slot`.
pub fn run_decays(
    config: &RbConfig,
    plan: &[DecayPlan],
    schedule: &ChannelSchedule,
    first_slot: usize,
    seed: u64,
) -> Result<RbDataset> {
    config.validate()?;
    let slots = acquisition_slots(plan.len() * config.sequences_per_decay(), first_slot, seed);
    simulate_decays(config, plan, schedule, &slots, seed)
}

/// Synthetic decay with every sequence at survival `a·p^L + b`, binomial
/// shot noise only.
pub fn synthetic_decay(config: &RbConfig, a: f64, p: f64, b: f64, seed: u64) -> Result<RbDataset> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.sequences_per_decay());
    for (li, &length) in config.lengths.iter().enumerate() {
        for s in 0..config.sequences_per_length {
            let id = (li * config.sequences_per_length + s) as u64;
            let q = (a * p.powi(length as i32) + b).clamp(0.0, 1.0);
            let successes = Binomial::new(config.shots_per_sequence, q)
                .map_err(|e| Error::invalid(e.to_string()))?
                .sample(&mut stream(seed, TAG_SHOTS, id));
            records.push(SequenceRecord {
                decay: 0,
                kind: DecayKind::Reference,
                length,
                sequence: s,
                successes,
                shots: config.shots_per_sequence,
                slot: id as usize,
            });
        }
    }
    Ok(RbDataset { records })
}
