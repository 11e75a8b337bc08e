//! Repeated interleaved-RB experiments with stability post-selection, and
//! the static coherence-limited fidelity prediction.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_decay, irb_estimate, IrbResult};
use super::rb::{acquisition_slots, simulate_decays, ChannelSchedule, DecayKind, DecayPlan, NativeChannels, RbConfig, RbDataset};
use super::stats::{bootstrap_ci, ecdf_with_band, stability_test, BootstrapCi, Ecdf, StabilityTest};
use crate::calibration::CzCalibration;
use crate::device::CoupledPair;
use crate::dynamics::{
    average_gate_fidelity, cz_unitary, gate_superoperator, DecoherenceRates, IntegratorOptions, Superoperator,
};
use crate::error::{Error, Result};
use crate::noise::{simulate_ramsey_under_modulation, simulate_t1_under_modulation, CoherenceScan, NoiseProfile};
use crate::numeric::rng::splitmix;
use crate::pulse::FluxPulse;

/// T1 and T2* measured alongside one experiment (µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceProbe {
    pub t1: f64,
    pub t2_star: f64,
    pub t1_slot: usize,
    pub t2_star_slot: usize,
}

/// Supplies gate channels for a given T1 multiplier, and optionally
/// simulates coherence probes.
pub trait ChannelSource: Sync {
    fn channels(&self, t1_multiplier: f64) -> Result<NativeChannels>;

    /// T1 and T2* probes acquired at the given slots; `None` when the source
    /// has no device model to probe.
    fn probe(&self, _drift: &NoiseProfile, _slots: (usize, usize), _seed: u64) -> Option<Result<CoherenceProbe>> {
        None
    }
}

/// Channels that ignore drift.
pub struct FixedChannels(pub NativeChannels);

impl ChannelSource for FixedChannels {
    fn channels(&self, _t1_multiplier: f64) -> Result<NativeChannels> {
        Ok(self.0.clone())
    }
}

/// Settings for the coherence probes of each experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub noise: NoiseProfile,
    pub ramsey: CoherenceScan,
    pub relaxation: CoherenceScan,
}

/// Channels simulated from the device: the calibrated CZ under Lindblad
/// decoherence, and single-qubit layers modelled as idles of
/// `local_layer_ns` under the same decoherence.
pub struct GateModel {
    pub pair: CoupledPair,
    pub calibration: CzCalibration,
    pub rates: DecoherenceRates,
    pub local_layer_ns: f64,
    pub opts: IntegratorOptions,
    pub probes: Option<ProbeSettings>,
}

impl ChannelSource for GateModel {
    fn channels(&self, t1_multiplier: f64) -> Result<NativeChannels> {
        let rates = self.rates.with_t1_scaled(t1_multiplier);
        let cz = self.calibration.channel(&self.pair, Some(&rates), &self.opts)?.superop;
        let local_noise = if self.local_layer_ns > 0.0 {
            gate_superoperator(&self.pair, &FluxPulse::idle(self.local_layer_ns), Some(&rates), None, &self.opts)?.superop
        } else {
            Superoperator::identity(4)
        };
        NativeChannels::new(cz, local_noise)
    }

    fn probe(&self, drift: &NoiseProfile, slots: (usize, usize), seed: u64) -> Option<Result<CoherenceProbe>> {
        let settings = self.probes.as_ref()?;
        let mut profile = settings.noise.clone();
        profile.t1_drift = drift.t1_drift.clone();
        let (eps, freq) = (self.calibration.epsilon, self.calibration.omega_p);
        Some((|| {
            let relax = CoherenceScan { wall_clock: slots.0, ..settings.relaxation.clone() };
            let ramsey = CoherenceScan { wall_clock: slots.1, ..settings.ramsey.clone() };
            let t1 = simulate_t1_under_modulation(&self.pair, eps, freq, &profile, &relax, seed)?;
            let t2 = simulate_ramsey_under_modulation(&self.pair, eps, freq, &profile, &ramsey, splitmix(seed))?;
            Ok(CoherenceProbe { t1: t1.value, t2_star: t2.value, t1_slot: slots.0, t2_star_slot: slots.1 })
        })())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepeatedIrbConfig {
    pub rb: RbConfig,
    pub experiments: usize,
    /// Significance level of the duplicate-decay stability tests.
    pub alpha: f64,
    pub replicants: usize,
    /// Acquire T1 and T2* probes with each experiment.
    pub probes: bool,
}

impl Default for RepeatedIrbConfig {
    fn default() -> Self {
        Self { rb: RbConfig::default(), experiments: 20, alpha: 0.10, replicants: 2000, probes: false }
    }
}

/// One group of two reference and two interleaved decays; the two copies of
/// each decay measure the same random sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub index: usize,
    pub first_slot: usize,
    /// Estimate from the pooled duplicates; `ci` is the bootstrap interval.
    pub irb: IrbResult,
    pub bootstrap: BootstrapCi,
    pub reference_test: StabilityTest,
    pub interleaved_test: StabilityTest,
    pub discarded: bool,
    pub probe: Option<CoherenceProbe>,
    /// Decays 0, 1 are the reference duplicates, 2, 3 the interleaved ones.
    #[serde(skip)]
    pub data: RbDataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedIrb {
    pub experiments: Vec<ExperimentResult>,
    /// ECDF of the retained experiments' infidelities (needs ≥ 2 retained).
    pub ecdf: Option<Ecdf>,
    pub discard_fraction: f64,
}

impl RepeatedIrb {
    pub fn retained(&self) -> impl Iterator<Item = &ExperimentResult> {
        self.experiments.iter().filter(|e| !e.discarded)
    }
}

/// Each decay is measured twice on the same fixed sequences.
const PLAN: [DecayPlan; 4] = [
    DecayPlan { kind: DecayKind::Reference, sequence_set: 0 },
    DecayPlan { kind: DecayKind::Reference, sequence_set: 0 },
    DecayPlan { kind: DecayKind::Interleaved, sequence_set: 1 },
    DecayPlan { kind: DecayKind::Interleaved, sequence_set: 1 },
];

/// Pooled-duplicate iRB infidelity of a four-decay group.
pub fn pooled_infidelity(data: &RbDataset) -> Result<f64> {
    Ok(pooled_irb(data)?.infidelity)
}

fn pooled_irb(data: &RbDataset) -> Result<IrbResult> {
    irb_estimate(&fit_decay(&data.decays(&[0, 1]))?, &fit_decay(&data.decays(&[2, 3]))?)
}

/// Run `config.experiments` groups back to back in wall-clock time. Within
/// each group, every sequence of the four decays (and the probes) is
/// acquired in one random order; T1 drift from `drift` applies per slot.
pub fn run_repeated_irb(
    config: &RepeatedIrbConfig,
    source: &dyn ChannelSource,
    drift: &NoiseProfile,
    seed: u64,
) -> Result<RepeatedIrb> {
    config.rb.validate()?;
    drift.validate()?;
    if config.experiments == 0 || config.replicants == 0 {
        return Err(Error::invalid("experiments and replicants must be >= 1"));
    }
    let n_seq = PLAN.len() * config.rb.sequences_per_decay();
    let probe_slots = if config.probes { 2 } else { 0 };
    let span = n_seq + probe_slots;
    let total = span * config.experiments;

    // Channels for every distinct T1 multiplier in the campaign.
    let mut starts = vec![0usize];
    if let Some(d) = &drift.t1_drift {
        starts.extend(d.segments.iter().map(|s| s.start).filter(|&s| s > 0 && s < total));
    }
    starts.sort_unstable();
    starts.dedup();
    let multipliers: Vec<f64> = starts.iter().map(|&s| drift.t1_multiplier(s)).collect();
    let mut distinct: Vec<f64> = multipliers.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let channels: HashMap<u64, NativeChannels> = distinct
        .par_iter()
        .map(|&m| Ok((m.to_bits(), source.channels(m)?)))
        .collect::<Result<_>>()?;
    let segments: Vec<(usize, NativeChannels)> =
        starts.iter().zip(&multipliers).map(|(&s, m)| (s, channels[&m.to_bits()].clone())).collect();
    let schedule = ChannelSchedule::piecewise(&segments)?;

    let experiments = (0..config.experiments)
        .into_par_iter()
        .map(|e| {
            let first_slot = e * span;
            let exp_seed = splitmix(seed ^ splitmix(e as u64 + 1));
            let slots = acquisition_slots(span, first_slot, exp_seed);
            let data = simulate_decays(&config.rb, &PLAN, &schedule, &slots[..n_seq], exp_seed)?;
            let reference_test =
                stability_test(&data.decay(0), &data.decay(1), config.alpha, config.replicants, splitmix(exp_seed ^ 1))?;
            let interleaved_test =
                stability_test(&data.decay(2), &data.decay(3), config.alpha, config.replicants, splitmix(exp_seed ^ 2))?;
            let mut irb = pooled_irb(&data)?;
            let bootstrap = bootstrap_ci(&data, pooled_infidelity, config.replicants, splitmix(exp_seed ^ 3))?;
            irb.ci = [bootstrap.low, bootstrap.high];
            let discarded = !(reference_test.pass && interleaved_test.pass);
            irb.stability_pass = !discarded;
            let probe = if config.probes {
                source.probe(drift, (slots[n_seq], slots[n_seq + 1]), splitmix(exp_seed ^ 4)).transpose()?
            } else {
                None
            };
            Ok(ExperimentResult {
                index: e,
                first_slot,
                irb,
                bootstrap,
                reference_test,
                interleaved_test,
                discarded,
                probe,
                data,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let kept: Vec<f64> = experiments.iter().filter(|e| !e.discarded).map(|e| e.irb.infidelity).collect();
    let discard_fraction = 1.0 - kept.len() as f64 / experiments.len() as f64;
    let ecdf = if kept.len() >= 2 { Some(ecdf_with_band(&kept)?) } else { None };
    Ok(RepeatedIrb { experiments, ecdf, discard_fraction })
}

/// Ranges of T1 and T2* (µs) for both qubits, as `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceRanges {
    pub t1_fixed: [f64; 2],
    pub t2_star_fixed: [f64; 2],
    pub t1_tunable: [f64; 2],
    pub t2_star_tunable: [f64; 2],
}

impl CoherenceRanges {
    /// Coherence measured under modulation alongside the iRB experiments.
    pub fn under_modulation() -> Self {
        Self {
            t1_fixed: [10.5, 20.3],
            t2_star_fixed: [10.5, 18.0],
            t1_tunable: [18.1, 29.9],
            t2_star_tunable: [16.4, 21.8],
        }
    }

    pub fn infinite() -> Self {
        let inf = [f64::INFINITY; 2];
        Self { t1_fixed: inf, t2_star_fixed: inf, t1_tunable: inf, t2_star_tunable: inf }
    }

    /// Every time multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |r: [f64; 2]| r.map(|t| t * factor);
        Self {
            t1_fixed: s(self.t1_fixed),
            t2_star_fixed: s(self.t2_star_fixed),
            t1_tunable: s(self.t1_tunable),
            t2_star_tunable: s(self.t2_star_tunable),
        }
    }

    pub fn corners(&self) -> Result<Vec<DecoherenceRates>> {
        let mut out = Vec::with_capacity(16);
        for t1f in self.t1_fixed {
            for t2f in self.t2_star_fixed {
                for t1t in self.t1_tunable {
                    for t2t in self.t2_star_tunable {
                        out.push(DecoherenceRates::from_times(t1f, t2f, t1t, t2t)?);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerFidelity {
    pub rates: DecoherenceRates,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityInterval {
    pub min: f64,
    pub max: f64,
    pub corners: Vec<CornerFidelity>,
}

/// Average gate fidelity of the calibrated, frame-corrected gate under
/// static decoherence at each corner of the ranges; returns the extremes.
pub fn coherence_limited_prediction(
    pair: &CoupledPair,
    calibration: &CzCalibration,
    ranges: &CoherenceRanges,
    opts: &IntegratorOptions,
) -> Result<FidelityInterval> {
    let corners = ranges
        .corners()?
        .into_par_iter()
        .map(|rates| {
            let ch = calibration.channel(pair, Some(&rates), opts)?;
            Ok(CornerFidelity { rates, fidelity: average_gate_fidelity(&ch.superop, &cz_unitary())? })
        })
        .collect::<Result<Vec<_>>>()?;
    let min = corners.iter().map(|c| c.fidelity).fold(f64::INFINITY, f64::min);
    let max = corners.iter().map(|c| c.fidelity).fold(f64::NEG_INFINITY, f64::max);
    Ok(FidelityInterval { min, max, corners })
}
