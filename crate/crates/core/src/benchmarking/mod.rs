//! Two-qubit Clifford machinery and the interleaved-RB statistics pipeline.

pub mod clifford;
pub mod fit;
pub mod rb;
pub mod repeated;
pub mod stats;

pub use clifford::{
    clifford_compose, clifford_invert, clifford_sample, compile_interleaved, compile_to_native, equal_up_to_phase,
    CliffordElement, CliffordGroup, NativeOp, NativeSequence, Pauli, Tableau, GROUP_ORDER, SINGLE_QUBIT_ORDER,
};
pub use fit::{fit_decay, irb_estimate, irb_from_decay_parameters, DecayFit, IrbResult};
pub use rb::{
    acquisition_slots, ptm_of, run_decays, run_rb, sequence_ops, sequence_survival, synthetic_decay, ChannelSchedule, DecayKind, DecayPlan, InterleavedGate,
    NativeChannels, RbConfig, RbDataset, SequenceRecord,
};
pub use repeated::{
    coherence_limited_prediction, pooled_infidelity, run_repeated_irb, ChannelSource, CoherenceProbe, CoherenceRanges,
    CornerFidelity, ExperimentResult, FidelityInterval, FixedChannels, GateModel, ProbeSettings, RepeatedIrb,
    RepeatedIrbConfig,
};
pub use stats::{bootstrap_ci, ecdf_with_band, quantile, stability_test, BootstrapCi, Ecdf, StabilityTest};
