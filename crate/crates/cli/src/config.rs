//! Experiment configuration: one JSON document with the device, the noise
//! environment, the master seed and one block per subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use paracz::benchmarking::{RbConfig, RepeatedIrbConfig};
use paracz::calibration::{CalibrationSearch, CzCalibration};
use paracz::dynamics::IntegratorOptions;
use paracz::noise::{CoherenceScan, NoiseProfile};
use paracz::CoupledPair;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "CoupledPair::q6_q7")]
    pub device: CoupledPair,
    #[serde(default)]
    pub noise: NoiseProfile,
    /// Master seed; mandatory for stochastic subcommands unless `--seed` is given.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub integrator: IntegratorOptions,
    #[serde(default)]
    pub dum: Option<DumBlock>,
    #[serde(default)]
    pub coherence: Option<CoherenceBlock>,
    #[serde(default)]
    pub chevron: Option<ChevronBlock>,
    #[serde(default)]
    pub calibrate: Option<CalibrateBlock>,
    #[serde(default)]
    pub irb: Option<IrbBlock>,
    #[serde(default)]
    pub repeat_irb: Option<RepeatIrbBlock>,
    #[serde(default)]
    pub ptm: Option<PtmBlock>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

/// Grid of modulation amplitudes for the averaged-detuning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DumBlock {
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub points: usize,
    /// Modulation frequency (MHz).
    pub omega_p: f64,
}

impl Default for DumBlock {
    fn default() -> Self {
        Self { epsilon_min: 0.0, epsilon_max: 1.0, points: 101, omega_p: 92.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceBlock {
    /// Modulation amplitudes (Φ0).
    pub epsilons: Vec<f64>,
    #[serde(default = "default_omega_p")]
    pub omega_p: f64,
    #[serde(default)]
    pub ramsey: CoherenceScan,
    #[serde(default)]
    pub relaxation: CoherenceScan,
}

fn default_omega_p() -> f64 {
    92.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChevronBlock {
    /// Modulation amplitude; the AC sweet spot when absent.
    pub epsilon: Option<f64>,
    /// Centre of the frequency grid (MHz); the predicted resonance when absent.
    pub freq_center: Option<f64>,
    pub freq_span: f64,
    pub freq_points: usize,
    pub duration_min: f64,
    pub duration_max: f64,
    pub duration_points: usize,
    pub edge: f64,
    /// Simulate with the device's T1/T2* instead of unitary dynamics.
    pub decoherence: bool,
}

impl Default for ChevronBlock {
    fn default() -> Self {
        Self {
            epsilon: None,
            freq_center: None,
            freq_span: 8.0,
            freq_points: 40,
            duration_min: 48.0,
            duration_max: 400.0,
            duration_points: 40,
            edge: 24.0,
            decoherence: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateBlock {
    pub epsilon: Option<f64>,
    pub search: CalibrationSearch,
}

/// Where the CZ channel of the benchmarking subcommands comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateBlock {
    /// Perfect CZ and single-qubit layers; skips calibration entirely.
    pub ideal: bool,
    /// A previous calibration result; calibrated afresh when absent.
    pub calibration: Option<CzCalibration>,
    pub epsilon: Option<f64>,
    pub search: CalibrationSearch,
    /// Apply the device's T1/T2* during the gate and the single-qubit layers.
    pub decoherence: bool,
    /// Duration of each single-qubit layer modelled as a decohering idle (ns).
    pub local_layer_ns: f64,
}

impl Default for GateBlock {
    fn default() -> Self {
        Self {
            ideal: false,
            calibration: None,
            epsilon: None,
            search: CalibrationSearch::default(),
            decoherence: true,
            local_layer_ns: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrbBlock {
    pub gate: GateBlock,
    pub rb: RbConfig,
    /// Bootstrap replicants for the infidelity interval.
    pub replicants: usize,
}

impl Default for IrbBlock {
    fn default() -> Self {
        Self { gate: GateBlock::default(), rb: RbConfig::default(), replicants: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepeatIrbBlock {
    pub gate: GateBlock,
    pub repeated: RepeatedIrbConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PtmBlock {
    pub gate: GateBlock,
}

/// A parsed configuration with the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub bytes: Vec<u8>,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let bytes = match path {
            Some(p) => std::fs::read(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
            None => b"{}".to_vec(),
        };
        let config = parse(&bytes)?;
        Ok(Self { config, bytes })
    }
}

/// Parse and validate; errors name the offending key.
pub fn parse(bytes: &[u8]) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig = serde_json::from_slice(bytes).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn invalid(key: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {why}"))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.device.validate().map_err(|e| invalid("device", e))?;
        self.noise.validate().map_err(|e| invalid("noise", e))?;
        if !(self.integrator.points_per_period >= 20.0) {
            return Err(invalid("integrator.points_per_period", "must be at least 20"));
        }
        if let Some(b) = &self.dum {
            if b.points < 2 {
                return Err(invalid("dum.points", "need at least 2 points"));
            }
            if !(0.0 <= b.epsilon_min && b.epsilon_min < b.epsilon_max) {
                return Err(invalid("dum.epsilon_max", "need 0 <= epsilon_min < epsilon_max"));
            }
            if !(b.omega_p > 0.0) {
                return Err(invalid("dum.omega_p", "must be positive"));
            }
        }
        if let Some(b) = &self.coherence {
            if b.epsilons.is_empty() || b.epsilons.iter().any(|e| !(*e >= 0.0)) {
                return Err(invalid("coherence.epsilons", "need at least one non-negative amplitude"));
            }
        }
        if let Some(b) = &self.chevron {
            if b.freq_points < 1 || b.duration_points < 8 {
                return Err(invalid("chevron.duration_points", "need >= 1 frequency and >= 8 durations"));
            }
            if !(b.duration_min >= 2.0 * b.edge && b.duration_max > b.duration_min) {
                return Err(invalid("chevron.duration_min", "need 2*edge <= duration_min < duration_max"));
            }
        }
        for (key, gate) in [
            ("irb.gate", self.irb.as_ref().map(|b| &b.gate)),
            ("repeat_irb.gate", self.repeat_irb.as_ref().map(|b| &b.gate)),
            ("ptm.gate", self.ptm.as_ref().map(|b| &b.gate)),
        ] {
            if let Some(g) = gate {
                if !(g.local_layer_ns >= 0.0) {
                    return Err(invalid(&format!("{key}.local_layer_ns"), "must be non-negative"));
                }
            }
        }
        if let Some(b) = &self.irb {
            b.rb.validate().map_err(|e| invalid("irb.rb", e))?;
            if b.replicants == 0 {
                return Err(invalid("irb.replicants", "must be >= 1"));
            }
        }
        if let Some(b) = &self.repeat_irb {
            b.repeated.rb.validate().map_err(|e| invalid("repeat_irb.repeated.rb", e))?;
            if b.repeated.experiments == 0 || b.repeated.replicants == 0 {
                return Err(invalid("repeat_irb.repeated", "experiments and replicants must be >= 1"));
            }
        }
        Ok(())
    }

    /// The block for a subcommand, or a schema error naming it.
    pub fn block<'a, T>(block: &'a Option<T>, key: &str) -> Result<&'a T, CliError> {
        block.as_ref().ok_or_else(|| CliError::Config(format!("missing key `{key}`")))
    }

    /// Effective master seed: the flag wins over the config.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        flag.or(self.seed).ok_or_else(|| CliError::Config("missing key `seed` (or pass --seed)".into()))
    }
}
