//! Numerical laboratory for a flux-modulated, parametrically activated CZ
//! gate between a tunable and a fixed-frequency transmon.
//!
//! The crate covers the device physics ([`device`]), flux pulses
//! ([`pulse`]), two-transmon open-system dynamics ([`dynamics`]), instrument
//! noise and coherence under modulation ([`noise`]), the gate tune-up
//! ([`calibration`]) and the interleaved randomized benchmarking pipeline
//! ([`benchmarking`]).

pub mod benchmarking;
pub mod calibration;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod noise;
pub mod numeric;
pub mod pulse;

pub use device::{CoupledPair, ModulationResponse, TransmonSpec};
pub use dynamics::{DecoherenceRates, DensityMatrix, Superoperator};
pub use error::{Error, Result};
pub use pulse::{FluxPulse, Waveform};
