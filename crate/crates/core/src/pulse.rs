//! Parametric flux pulses: a single carrier under a flat-top envelope with
//! error-function shoulders, and its sampled realization.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::{SQRT_2, TAU};

use crate::error::{Error, Result};

/// Anything that provides a flux value Φ(t) (Φ0) on `[0, duration]` ns.
pub trait FluxSignal: Sync {
    fn flux(&self, t_ns: f64) -> f64;
    fn duration(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPulse {
    /// Modulation amplitude ε (Φ0).
    pub amplitude: f64,
    /// Carrier frequency ω_p/2π (MHz).
    pub mod_freq: f64,
    /// Total length including both shoulders (ns).
    pub duration: f64,
    /// Rise (and fall) time (ns).
    pub edge: f64,
    #[serde(default)]
    pub carrier_phase: f64,
    #[serde(default)]
    pub dc_bias: f64,
}

impl FluxPulse {
    pub fn new(amplitude: f64, mod_freq: f64, duration: f64, edge: f64) -> Self {
        Self { amplitude, mod_freq, duration, edge, carrier_phase: 0.0, dc_bias: 0.0 }
    }

    /// A pulse that does nothing for `duration` ns.
    pub fn idle(duration: f64) -> Self {
        Self::new(0.0, 100.0, duration, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0 && self.edge >= 0.0) {
            return Err(Error::InvalidPulse("times must be non-negative".into()));
        }
        if self.duration < 2.0 * self.edge {
            return Err(Error::InvalidPulse(format!(
                "duration {} ns is shorter than two edges of {} ns",
                self.duration, self.edge
            )));
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::InvalidPulse("amplitude must be non-negative".into()));
        }
        Ok(())
    }

    /// Envelope E(t): ε/2·[erf((t − e/2)/(√2σ)) − erf((t − T + e/2)/(√2σ))], σ = e/4.
    pub fn envelope(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            return 0.0;
        }
        if self.edge == 0.0 {
            return self.amplitude;
        }
        let sigma = self.edge / 4.0;
        let w = SQRT_2 * sigma;
        let rise = erf((t - 0.5 * self.edge) / w);
        let fall = erf((t - self.duration + 0.5 * self.edge) / w);
        0.5 * self.amplitude * (rise - fall)
    }

    pub fn synthesize(&self, sample_rate: f64) -> Result<Waveform> {
        self.validate()?;
        if !(sample_rate * self.duration >= 16.0) {
            return Err(Error::InvalidPulse(format!(
                "{} samples/ns over {} ns gives fewer than 16 samples",
                sample_rate, self.duration
            )));
        }
        let n = (self.duration * sample_rate).round() as usize;
        let samples = (0..n).map(|k| self.flux(k as f64 / sample_rate)).collect();
        Ok(Waveform { sample_rate, samples })
    }
}

impl FluxSignal for FluxPulse {
    fn flux(&self, t: f64) -> f64 {
        let carrier = (TAU * self.mod_freq * 1e-3 * t + self.carrier_phase).cos();
        self.dc_bias + self.envelope(t) * carrier
    }

    fn duration(&self) -> f64 {
        self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    /// Samples per ns.
    pub sample_rate: f64,
    /// Flux values (Φ0) at t_k = k / sample_rate.
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| k as f64 / self.sample_rate)
    }
}

impl FluxSignal for Waveform {
    /// Four-point cubic Lagrange interpolation between samples.
    fn flux(&self, t: f64) -> f64 {
        let n = self.samples.len();
        if n == 0 {
            return 0.0;
        }
        let x = (t * self.sample_rate).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n.saturating_sub(2));
        let base = i.saturating_sub(1).min(n.saturating_sub(4));
        let count = n.min(4);
        let mut acc = 0.0;
        for a in 0..count {
            let xa = (base + a) as f64;
            let mut w = 1.0;
            for b in 0..count {
                if a != b {
                    let xb = (base + b) as f64;
                    w *= (x - xb) / (xa - xb);
                }
            }
            acc += w * self.samples[base + a];
        }
        acc
    }

    fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}
