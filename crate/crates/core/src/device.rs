//! Static physics of the asymmetric tunable transmon and its capacitive
//! partner: flux-to-frequency map, modulation spectrum, AC sweet spot,
//! sideband coupling and the |11⟩↔|02⟩ resonance condition.
//!
//! Units: transmon frequencies in GHz, anharmonicities, couplings and
//! modulation frequencies in MHz (cyclic, i.e. ω/2π), flux in Φ0, times in µs.
//! Anharmonicities are stored as magnitudes; all energies use −|η|.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2, TAU};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::{golden_section, periodic_mean, special::bessel_j1};

const QUAD_TOL: f64 = 1e-9;

fn default_levels() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonSpec {
    /// Maximum 0→1 frequency (GHz).
    pub f_max: f64,
    /// Minimum 0→1 frequency (GHz); equal to `f_max` for a fixed transmon.
    pub f_min: f64,
    /// Anharmonicity magnitude |η| (MHz).
    pub anharmonicity: f64,
    /// Energy relaxation time (µs).
    pub t1: f64,
    /// Ramsey dephasing time (µs).
    pub t2_star: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    pub tunable: bool,
}

impl TransmonSpec {
    /// Tunable transmon Q6 of the Q6-Q7 pair.
    pub fn q6() -> Self {
        Self { f_max: 4.475, f_min: 4.080, anharmonicity: 200.0, t1: 23.6, t2_star: 19.45, levels: 3, tunable: true }
    }

    /// Fixed-frequency transmon Q7.
    pub fn q7() -> Self {
        Self { f_max: 3.826, f_min: 3.826, anharmonicity: 200.0, t1: 15.9, t2_star: 14.65, levels: 3, tunable: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_min > 0.0 && self.f_max >= self.f_min) {
            return Err(Error::invalid(format!("need f_max >= f_min > 0, got {} / {}", self.f_max, self.f_min)));
        }
        if self.anharmonicity < 0.0 {
            return Err(Error::invalid("anharmonicity is stored as a non-negative magnitude"));
        }
        if !(self.t1 > 0.0 && self.t2_star > 0.0) {
            return Err(Error::invalid("coherence times must be positive"));
        }
        if self.t2_star > 2.0 * self.t1 * (1.0 + 1e-12) {
            return Err(Error::invalid(format!("t2_star {} exceeds 2*t1 = {}", self.t2_star, 2.0 * self.t1)));
        }
        if self.levels < 2 {
            return Err(Error::invalid("a transmon needs at least two levels"));
        }
        Ok(())
    }

    /// SQUID asymmetry `d = ((f_min+|η|)/(f_max+|η|))²`.
    pub fn asymmetry(&self) -> f64 {
        let eta = self.anharmonicity / 1e3;
        ((self.f_min + eta) / (self.f_max + eta)).powi(2)
    }
}

/// Tunable transmon capacitively coupled to a fixed one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledPair {
    pub tunable: TransmonSpec,
    pub fixed: TransmonSpec,
    /// Bare coupling g (MHz).
    #[serde(default = "default_coupling")]
    pub g: f64,
    /// DC flux bias Φ_dc (Φ0); 0 parks the tunable transmon at its maximum.
    #[serde(default)]
    pub dc_bias: f64,
}

fn default_coupling() -> f64 {
    5.0
}

impl CoupledPair {
    pub fn q6_q7() -> Self {
        Self { tunable: TransmonSpec::q6(), fixed: TransmonSpec::q7(), g: 5.0, dc_bias: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.tunable.validate()?;
        self.fixed.validate()?;
        if !self.tunable.tunable {
            return Err(Error::invalid("the `tunable` member of a pair must be tunable"));
        }
        if !(self.g > 0.0) {
            return Err(Error::invalid("coupling g must be positive"));
        }
        if self.tunable.levels < 3 {
            return Err(Error::invalid("the tunable transmon needs 3 levels for the |11>-|02> transition"));
        }
        Ok(())
    }

    /// Static detuning Δ = f_T^max − f_F (MHz).
    pub fn detuning_mhz(&self) -> f64 {
        (self.tunable.f_max - self.fixed.f_max) * 1e3
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let pair: Self = serde_json::from_str(s)?;
        pair.validate()?;
        Ok(pair)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Instantaneous 0→1 frequency (GHz) of a tunable transmon at flux `phi` (Φ0).
pub fn frequency_at_flux(spec: &TransmonSpec, phi: f64) -> Result<f64> {
    if !spec.tunable {
        return Err(Error::invalid("frequency_at_flux needs a tunable transmon"));
    }
    Ok(flux_frequency(spec, phi))
}

/// Unchecked flux map; fixed transmons return `f_max`.
pub(crate) fn flux_frequency(spec: &TransmonSpec, phi: f64) -> f64 {
    if !spec.tunable {
        return spec.f_max;
    }
    let eta = spec.anharmonicity / 1e3;
    let d = spec.asymmetry();
    let (s, c) = (PI * phi).sin_cos();
    (spec.f_max + eta) * (c * c + d * d * s * s).powf(0.25) - eta
}

/// Derivative of the flux map (GHz/Φ0).
pub(crate) fn flux_slope(spec: &TransmonSpec, phi: f64) -> f64 {
    if !spec.tunable {
        return 0.0;
    }
    let eta = spec.anharmonicity / 1e3;
    let d = spec.asymmetry();
    let (s, c) = (PI * phi).sin_cos();
    let inner = c * c + d * d * s * s;
    // d/dΦ inner = 2π s c (d² − 1)
    (spec.f_max + eta) * 0.25 * inner.powf(-0.75) * TAU * s * c * (d * d - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    /// Multiple of the carrier frequency ω_p.
    pub index: u32,
    /// Cosine amplitude of the frequency modulation at this harmonic (MHz).
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationResponse {
    pub epsilon: f64,
    /// Carrier frequency ω_p/2π (MHz).
    pub mod_freq: f64,
    /// δω_T = ω̄_T − ω_T^max (MHz).
    pub avg_shift: f64,
    pub harmonics: Vec<Harmonic>,
    /// Flux excursion crosses ±0.5 Φ0 (allowed; the map is periodic).
    pub exceeds_half_flux: bool,
}

const HARMONIC_ORDER: u32 = 16;

/// Time-averaged frequency shift and harmonic content of the tunable transmon
/// under `Φ(t) = Φ_dc + ε cos(ω_p t)` with Φ_dc = 0.
pub fn modulation_response(spec: &TransmonSpec, epsilon: f64, omega_p: f64) -> Result<ModulationResponse> {
    modulation_response_biased(spec, 0.0, epsilon, omega_p)
}

pub fn modulation_response_biased(
    spec: &TransmonSpec,
    dc_bias: f64,
    epsilon: f64,
    omega_p: f64,
) -> Result<ModulationResponse> {
    if !spec.tunable {
        return Err(Error::invalid("modulation needs a tunable transmon"));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if !(omega_p > 0.0) {
        return Err(Error::invalid("modulation frequency must be positive"));
    }
    let avg_shift = avg_shift_mhz(spec, dc_bias, epsilon);
    let even_only = dc_bias == 0.0;
    let harmonics = (1..=HARMONIC_ORDER)
        .filter(|k| !even_only || k % 2 == 0)
        .map(|k| {
            let amp = if epsilon == 0.0 {
                0.0
            } else {
                2.0 * periodic_mean(
                    |th| (flux_frequency(spec, dc_bias + epsilon * th.cos()) - spec.f_max) * 1e3 * (k as f64 * th).cos(),
                    QUAD_TOL,
                )
            };
            Harmonic { index: k, amplitude: amp }
        })
        .collect();
    Ok(ModulationResponse {
        epsilon,
        mod_freq: omega_p,
        avg_shift,
        harmonics,
        exceeds_half_flux: dc_bias.abs() + epsilon > 0.5,
    })
}

/// δω_T(ε) in MHz, by periodic quadrature over one modulation period.
pub fn avg_shift_mhz(spec: &TransmonSpec, dc_bias: f64, epsilon: f64) -> f64 {
    if epsilon == 0.0 {
        return (flux_frequency(spec, dc_bias) - spec.f_max) * 1e3;
    }
    periodic_mean(|th| (flux_frequency(spec, dc_bias + epsilon * th.cos()) - spec.f_max) * 1e3, QUAD_TOL)
}

/// Time-averaged squared flux slope ⟨(∂f/∂Φ)²⟩ over a modulation period (GHz²/Φ0²).
pub fn mean_squared_slope(spec: &TransmonSpec, dc_bias: f64, epsilon: f64) -> f64 {
    if epsilon == 0.0 {
        return flux_slope(spec, dc_bias).powi(2);
    }
    periodic_mean(|th| flux_slope(spec, dc_bias + epsilon * th.cos()).powi(2), QUAD_TOL)
}

/// Derivative dδω_T/dε (MHz/Φ0) by central difference.
pub fn shift_slope(spec: &TransmonSpec, dc_bias: f64, epsilon: f64) -> f64 {
    let h = 1e-4;
    let lo = (epsilon - h).max(0.0);
    (avg_shift_mhz(spec, dc_bias, epsilon + h) - avg_shift_mhz(spec, dc_bias, lo)) / (epsilon + h - lo)
}

/// AC sweet spot: the modulation amplitude ε* ∈ (0, 1] Φ0 minimizing ω̄_T.
///
/// A 0.01 Φ0 grid brackets the interior minimum, then golden-section search
/// refines it. The average frequency does not depend on `omega_p`; the
/// argument is validated and kept for interface symmetry.
pub fn sweet_spot_amplitude(spec: &TransmonSpec, omega_p: f64) -> Result<f64> {
    sweet_spot_amplitude_biased(spec, 0.0, omega_p)
}

pub fn sweet_spot_amplitude_biased(spec: &TransmonSpec, dc_bias: f64, omega_p: f64) -> Result<f64> {
    if !spec.tunable {
        return Err(Error::NoSweetSpot("transmon is not tunable".into()));
    }
    if !(omega_p > 0.0) {
        return Err(Error::invalid("modulation frequency must be positive"));
    }
    if spec.f_max - spec.f_min <= 1e-12 {
        return Err(Error::NoSweetSpot("flat spectrum (f_max = f_min)".into()));
    }
    let grid: Vec<(f64, f64)> = (1..=100)
        .map(|k| {
            let e = k as f64 * 0.01;
            (e, avg_shift_mhz(spec, dc_bias, e))
        })
        .collect();
    let (imin, _) = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty grid");
    if imin == grid.len() - 1 {
        return Err(Error::NoSweetSpot("average frequency still decreasing at 1 Φ0".into()));
    }
    let lo = if imin == 0 { 1e-6 } else { grid[imin - 1].0 };
    let hi = grid[imin + 1].0;
    let (eps, _) = golden_section(|e| avg_shift_mhz(spec, dc_bias, e), lo, hi, 1e-9);
    Ok(eps)
}

/// Sign convention for the shift inside the resonance condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceConvention {
    /// |Δ − |η_T| + δω_T|: the shift lowers the |02⟩ energy with the qubit frequency.
    #[default]
    ShiftAdded,
    /// |Δ − |η_T| − δω_T|.
    ShiftSubtracted,
}

/// Resonance offset Ξ = 2ω_p − |Δ − |η_T| ± δω_T| (MHz). Ξ = 0 on the
/// parametric resonance contour in (ε, ω_p).
pub fn resonance_offset(pair: &CoupledPair, epsilon: f64, omega_p: f64) -> f64 {
    resonance_offset_with(pair, epsilon, omega_p, ResonanceConvention::default())
}

pub fn resonance_offset_with(pair: &CoupledPair, epsilon: f64, omega_p: f64, conv: ResonanceConvention) -> f64 {
    let shift = avg_shift_mhz(&pair.tunable, pair.dc_bias, epsilon);
    resonance_offset_for_shift(pair, shift, omega_p, conv)
}

pub fn resonance_offset_for_shift(pair: &CoupledPair, shift: f64, omega_p: f64, conv: ResonanceConvention) -> f64 {
    let base = pair.detuning_mhz() - pair.tunable.anharmonicity;
    let gap = match conv {
        ResonanceConvention::ShiftAdded => base + shift,
        ResonanceConvention::ShiftSubtracted => base - shift,
    };
    2.0 * omega_p - gap.abs()
}

/// Modulation frequency placing the first even sideband on resonance at ε (MHz).
pub fn resonant_mod_freq(pair: &CoupledPair, epsilon: f64) -> f64 {
    let shift = avg_shift_mhz(&pair.tunable, pair.dc_bias, epsilon);
    0.5 * (pair.detuning_mhz() - pair.tunable.anharmonicity + shift).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// √2·g·|J₁(δω_T / 2ω_p)|.
    #[default]
    Bessel,
    /// √2·g·|c₋₂|, with c₋₂ the Fourier coefficient of the modulation phase
    /// factor at −2ω_p.
    Fourier,
}

/// Effective |11⟩↔|02⟩ sideband coupling g_eff (MHz).
pub fn effective_coupling(pair: &CoupledPair, epsilon: f64, omega_p: f64) -> f64 {
    effective_coupling_with(pair, epsilon, omega_p, CouplingMode::Bessel)
}

pub fn effective_coupling_with(pair: &CoupledPair, epsilon: f64, omega_p: f64, mode: CouplingMode) -> f64 {
    if epsilon == 0.0 {
        return 0.0;
    }
    let spec = &pair.tunable;
    match mode {
        CouplingMode::Bessel => {
            let shift = avg_shift_mhz(spec, pair.dc_bias, epsilon);
            SQRT_2 * pair.g * bessel_j1(shift / (2.0 * omega_p)).abs()
        }
        CouplingMode::Fourier => SQRT_2 * pair.g * sideband_weight(spec, pair.dc_bias, epsilon, omega_p, 2),
    }
}

/// |c_{−m}|: weight of the `e^{−i m ω_p t}` component of the phase factor
/// `exp(i·2π∫(f_T(t) − f̄_T) dt)`.
pub fn sideband_weight(spec: &TransmonSpec, dc_bias: f64, epsilon: f64, omega_p: f64, m: u32) -> f64 {
    // Cosine series of the frequency excursion on one period, integrated
    // term by term into the accumulated phase.
    const NODES: usize = 512;
    const ORDER: usize = 48;
    let excursion: Vec<f64> = (0..NODES)
        .map(|k| {
            let th = TAU * k as f64 / NODES as f64;
            (flux_frequency(spec, dc_bias + epsilon * th.cos()) - spec.f_max) * 1e3
        })
        .collect();
    let mean = excursion.iter().sum::<f64>() / NODES as f64;
    let mut cos_coef = vec![0.0; ORDER + 1];
    let mut sin_coef = vec![0.0; ORDER + 1];
    for k in 1..=ORDER {
        for (j, v) in excursion.iter().enumerate() {
            let th = TAU * j as f64 / NODES as f64;
            cos_coef[k] += 2.0 * (v - mean) * (k as f64 * th).cos() / NODES as f64;
            sin_coef[k] += 2.0 * (v - mean) * (k as f64 * th).sin() / NODES as f64;
        }
    }
    // phase(θ) = Σ_k [a_k sin(kθ) − b_k cos(kθ)] / (k ω_p), θ = 2π ω_p t
    let (mut re, mut im) = (0.0, 0.0);
    for j in 0..NODES {
        let th = TAU * j as f64 / NODES as f64;
        let phase: f64 = (1..=ORDER)
            .map(|k| {
                let kt = k as f64 * th;
                (cos_coef[k] * kt.sin() - sin_coef[k] * kt.cos()) / (k as f64 * omega_p)
            })
            .sum();
        let arg = phase + m as f64 * th;
        re += arg.cos();
        im += arg.sin();
    }
    (re * re + im * im).sqrt() / NODES as f64
}
