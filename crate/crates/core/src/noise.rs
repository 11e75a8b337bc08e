//! Instrument noise on the flux line and Monte-Carlo coherence experiments
//! under modulation.
//!
//! Two noise components act on the flux seen by the tunable transmon:
//!
//! * a white floor from the signal generator, additive on the flux line, which
//!   dephases through the instantaneous slope `∂f/∂Φ` of the modulated qubit;
//! * 1/f noise on the modulation amplitude and on the DC offset, treated as a
//!   quasi-static offset per shot (integrated over `[1/t_avg, 1/τ]`), which
//!   dephases through `∂ω̄/∂ε` and vanishes to first order at the AC sweet spot.
//!
//! Coherence experiments draw binary shots from the resulting per-shot
//! probabilities and fit the averaged curves exactly as a lab would.

use std::f64::consts::TAU;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{flux_frequency, mean_squared_slope, CoupledPair, TransmonSpec};
use crate::error::{Error, Result};
use crate::numeric::rng::stream;
use crate::numeric::quad::periodic_nodes;
use crate::numeric::{levenberg_marquardt, LsqFit, LsqOptions, Residuals};

/// Default dBm/Hz → flux-PSD transfer coefficient (Φ0² per mW).
///
/// Chosen so that the −130 dBm/Hz profile limits the sweet-spot T2* of the
/// reference tunable transmon to ≈60% of its zero-amplitude value, while the
/// 15 dB quieter profile leaves it within a few percent.
pub const DEFAULT_TRANSFER: f64 = 0.057;

const TAG_REALIZATION: u64 = 0x6e6f_6973_6501;
const TAG_RAMSEY: u64 = 0x6e6f_6973_6502;
const TAG_T1: u64 = 0x6e6f_6973_6503;
const OFFSET_NODES: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spur {
    pub freq_mhz: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSegment {
    /// First wall-clock slot this multiplier applies to. A slot is one
    /// measured RB sequence or coherence probe, in acquisition order.
    pub start: usize,
    pub multiplier: f64,
}

/// Piecewise-constant T1 multiplier versus wall-clock slot.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct T1Drift {
    pub segments: Vec<DriftSegment>,
}

impl T1Drift {
    pub fn constant(multiplier: f64) -> Self {
        Self { segments: vec![DriftSegment { start: 0, multiplier }] }
    }

    /// Multiplier in force at `index`; 1 before the first segment.
    pub fn multiplier_at(&self, index: usize) -> f64 {
        self.segments
            .iter()
            .take_while(|s| s.start <= index)
            .last()
            .map_or(1.0, |s| s.multiplier)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.segments.windows(2) {
            if w[1].start <= w[0].start {
                return Err(Error::invalid("t1 drift segments must have increasing start indices"));
            }
        }
        if self.segments.iter().any(|s| !(s.multiplier > 0.0)) {
            return Err(Error::invalid("t1 drift multipliers must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseProfile {
    /// Generator white floor (dBm/Hz); `None` disables the white component.
    #[serde(default)]
    pub white_floor: Option<f64>,
    /// Flux PSD per unit generator PSD (Φ0² per mW).
    #[serde(default = "default_transfer")]
    pub transfer_coefficient: f64,
    /// 1/f amplitude A_Φ (µΦ0/√Hz at 1 Hz), applied to both the modulation
    /// amplitude and the DC offset.
    #[serde(default)]
    pub one_over_f_amp: f64,
    /// Averaging time setting the 1/f low-frequency cutoff (s).
    #[serde(default = "default_averaging_time")]
    pub averaging_time: f64,
    #[serde(default)]
    pub spurs: Vec<Spur>,
    #[serde(default)]
    pub t1_drift: Option<T1Drift>,
}

fn default_transfer() -> f64 {
    DEFAULT_TRANSFER
}

fn default_averaging_time() -> f64 {
    100.0
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self::quiet()
    }
}

impl NoiseProfile {
    /// No instrument noise at all.
    pub fn quiet() -> Self {
        Self {
            white_floor: None,
            transfer_coefficient: DEFAULT_TRANSFER,
            one_over_f_amp: 0.0,
            averaging_time: default_averaging_time(),
            spurs: Vec::new(),
            t1_drift: None,
        }
    }

    /// Direct-synthesis generator: −145 dBm/Hz floor, 5 µΦ0/√Hz 1/f noise.
    pub fn low_floor() -> Self {
        Self { white_floor: Some(-145.0), one_over_f_amp: 5.0, ..Self::quiet() }
    }

    /// Mixer-based generator, 15 dB noisier: −130 dBm/Hz.
    pub fn high_floor() -> Self {
        Self { white_floor: Some(-130.0), ..Self::low_floor() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.transfer_coefficient >= 0.0) {
            return Err(Error::invalid("transfer coefficient must be >= 0"));
        }
        if !(self.one_over_f_amp >= 0.0) {
            return Err(Error::invalid("1/f amplitude must be >= 0"));
        }
        if !(self.averaging_time > 0.0) {
            return Err(Error::invalid("averaging time must be positive"));
        }
        if let Some(w) = self.white_floor {
            if !w.is_finite() {
                return Err(Error::invalid("white floor must be finite (use null to disable)"));
            }
        }
        if self.spurs.iter().any(|s| !(s.freq_mhz > 0.0) || !s.power_dbm.is_finite()) {
            return Err(Error::invalid("spurs need a positive frequency and finite power"));
        }
        if let Some(d) = &self.t1_drift {
            d.validate()?;
        }
        Ok(())
    }

    /// One-sided white flux PSD (Φ0²/Hz).
    pub fn white_flux_psd(&self) -> f64 {
        self.white_floor.map_or(0.0, |dbm| self.transfer_coefficient * dbm_to_mw(dbm))
    }

    /// Variance (Φ0²) of the quasi-static 1/f offset for an experiment whose
    /// single shot lasts `duration_ns`.
    pub fn quasi_static_variance(&self, duration_ns: f64) -> f64 {
        if self.one_over_f_amp == 0.0 || duration_ns <= 0.0 {
            return 0.0;
        }
        let f_hi = 1e9 / duration_ns;
        let f_lo = 1.0 / self.averaging_time;
        if f_hi <= f_lo {
            return 0.0;
        }
        (self.one_over_f_amp * 1e-6).powi(2) * (f_hi / f_lo).ln()
    }

    /// Peak flux amplitude (Φ0) of a spur tone.
    pub fn spur_amplitude(&self, spur: &Spur) -> f64 {
        (2.0 * self.transfer_coefficient * dbm_to_mw(spur.power_dbm)).sqrt()
    }

    pub fn t1_multiplier(&self, wall_clock: usize) -> f64 {
        self.t1_drift.as_ref().map_or(1.0, |d| d.multiplier_at(wall_clock))
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// One shot's worth of flux noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub sample_rate: f64,
    /// Quasi-static offset of the modulation amplitude ε (Φ0).
    pub amplitude_offset: f64,
    /// Quasi-static offset of the DC bias (Φ0).
    pub dc_offset: f64,
    /// Additive fast flux noise per sample (white floor plus spur tones).
    pub samples: Vec<f64>,
}

/// Draw a noise trace of `duration` ns at `sample_rate` samples/ns.
///
/// White samples are independent with variance `S_Φ · f_s/2` (the one-sided
/// PSD times the Nyquist bandwidth); spur tones get a uniformly random phase.
pub fn noise_realization(profile: &NoiseProfile, duration: f64, sample_rate: f64, seed: u64) -> Result<NoiseRealization> {
    profile.validate()?;
    if !(duration > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::invalid("duration and sample rate must be positive"));
    }
    let mut rng = stream(seed, TAG_REALIZATION, 0);
    let n = (duration * sample_rate).round() as usize;
    let sigma_qs = profile.quasi_static_variance(duration).sqrt();
    let amplitude_offset = sigma_qs * rng.sample::<f64, _>(StandardNormal);
    let dc_offset = sigma_qs * rng.sample::<f64, _>(StandardNormal);

    let sigma_w = (profile.white_flux_psd() * sample_rate * 1e9 / 2.0).sqrt();
    let mut samples: Vec<f64> = (0..n).map(|_| sigma_w * rng.sample::<f64, _>(StandardNormal)).collect();
    for spur in &profile.spurs {
        let a = profile.spur_amplitude(spur);
        let phase = TAU * rng.random::<f64>();
        for (k, s) in samples.iter_mut().enumerate() {
            let t = k as f64 / sample_rate;
            *s += a * (TAU * spur.freq_mhz * 1e-3 * t + phase).cos();
        }
    }
    Ok(NoiseRealization { sample_rate, amplitude_offset, dc_offset, samples })
}

/// Accumulated qubit phase (rad) due to a noise trace during a modulated
/// free evolution, relative to the noiseless modulated evolution.
///
/// Besides the random part, the curvature of the flux map converts the noise
/// power into a systematic frequency offset that grows with the sampled
/// bandwidth; it moves Ramsey fringes but does not dephase.
pub fn trace_phase(spec: &TransmonSpec, dc_bias: f64, epsilon: f64, omega_p: f64, noise: &NoiseRealization) -> f64 {
    let dt = 1.0 / noise.sample_rate;
    let eps = epsilon + noise.amplitude_offset;
    let dc = dc_bias + noise.dc_offset;
    let mut cycles = 0.0;
    for (k, n) in noise.samples.iter().enumerate() {
        let c = (TAU * omega_p * 1e-3 * (k as f64 + 0.5) * dt).cos();
        let noisy = flux_frequency(spec, dc + eps * c + n);
        let clean = flux_frequency(spec, dc_bias + epsilon * c);
        cycles += (noisy - clean) * dt;
    }
    TAU * cycles
}

/// Change of the time-averaged frequency (MHz) when ε and Φ_dc are offset.
///
/// The difference is taken node by node on a fixed trapezoid grid, which is
/// spectrally accurate for the analytic flux map and avoids cancelling two
/// separately converged means.
fn average_shift_offset(spec: &TransmonSpec, dc_bias: f64, epsilon: f64, d_eps: f64, d_dc: f64) -> f64 {
    if d_eps == 0.0 && d_dc == 0.0 {
        return 0.0;
    }
    let total: f64 = periodic_nodes(OFFSET_NODES)
        .map(|th| {
            let c = th.cos();
            flux_frequency(spec, dc_bias + d_dc + (epsilon + d_eps) * c) - flux_frequency(spec, dc_bias + epsilon * c)
        })
        .sum();
    total / OFFSET_NODES as f64 * 1e3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayShape {
    #[default]
    Exponential,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RamseyMethod {
    /// Per-shot Gaussian white phase plus exact quasi-static frequency offset.
    /// Spur tones are not represented.
    #[default]
    Analytic,
    /// Integrate the phase over a sampled noise trace for every shot.
    Trace,
}

/// Delays and sampling settings of a coherence measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoherenceScan {
    /// Free-evolution (modulation) times (ns).
    pub delays: Vec<f64>,
    pub shots: u32,
    /// Artificial Ramsey detuning producing the fringes (MHz).
    pub fringe_mhz: f64,
    pub decay_shape: DecayShape,
    pub method: RamseyMethod,
    /// Sample rate for the trace method (samples/ns).
    pub sample_rate: f64,
    /// Wall-clock experiment index (selects the T1 drift multiplier).
    pub wall_clock: usize,
}

impl Default for CoherenceScan {
    fn default() -> Self {
        Self {
            delays: (0..=100).map(|k| k as f64 * 500.0).collect(),
            shots: 500,
            fringe_mhz: 0.2,
            decay_shape: DecayShape::Exponential,
            method: RamseyMethod::Analytic,
            sample_rate: 4.0,
            wall_clock: 0,
        }
    }
}

impl CoherenceScan {
    fn validate(&self, expected_us: f64) -> Result<()> {
        if self.delays.len() < 8 {
            return Err(Error::invalid("need at least 8 delays"));
        }
        if self.delays.windows(2).any(|w| w[1] <= w[0]) || self.delays[0] < 0.0 {
            return Err(Error::invalid("delays must be non-negative and strictly increasing"));
        }
        if self.shots == 0 {
            return Err(Error::invalid("shots must be >= 1"));
        }
        let span = self.delays[self.delays.len() - 1] - self.delays[0];
        if span < 2.0 * expected_us * 1e3 {
            return Err(Error::invalid(format!(
                "delays span {:.1} µs, need at least twice the expected {expected_us} µs",
                span * 1e-3
            )));
        }
        Ok(())
    }
}

/// A fitted coherence time with a 95% confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceFit {
    /// Fitted decay time (µs).
    pub value: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Fitted model parameters (units as in the model, times in ns).
    pub params: Vec<f64>,
    pub residual_norm: f64,
    /// Measured excited-state fraction per delay.
    pub populations: Vec<f64>,
}

impl CoherenceFit {
    pub fn contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

const Z95: f64 = 1.959_963_984_540_054;

struct RamseyModel<'a> {
    t: &'a [f64],
    y: &'a [f64],
    shape: DecayShape,
}

impl RamseyModel<'_> {
    fn envelope(&self, t: f64, tau: f64) -> f64 {
        match self.shape {
            DecayShape::Exponential => (-t / tau).exp(),
            DecayShape::Gaussian => (-(t / tau).powi(2)).exp(),
        }
    }
}

impl Residuals for RamseyModel<'_> {
    fn n_obs(&self) -> usize {
        self.t.len()
    }
    fn n_params(&self) -> usize {
        5
    }
    // p = [A, τ (ns), f (MHz), φ, B]
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for ((o, &t), &y) in out.iter_mut().zip(self.t).zip(self.y) {
            let model = p[0] * self.envelope(t, p[1]) * (TAU * p[2] * 1e-3 * t + p[3]).cos() + p[4];
            *o = y - model;
        }
    }
}

struct ExpModel<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl Residuals for ExpModel<'_> {
    fn n_obs(&self) -> usize {
        self.t.len()
    }
    fn n_params(&self) -> usize {
        3
    }
    // p = [A, τ (ns), B]
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for ((o, &t), &y) in out.iter_mut().zip(self.t).zip(self.y) {
            *o = y - (p[0] * (-t / p[1]).exp() + p[2]);
        }
    }
}

/// Scale `(JᵀJ)⁻¹` by the residual variance and build the 95% interval on
/// parameter `k` (a time in ns, reported in µs).
fn summarize(fit: LsqFit, k: usize, n_obs: usize, populations: Vec<f64>) -> Result<CoherenceFit> {
    let dof = n_obs.saturating_sub(fit.params.len()).max(1) as f64;
    let residual_norm = fit.chi2.sqrt();
    let tau = fit.params[k];
    let s2 = fit.chi2 / dof;
    let se = (fit.std_err(k).powi(2) * s2).sqrt() * 1e-3;
    if !fit.converged || !(tau > 0.0) || !tau.is_finite() || !se.is_finite() {
        return Err(Error::Fit { reason: format!("decay time {tau} ns did not converge"), residual_norm });
    }
    let value = tau * 1e-3;
    Ok(CoherenceFit {
        value,
        std_err: se,
        ci_low: value - Z95 * se,
        ci_high: value + Z95 * se,
        params: fit.params,
        residual_norm,
        populations,
    })
}

/// Fit `A·e^{−t/τ}·cos(2πft + φ) + B` (or the Gaussian envelope) to a Ramsey
/// curve. Returns τ in µs.
pub fn fit_ramsey(delays: &[f64], populations: &[f64], fringe_mhz: f64, shape: DecayShape) -> Result<CoherenceFit> {
    let model = RamseyModel { t: delays, y: populations, shape };
    let span = delays[delays.len() - 1] - delays[0];
    let mean = populations.iter().sum::<f64>() / populations.len() as f64;
    let amp = populations.iter().map(|p| (p - mean).abs()).fold(0.0, f64::max).max(0.05);
    let start = [amp, span / 3.0, fringe_mhz, 0.0, mean];
    let fit = levenberg_marquardt(&model, &start, LsqOptions::default());
    let mut out = summarize(fit, 1, delays.len(), populations.to_vec())?;
    if out.params[0] < 0.0 {
        // Same curve with A → −A, φ → φ + π.
        out.params[0] = -out.params[0];
        out.params[3] += std::f64::consts::PI;
    }
    Ok(out)
}

/// Fit `A·e^{−t/τ} + B` to a relaxation curve. Returns τ in µs.
pub fn fit_relaxation(delays: &[f64], populations: &[f64]) -> Result<CoherenceFit> {
    let model = ExpModel { t: delays, y: populations };
    let span = delays[delays.len() - 1] - delays[0];
    let b0 = populations[populations.len() - 1].min(0.5);
    let start = [(populations[0] - b0).max(0.1), span / 3.0, b0];
    let fit = levenberg_marquardt(&model, &start, LsqOptions::default());
    summarize(fit, 1, delays.len(), populations.to_vec())
}

fn bernoulli_count<R: Rng>(rng: &mut R, p: f64) -> u32 {
    let p = p.clamp(0.0, 1.0);
    u32::from(rng.random::<f64>() < p)
}

/// Ramsey experiment on the tunable transmon whose free evolution is replaced
/// by a modulated flux pulse. Returns the fitted T2* (µs) with its CI.
///
/// The intrinsic zero-amplitude dephasing of the transmon (`t2_star`) enters
/// as an exponential envelope; the instrument noise adds on top.
pub fn simulate_ramsey_under_modulation(
    pair: &CoupledPair,
    epsilon: f64,
    omega_p: f64,
    profile: &NoiseProfile,
    scan: &CoherenceScan,
    seed: u64,
) -> Result<CoherenceFit> {
    pair.validate()?;
    profile.validate()?;
    scan.validate(pair.tunable.t2_star)?;
    if !(epsilon >= 0.0) || !(omega_p > 0.0) {
        return Err(Error::invalid("need epsilon >= 0 and a positive modulation frequency"));
    }
    let spec = &pair.tunable;
    let dc = pair.dc_bias;
    let t2 = spec.t2_star * 1e3;
    let white = profile.white_flux_psd();
    // Phase variance per second of evolution: (2π)²·(S/2)·⟨f'²⟩, f' in Hz/Φ0.
    let white_phase_rate = TAU * TAU * white / 2.0 * mean_squared_slope(spec, dc, epsilon) * 1e18;

    let populations: Vec<f64> = scan
        .delays
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let mut rng = stream(seed, TAG_RAMSEY, i as u64);
            let sigma_qs = profile.quasi_static_variance(tau.max(1.0)).sqrt();
            let sigma_w = (white_phase_rate * tau * 1e-9).sqrt();
            let envelope = (-tau / t2).exp();
            let mut excited = 0u32;
            for shot in 0..scan.shots {
                let phase = match scan.method {
                    RamseyMethod::Analytic => {
                        let d_eps = sigma_qs * rng.sample::<f64, _>(StandardNormal);
                        let d_dc = sigma_qs * rng.sample::<f64, _>(StandardNormal);
                        let df = average_shift_offset(spec, dc, epsilon, d_eps, d_dc);
                        TAU * df * 1e-3 * tau + sigma_w * rng.sample::<f64, _>(StandardNormal)
                    }
                    RamseyMethod::Trace => {
                        if tau == 0.0 {
                            0.0
                        } else {
                            let trace_seed = rng.random::<u64>() ^ u64::from(shot);
                            let noise = noise_realization(profile, tau, scan.sample_rate, trace_seed)
                                .expect("profile validated above");
                            trace_phase(spec, dc, epsilon, omega_p, &noise)
                        }
                    }
                };
                let p1 = 0.5 + 0.5 * envelope * (TAU * scan.fringe_mhz * 1e-3 * tau + phase).cos();
                excited += bernoulli_count(&mut rng, p1);
            }
            excited as f64 / scan.shots as f64
        })
        .collect();
    fit_ramsey(&scan.delays, &populations, scan.fringe_mhz, scan.decay_shape)
}

/// Relaxation experiment under modulation. The model has no frequency
/// dependence of T1, so modulation leaves the decay unchanged; a T1 drift
/// schedule in the profile rescales it at the scan's wall-clock index.
pub fn simulate_t1_under_modulation(
    pair: &CoupledPair,
    epsilon: f64,
    omega_p: f64,
    profile: &NoiseProfile,
    scan: &CoherenceScan,
    seed: u64,
) -> Result<CoherenceFit> {
    pair.validate()?;
    profile.validate()?;
    if !(epsilon >= 0.0) || !(omega_p > 0.0) {
        return Err(Error::invalid("need epsilon >= 0 and a positive modulation frequency"));
    }
    let t1 = pair.tunable.t1 * 1e3 * profile.t1_multiplier(scan.wall_clock);
    scan.validate(t1 * 1e-3)?;
    let populations: Vec<f64> = scan
        .delays
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let mut rng = stream(seed, TAG_T1, i as u64);
            let p1 = (-tau / t1).exp();
            let excited: u32 = (0..scan.shots).map(|_| bernoulli_count(&mut rng, p1)).sum();
            excited as f64 / scan.shots as f64
        })
        .collect();
    fit_relaxation(&scan.delays, &populations)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherencePoint {
    pub epsilon: f64,
    pub t1: CoherenceFit,
    pub t2_star: CoherenceFit,
}

/// T1 and T2* versus modulation amplitude (one Ramsey and one relaxation
/// curve per amplitude, each with its own RNG stream).
pub fn coherence_sweep(
    pair: &CoupledPair,
    epsilons: &[f64],
    omega_p: f64,
    profile: &NoiseProfile,
    ramsey: &CoherenceScan,
    relaxation: &CoherenceScan,
    seed: u64,
) -> Result<Vec<CoherencePoint>> {
    epsilons
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let s = crate::numeric::rng::splitmix(seed.wrapping_add(k as u64));
            Ok(CoherencePoint {
                epsilon: e,
                t1: simulate_t1_under_modulation(pair, e, omega_p, profile, relaxation, s)?,
                t2_star: simulate_ramsey_under_modulation(pair, e, omega_p, profile, ramsey, s)?,
            })
        })
        .collect()
}

/// Pure dephasing time from measured T1 and T2*: 1/Tφ = 1/T2* − 1/(2T1).
pub fn pure_dephasing_time(t1: f64, t2_star: f64) -> f64 {
    let rate = 1.0 / t2_star - 0.5 / t1;
    if rate <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeScale {
    /// Φ0 per raw amplitude unit.
    pub scale: f64,
    /// Raw amplitude of the fitted minimum.
    pub argmin_raw: f64,
    /// Standard error of `argmin_raw` from the local quadratic fit.
    pub argmin_std_err: f64,
}

/// Linear raw-to-flux scale placing the minimum of a measured δω_T curve at
/// 0.6 Φ0. The minimum is refined by a quadratic fit to the lowest sample and
/// its neighbours.
pub fn amplitude_scale_from_curve(raw: &[f64], delta_omega: &[f64]) -> Result<AmplitudeScale> {
    if raw.len() != delta_omega.len() {
        return Err(Error::DimensionMismatch { expected: raw.len(), found: delta_omega.len() });
    }
    if raw.len() < 3 || raw.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("need at least 3 strictly increasing raw amplitudes"));
    }
    let (imin, _) = delta_omega
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    if imin == 0 || imin == raw.len() - 1 {
        return Err(Error::NoMinimum("lowest sample sits on the edge of the curve".into()));
    }
    let half = (raw.len() / 10).max(2);
    let lo = imin.saturating_sub(half);
    let hi = (imin + half).min(raw.len() - 1);
    let x0 = raw[imin];
    let xs: Vec<f64> = raw[lo..=hi].iter().map(|x| x - x0).collect();
    let ys = &delta_omega[lo..=hi];

    // Ordinary least squares for y = c0 + c1 x + c2 x².
    let mut ata = [0.0; 9];
    let mut aty = [0.0; 3];
    for (x, y) in xs.iter().zip(ys) {
        let row = [1.0, *x, x * x];
        for a in 0..3 {
            aty[a] += row[a] * y;
            for b in 0..3 {
                ata[a * 3 + b] += row[a] * row[b];
            }
        }
    }
    let c = crate::numeric::lsq::solve(&ata, &aty, 3)
        .ok_or_else(|| Error::NoMinimum("degenerate quadratic fit".into()))?;
    if !(c[2] > 0.0) {
        return Err(Error::NoMinimum("local curvature is not positive".into()));
    }
    let vertex = -c[1] / (2.0 * c[2]);
    let argmin = x0 + vertex;
    if argmin <= raw[lo] || argmin >= raw[hi] || argmin <= 0.0 {
        return Err(Error::NoMinimum("fitted vertex outside the bracketing samples".into()));
    }

    // Delta-method error of the vertex from the residual scatter.
    let n = xs.len();
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (c[0] + c[1] * x + c[2] * x * x)).powi(2))
        .sum();
    let s2 = if n > 3 { rss / (n - 3) as f64 } else { 0.0 };
    let cov = crate::numeric::lsq::invert(&ata, 3).unwrap_or_else(|| vec![0.0; 9]);
    let g = [0.0, -1.0 / (2.0 * c[2]), c[1] / (2.0 * c[2] * c[2])];
    let mut var = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            var += g[a] * cov[a * 3 + b] * g[b];
        }
    }
    Ok(AmplitudeScale { scale: 0.6 / argmin, argmin_raw: argmin, argmin_std_err: (var * s2).max(0.0).sqrt() })
}

/// Instrument power spectral density on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentPSD {
    /// Frequencies (MHz), strictly increasing.
    pub frequencies: Vec<f64>,
    /// Power spectral density (dBm/Hz).
    pub power: Vec<f64>,
}

impl InstrumentPSD {
    pub fn new(frequencies: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        if frequencies.len() != power.len() {
            return Err(Error::DimensionMismatch { expected: frequencies.len(), found: power.len() });
        }
        if frequencies.is_empty() {
            return Err(Error::invalid("empty PSD"));
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("PSD frequency grid must be strictly increasing"));
        }
        Ok(Self { frequencies, power })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// White floor (dBm/Hz): the mean of the points within 3 dB of the
    /// median, which rejects spurs and signal peaks.
    pub fn white_floor(&self) -> f64 {
        let mut sorted = self.power.clone();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
        let kept: Vec<f64> = self.power.iter().copied().filter(|p| (p - median).abs() <= 3.0).collect();
        kept.iter().sum::<f64>() / kept.len() as f64
    }

    /// Local maxima more than `threshold_db` above the white floor, one per
    /// contiguous run of excess points.
    pub fn spurs(&self, threshold_db: f64) -> Vec<Spur> {
        let floor = self.white_floor();
        let mut out = Vec::new();
        let mut run: Option<(usize, f64)> = None;
        for (i, &p) in self.power.iter().enumerate() {
            if p > floor + threshold_db {
                match run {
                    Some((_, best)) if best >= p => {}
                    _ => run = Some((i, p)),
                }
            } else if let Some((j, p)) = run.take() {
                out.push(Spur { freq_mhz: self.frequencies[j], power_dbm: p });
            }
        }
        if let Some((j, p)) = run {
            out.push(Spur { freq_mhz: self.frequencies[j], power_dbm: p });
        }
        out
    }
}

/// Read a two-column CSV (frequency MHz, power dBm/Hz). `#` starts a comment;
/// a non-numeric first row is taken as a header.
pub fn load_psd(path: impl AsRef<Path>) -> Result<InstrumentPSD> {
    parse_psd(std::fs::File::open(path)?)
}

pub fn parse_psd<R: Read>(reader: R) -> Result<InstrumentPSD> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut freqs = Vec::new();
    let mut power = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected 2 columns, found {}", rec.len()) });
        }
        let f = rec[0].parse::<f64>();
        let p = rec[1].parse::<f64>();
        match (f, p) {
            (Ok(f), Ok(p)) if f.is_finite() && p.is_finite() => {
                freqs.push(f);
                power.push(p);
            }
            _ if first => {}
            _ => {
                return Err(Error::Parse { line, message: format!("non-numeric row {:?}", rec.iter().collect::<Vec<_>>()) })
            }
        }
        first = false;
    }
    if let Some(k) = freqs.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!("frequency grid not increasing at point {}", k + 2)));
    }
    InstrumentPSD::new(freqs, power)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdSummary {
    pub points: usize,
    pub f_min_mhz: f64,
    pub f_max_mhz: f64,
    pub white_floor_dbm_hz: f64,
    /// White floor converted to a one-sided flux PSD (Φ0²/Hz).
    pub flux_psd: f64,
    pub spurs: Vec<Spur>,
    /// Noise profile reproducing the measured floor and spurs.
    pub profile: NoiseProfile,
}

pub fn summarize_psd(psd: &InstrumentPSD, transfer_coefficient: f64) -> PsdSummary {
    let floor = psd.white_floor();
    let spurs = psd.spurs(10.0);
    let profile = NoiseProfile {
        white_floor: Some(floor),
        transfer_coefficient,
        spurs: spurs.clone(),
        ..NoiseProfile::quiet()
    };
    PsdSummary {
        points: psd.len(),
        f_min_mhz: psd.frequencies[0],
        f_max_mhz: psd.frequencies[psd.len() - 1],
        white_floor_dbm_hz: floor,
        flux_psd: profile.white_flux_psd(),
        spurs,
        profile,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_schedule_lookup() {
        let d = T1Drift {
            segments: vec![DriftSegment { start: 3, multiplier: 0.5 }, DriftSegment { start: 10, multiplier: 0.8 }],
        };
        assert_eq!(d.multiplier_at(0), 1.0);
        assert_eq!(d.multiplier_at(3), 0.5);
        assert_eq!(d.multiplier_at(9), 0.5);
        assert_eq!(d.multiplier_at(50), 0.8);
        let bad = T1Drift { segments: vec![DriftSegment { start: 3, multiplier: 0.5 }, DriftSegment { start: 3, multiplier: 0.8 }] };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn floor_conversion() {
        let p = NoiseProfile { white_floor: Some(-130.0), transfer_coefficient: 2.0, ..NoiseProfile::quiet() };
        assert!((p.white_flux_psd() - 2e-13).abs() < 1e-27);
        assert_eq!(NoiseProfile::quiet().white_flux_psd(), 0.0);
    }

    #[test]
    fn quasi_static_band_integral() {
        let p = NoiseProfile { one_over_f_amp: 2.0, averaging_time: 10.0, ..NoiseProfile::quiet() };
        // ∫ A²/f df from 0.1 Hz to 1 MHz.
        let want = 4e-12 * (1e6f64 / 0.1).ln();
        assert!((p.quasi_static_variance(1000.0) - want).abs() < 1e-24);
    }

    #[test]
    fn fixed_grid_offset_matches_adaptive_quadrature() {
        let spec = TransmonSpec::q6();
        for (e, de, dd) in [(0.3, 1e-3, 0.0), (0.6, -2e-3, 1e-3), (0.0, 1e-2, 2e-2), (0.9, 1e-2, 0.0)] {
            let want = crate::device::avg_shift_mhz(&spec, dd, e + de) - crate::device::avg_shift_mhz(&spec, 0.0, e);
            assert!((average_shift_offset(&spec, 0.0, e, de, dd) - want).abs() < 1e-8, "ε = {e}");
        }
    }

    #[test]
    fn pure_dephasing_formula() {
        assert!((pure_dephasing_time(20.0, 15.0) - 1.0 / (1.0 / 15.0 - 1.0 / 40.0)).abs() < 1e-12);
        assert!(pure_dephasing_time(20.0, 40.0).is_infinite());
    }
}
