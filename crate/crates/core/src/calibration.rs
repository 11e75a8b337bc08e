//! CZ tune-up: chevron acquisition, Rabi-slice fits, Ramsey phase extraction
//! and operating-point search.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{effective_coupling_with, resonant_mod_freq, CoupledPair, CouplingMode};
use crate::dynamics::{
    evolve_batch, gate_superoperator, propagate_unitary, Basis, CMatrix, DecoherenceRates, FrameCorrection,
    GateChannel, IntegratorOptions, Superoperator,
};
use crate::error::{Error, Result};
use crate::numeric::{levenberg_marquardt, nelder_mead, LsqOptions, NelderMeadOptions, Residuals};
use crate::pulse::FluxPulse;

/// Fixed-qubit excited population after driving |11⟩ with pulses on a
/// (modulation frequency × duration) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChevronDataset {
    pub epsilon: f64,
    /// Shoulder width of every pulse (ns).
    pub edge: f64,
    /// Modulation frequencies (MHz).
    pub frequencies: Vec<f64>,
    /// Total pulse durations (ns).
    pub durations: Vec<f64>,
    /// `population[i][j]` at `frequencies[i]`, `durations[j]`.
    pub population: Vec<Vec<f64>>,
    /// Non-fatal diagnostics, e.g. a duration grid too coarse for the
    /// expected Rabi period.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ChevronDataset {
    pub fn slice(&self, freq_index: usize) -> &[f64] {
        &self.population[freq_index]
    }

    /// Index of the grid frequency closest to `freq`.
    pub fn nearest(&self, freq: f64) -> usize {
        self.frequencies
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - freq).abs().total_cmp(&(b.1 - freq).abs()))
            .map(|(i, _)| i)
            .expect("non-empty grid")
    }
}

/// Drive |11⟩ at every grid point and record the fixed qubit's |1⟩ population.
pub fn run_chevron(
    pair: &CoupledPair,
    epsilon: f64,
    frequencies: &[f64],
    durations: &[f64],
    edge: f64,
    rates: Option<&DecoherenceRates>,
    opts: &IntegratorOptions,
) -> Result<ChevronDataset> {
    pair.validate()?;
    if frequencies.is_empty() || durations.is_empty() {
        return Err(Error::invalid("chevron grid must be non-empty"));
    }
    let basis = Basis::for_pair(pair);
    let start = basis.index(1, 1);
    let fixed_excited: Vec<usize> = (0..basis.dim()).filter(|&k| basis.occupation(k).0 == 1).collect();

    let points: Vec<(usize, usize)> =
        (0..frequencies.len()).flat_map(|i| (0..durations.len()).map(move |j| (i, j))).collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(i, j)| {
            let pulse = FluxPulse::new(epsilon, frequencies[i], durations[j], edge);
            pulse.validate()?;
            match rates.filter(|r| !r.is_zero()) {
                None => {
                    let (u, _) = propagate_unitary(pair, &pulse, opts)?;
                    Ok(fixed_excited.iter().map(|&k| u[(k, start)].norm_sqr()).sum())
                }
                Some(r) => {
                    let mut rho = CMatrix::zeros(basis.dim(), basis.dim());
                    rho[(start, start)] = Complex64::new(1.0, 0.0);
                    let (out, _) = evolve_batch(pair, &pulse, &[rho], Some(r), opts)?;
                    Ok(fixed_excited.iter().map(|&k| out[0][(k, k)].re).sum())
                }
            }
        })
        .collect::<Result<_>>()?;

    let population: Vec<Vec<f64>> = values.chunks(durations.len()).map(|c| c.to_vec()).collect();
    let mut warnings = Vec::new();
    if durations.len() > 1 {
        let step = (durations[durations.len() - 1] - durations[0]) / (durations.len() - 1) as f64;
        let centre = frequencies[frequencies.len() / 2];
        let g = effective_coupling_with(pair, epsilon, centre, CouplingMode::Fourier);
        if g > 0.0 {
            // Fastest expected oscillation on the grid: the generalized Rabi
            // frequency at the largest detuning sampled.
            let detuning = frequencies
                .iter()
                .map(|f| 2.0 * (f - resonant_mod_freq(pair, epsilon)))
                .fold(0.0f64, |m, x| m.max(x.abs()));
            let period = 1e3 / (4.0 * g * g + detuning * detuning).sqrt();
            let per_cycle = period / step;
            if per_cycle < 6.0 {
                warnings.push(format!(
                    "duration step {step:.1} ns gives {per_cycle:.1} points per expected Rabi period ({period:.1} ns); need at least 6"
                ));
            }
        }
    }
    Ok(ChevronDataset {
        epsilon,
        edge,
        frequencies: frequencies.to_vec(),
        durations: durations.to_vec(),
        population,
        warnings,
    })
}

/// Cosine fit `P(t) = A·cos(Ωt + φ₀) + C` to one chevron slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceFit {
    /// Ω/2π (MHz).
    pub rabi_freq: f64,
    /// Pulse duration of the first full return of the population (ns).
    pub t_return: f64,
    /// Peak-to-peak oscillation, 2|A|.
    pub contrast: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
}

struct CosineModel<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl Residuals for CosineModel<'_> {
    fn n_obs(&self) -> usize {
        self.t.len()
    }
    fn n_params(&self) -> usize {
        4
    }
    // p = [A, Ω (rad/ns), φ₀, C]
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for ((o, &t), &y) in out.iter_mut().zip(self.t).zip(self.y) {
            *o = y - (p[0] * (p[1] * t + p[2]).cos() + p[3]);
        }
    }
}

/// Linear least squares of y on (cos Ωt, sin Ωt, 1) at fixed Ω.
fn linear_cosine(t: &[f64], y: &[f64], omega: f64) -> ([f64; 3], f64) {
    let mut ata = [0.0; 9];
    let mut aty = [0.0; 3];
    for (&t, &y) in t.iter().zip(y) {
        let row = [(omega * t).cos(), (omega * t).sin(), 1.0];
        for a in 0..3 {
            aty[a] += row[a] * y;
            for b in 0..3 {
                ata[a * 3 + b] += row[a] * row[b];
            }
        }
    }
    let Some(c) = crate::numeric::lsq::solve(&ata, &aty, 3) else {
        return ([0.0; 3], f64::INFINITY);
    };
    let rss = t
        .iter()
        .zip(y)
        .map(|(&t, &y)| (y - c[0] * (omega * t).cos() - c[1] * (omega * t).sin() - c[2]).powi(2))
        .sum();
    ([c[0], c[1], c[2]], rss)
}

/// Fit a cosine to durations `t` (ns) and populations `y`.
///
/// Ω is bracketed by a periodogram-style scan (linear fits on a dense Ω
/// grid, from one cycle over the span up to the grid's Nyquist limit) and
/// refined by Levenberg-Marquardt.
pub fn fit_cosine(t: &[f64], y: &[f64]) -> Result<SliceFit> {
    if t.len() < 8 || t.len() != y.len() {
        return Err(Error::invalid("a slice needs at least 8 points"));
    }
    let span = t[t.len() - 1] - t[0];
    let step = span / (t.len() - 1) as f64;
    let lo = 0.5 * TAU / span;
    let hi = PI / step;
    let n_scan = 400;
    let (best_omega, (best_c, _)) = (0..=n_scan)
        .map(|k| lo + (hi - lo) * k as f64 / n_scan as f64)
        .map(|w| (w, linear_cosine(t, y, w)))
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty scan");
    let amp = best_c[0].hypot(best_c[1]);
    if 2.0 * amp < 0.1 {
        return Err(Error::LowSignal { contrast: 2.0 * amp });
    }
    let phase0 = (-best_c[1]).atan2(best_c[0]);
    let fit = levenberg_marquardt(&CosineModel { t, y }, &[amp, best_omega, phase0, best_c[2]], LsqOptions::default());
    if !fit.converged {
        return Err(Error::Fit { reason: "cosine fit did not converge".into(), residual_norm: fit.chi2.sqrt() });
    }
    let (mut a, mut omega, mut phase, c) = (fit.params[0], fit.params[1], fit.params[2], fit.params[3]);
    if omega < 0.0 {
        omega = -omega;
        phase = -phase;
    }
    if a < 0.0 {
        a = -a;
        phase += PI;
    }
    let contrast = 2.0 * a;
    if contrast < 0.1 {
        return Err(Error::LowSignal { contrast });
    }
    let phase = phase.rem_euclid(TAU);
    // Maxima sit at Ωt + φ₀ = 2πk. The first full return is the first
    // maximum after the first minimum (Ωt + φ₀ = π mod 2π).
    let first_min = ((PI - phase).rem_euclid(TAU)) / omega;
    let t_return = first_min + PI / omega;
    Ok(SliceFit { rabi_freq: omega / TAU * 1e3, t_return, contrast, amplitude: a, phase, offset: c })
}

/// Cosine fit to the slice of `dataset` nearest `freq`.
pub fn fit_slice(dataset: &ChevronDataset, freq: f64) -> Result<SliceFit> {
    let i = dataset.nearest(freq);
    fit_cosine(&dataset.durations, dataset.slice(i))
}

/// Resonance read from a chevron: the slice with the slowest, fullest Rabi
/// oscillation (largest contrast, ties broken by lower Rabi frequency).
pub fn chevron_resonance(dataset: &ChevronDataset) -> Result<(f64, SliceFit)> {
    let fits: Vec<(f64, SliceFit)> = dataset
        .frequencies
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| fit_cosine(&dataset.durations, dataset.slice(i)).ok().map(|s| (f, s)))
        .collect();
    fits.into_iter()
        .max_by(|a, b| {
            let score = |s: &SliceFit| s.contrast - 1e-3 * s.rabi_freq;
            score(&a.1).total_cmp(&score(&b.1))
        })
        .ok_or_else(|| Error::Fit { reason: "no chevron slice could be fitted".into(), residual_norm: f64::NAN })
}

/// Entangling phase and single-qubit Z rotations from simulated Ramsey
/// experiments on the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseExtraction {
    /// Conditional phase φ ∈ (0, 2π].
    pub entangling_phase: f64,
    /// Tunable-qubit phase with the fixed qubit in |0⟩, in [0, 2π).
    pub theta_tunable: f64,
    /// Fixed-qubit phase with the tunable qubit in |0⟩, in [0, 2π).
    pub theta_fixed: f64,
    /// Largest population leaving the computational subspace over the four
    /// basis inputs.
    pub leakage: f64,
}

const RAMSEY_PHASES: usize = 8;

/// One Ramsey experiment: prepare `(|a⟩ + |b⟩)/√2`, apply the gate, then a
/// second π/2 pulse whose phase ϕ is swept. `P(ϕ) = ½(1 + c·cos(θ − ϕ))`,
/// and θ is read off a linear sinusoid fit.
fn ramsey_phase(ch: &Superoperator, a: usize, b: usize) -> f64 {
    let mut rho = CMatrix::zeros(4, 4);
    for &i in &[a, b] {
        for &j in &[a, b] {
            rho[(i, j)] = Complex64::new(0.5, 0.0);
        }
    }
    let out = ch.apply(&rho);
    let coherence = out[(b, a)];
    let (mut sc, mut ss) = (0.0, 0.0);
    for k in 0..RAMSEY_PHASES {
        let varphi = TAU * k as f64 / RAMSEY_PHASES as f64;
        // Population after the analysis pulse: Re(ρ_aa + ρ_bb)/2 plus the
        // interference term Re(ρ_ba e^{−iϕ}).
        let p = 0.5 * (out[(a, a)].re + out[(b, b)].re) + (coherence * Complex64::from_polar(1.0, -varphi)).re;
        sc += p * varphi.cos();
        ss += p * varphi.sin();
    }
    ss.atan2(sc).rem_euclid(TAU)
}

/// Ramsey phase extraction on an already simulated channel.
pub fn ramsey_phases(ch: &Superoperator, leakage: &[f64; 4]) -> Result<PhaseExtraction> {
    if ch.dim != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: ch.dim });
    }
    let worst = leakage.iter().cloned().fold(0.0, f64::max);
    if worst > 0.05 {
        return Err(Error::UnreliablePhase { leakage: worst });
    }
    // Basis order |n_F n_T⟩: 0 = |00⟩, 1 = |01⟩ (tunable excited), 2 = |10⟩, 3 = |11⟩.
    let theta_tunable = ramsey_phase(ch, 0, 1);
    let theta_fixed = ramsey_phase(ch, 0, 2);
    let conditional = ramsey_phase(ch, 2, 3);
    let mut phi = (conditional - theta_tunable).rem_euclid(TAU);
    if phi < 1e-12 {
        phi = TAU;
    }
    Ok(PhaseExtraction { entangling_phase: phi, theta_tunable, theta_fixed, leakage: worst })
}

/// Simulate the pulse and extract φ, θ_T and θ_F from conditional Ramsey
/// experiments.
pub fn extract_phases(
    pair: &CoupledPair,
    pulse: &FluxPulse,
    rates: Option<&DecoherenceRates>,
    opts: &IntegratorOptions,
) -> Result<PhaseExtraction> {
    let ch = gate_superoperator(pair, pulse, rates, None, opts)?;
    ramsey_phases(&ch.superop, &ch.leakage)
}

/// Operating-point search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSearch {
    /// Centre of the frequency scan (MHz); defaults to the resonance estimate.
    pub freq_center: Option<f64>,
    pub freq_span: f64,
    pub freq_points: usize,
    /// Total pulse duration range (ns).
    pub duration_min: f64,
    pub duration_max: f64,
    pub duration_points: usize,
    pub edge: f64,
    /// Largest acceptable residual |02⟩ population.
    pub leakage_threshold: f64,
    /// Weight of leakage against |φ − π| (rad) in the refinement objective.
    pub leakage_weight: f64,
    pub max_evals: usize,
}

impl Default for CalibrationSearch {
    fn default() -> Self {
        Self {
            freq_center: None,
            freq_span: 4.0,
            freq_points: 9,
            duration_min: 140.0,
            duration_max: 240.0,
            duration_points: 11,
            edge: 24.0,
            leakage_threshold: 1e-3,
            leakage_weight: 20.0,
            max_evals: 300,
        }
    }
}

/// A calibrated CZ operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzCalibration {
    /// Modulation frequency (MHz).
    pub omega_p: f64,
    /// Total pulse duration including shoulders (ns).
    pub duration: f64,
    pub edge: f64,
    pub epsilon: f64,
    /// Entangling phase φ ∈ (0, 2π].
    pub entangling_phase: f64,
    /// |φ − π| (rad).
    pub phase_error: f64,
    /// (θ_T, θ_F): single-qubit Z rotations absorbed into the frames (rad).
    pub frame_z: (f64, f64),
    /// g_eff/2π from the Rabi fit at the operating frequency (MHz).
    pub g_eff: f64,
    /// Population left in |02⟩ (and elsewhere outside the computational
    /// subspace) from |11⟩.
    pub residual_11_02_population: f64,
}

impl CzCalibration {
    pub fn pulse(&self) -> FluxPulse {
        FluxPulse::new(self.epsilon, self.omega_p, self.duration, self.edge)
    }

    pub fn frame_correction(&self) -> FrameCorrection {
        FrameCorrection { theta_tunable: self.frame_z.0, theta_fixed: self.frame_z.1 }
    }

    /// Frame-corrected gate channel, optionally with decoherence.
    pub fn channel(
        &self,
        pair: &CoupledPair,
        rates: Option<&DecoherenceRates>,
        opts: &IntegratorOptions,
    ) -> Result<GateChannel> {
        gate_superoperator(pair, &self.pulse(), rates, Some(&self.frame_correction()), opts)
    }
}

struct Candidate {
    omega_p: f64,
    duration: f64,
    phases: PhaseExtraction,
    residual: f64,
}

fn evaluate(pair: &CoupledPair, epsilon: f64, omega_p: f64, duration: f64, edge: f64, opts: &IntegratorOptions) -> Result<Candidate> {
    let pulse = FluxPulse::new(epsilon, omega_p, duration, edge);
    pulse.validate()?;
    let (u, _) = propagate_unitary(pair, &pulse, opts)?;
    let basis = Basis::for_pair(pair);
    let comp = basis.computational();
    let v = CMatrix::from_fn(4, 4, |a, b| u[(comp[a], comp[b])]);
    let mut leakage = [0.0; 4];
    for (k, l) in leakage.iter_mut().enumerate() {
        *l = (1.0 - (0..4).map(|a| v[(a, k)].norm_sqr()).sum::<f64>()).max(0.0);
    }
    let ch = Superoperator::from_unitary(&v);
    // Candidates far from a full return are scored by leakage alone.
    let phases = if leakage.iter().cloned().fold(0.0, f64::max) > 0.05 {
        PhaseExtraction { entangling_phase: 0.0, theta_tunable: 0.0, theta_fixed: 0.0, leakage: leakage[3] }
    } else {
        ramsey_phases(&ch, &leakage)?
    };
    Ok(Candidate { omega_p, duration, phases, residual: leakage[3] })
}

fn phase_error(phi: f64) -> f64 {
    (phi - PI).abs()
}

/// Search (ω_p, duration) near the resonance for the pulse closest to
/// CPHASE(π) with residual |02⟩ population below the threshold.
///
/// A coarse grid seeds a Nelder-Mead refinement of
/// `|φ − π| + w·residual`. The noiseless path is deterministic.
pub fn calibrate_cz(
    pair: &CoupledPair,
    epsilon: f64,
    search: &CalibrationSearch,
    opts: &IntegratorOptions,
) -> Result<CzCalibration> {
    pair.validate()?;
    if search.freq_points == 0 || search.duration_points == 0 {
        return Err(Error::invalid("calibration grid must be non-empty"));
    }
    if search.duration_min < 2.0 * search.edge || search.duration_max < search.duration_min {
        return Err(Error::invalid("duration range must start at or above twice the edge"));
    }
    let center = search.freq_center.unwrap_or_else(|| resonant_mod_freq(pair, epsilon));
    let lin = |lo: f64, hi: f64, n: usize, k: usize| if n == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
    let grid: Vec<(f64, f64)> = (0..search.freq_points)
        .flat_map(|i| {
            (0..search.duration_points).map(move |j| {
                (
                    lin(center - search.freq_span / 2.0, center + search.freq_span / 2.0, search.freq_points, i),
                    lin(search.duration_min, search.duration_max, search.duration_points, j),
                )
            })
        })
        .collect();
    let objective = |c: &Candidate| {
        let pe = if c.phases.entangling_phase == 0.0 { PI } else { phase_error(c.phases.entangling_phase) };
        pe + search.leakage_weight * c.residual
    };
    let scored: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&(w, t)| evaluate(pair, epsilon, w, t, search.edge, opts).map(|c| (w, t, objective(&c))))
        .collect::<Result<_>>()?;
    let &(w0, t0, _) = scored.iter().min_by(|a, b| a.2.total_cmp(&b.2)).expect("non-empty grid");

    let freq_step = if search.freq_points > 1 { search.freq_span / (search.freq_points - 1) as f64 } else { 1.0 };
    let dur_step = if search.duration_points > 1 {
        (search.duration_max - search.duration_min) / (search.duration_points - 1) as f64
    } else {
        10.0
    };
    let min_duration = 2.0 * search.edge;
    let (best, _, _) = nelder_mead(
        |x: &[f64]| {
            if x[1] < min_duration || x[0] <= 0.0 {
                return f64::INFINITY;
            }
            evaluate(pair, epsilon, x[0], x[1], search.edge, opts).map_or(f64::INFINITY, |c| objective(&c))
        },
        &[w0, t0],
        &[0.5 * freq_step, 0.5 * dur_step],
        NelderMeadOptions { max_evals: search.max_evals, f_tol: 1e-9, x_tol: 1e-6 },
    );
    let chosen = evaluate(pair, epsilon, best[0], best[1], search.edge, opts)?;

    // g_eff from a Rabi slice at the chosen frequency.
    let slice_durations: Vec<f64> = (0..40).map(|k| min_duration + 8.0 * k as f64).collect();
    let slice = run_chevron(pair, epsilon, &[chosen.omega_p], &slice_durations, search.edge, None, opts)?;
    let g_eff = fit_slice(&slice, chosen.omega_p).map(|s| s.rabi_freq / 2.0).unwrap_or(f64::NAN);

    let calibration = CzCalibration {
        omega_p: chosen.omega_p,
        duration: chosen.duration,
        edge: search.edge,
        epsilon,
        entangling_phase: chosen.phases.entangling_phase,
        phase_error: phase_error(chosen.phases.entangling_phase),
        frame_z: (chosen.phases.theta_tunable, chosen.phases.theta_fixed),
        g_eff,
        residual_11_02_population: chosen.residual,
    };
    if chosen.residual >= search.leakage_threshold {
        return Err(Error::CalibrationFailed {
            best_phase_error: calibration.phase_error,
            best_leakage: chosen.residual,
            best: Box::new(calibration),
        });
    }
    Ok(calibration)
}
