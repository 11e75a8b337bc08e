//! One function per subcommand: run the module operation, write the CSV/JSON
//! artifacts and, on request, SVG plots rendered from the CSVs just written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use paracz::benchmarking::{
    bootstrap_ci, fit_decay, irb_estimate, run_decays, run_repeated_irb, BootstrapCi, ChannelSchedule, ChannelSource,
    DecayFit, DecayKind, DecayPlan, FixedChannels, GateModel, IrbResult, NativeChannels, RbDataset, RepeatedIrb,
};
use paracz::calibration::{calibrate_cz, run_chevron, CzCalibration};
use paracz::device::{avg_shift_mhz, resonant_mod_freq, sweet_spot_amplitude_biased};
use paracz::dynamics::{average_gate_fidelity, cz_unitary, pauli_transfer_matrix, QubitDecoherence};
use paracz::io::{self, CoherenceRow, Metadata, ShiftCurve};
use paracz::noise::{coherence_sweep, parse_psd, summarize_psd};
use paracz::{CoupledPair, DecoherenceRates};

use crate::config::{ExperimentConfig, GateBlock, LoadedConfig};
use crate::error::CliError;
use crate::svg::{self, Plot, Series, Style};

/// Reference modulation frequency for sweet-spot searches (MHz); the
/// averaged frequency does not depend on it.
const SWEET_SPOT_OMEGA_P: f64 = 92.0;

/// Output directory, metadata and plotting switch shared by every artifact.
pub struct Emitter {
    dir: PathBuf,
    meta: Metadata,
    svg: bool,
    pub written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: PathBuf, meta: Metadata, svg: bool) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|source| CliError::Output { path: dir.display().to_string(), source })?;
        Ok(Self { dir, meta, svg, written: Vec::new() })
    }

    fn emit<F>(&mut self, name: &str, write: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut Vec<u8>, &Metadata) -> paracz::Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf, &self.meta).map_err(CliError::core(format!("writing {name}")))?;
        self.save(name, &buf)
    }

    fn save(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Output { path: path.display().to_string(), source })?;
        self.written.push(path.clone());
        Ok(path)
    }

    fn plot(&mut self, name: &str, render: impl FnOnce() -> Result<String, CliError>) -> Result<(), CliError> {
        if self.svg {
            let text = render()?;
            self.save(name, text.as_bytes())?;
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn default_epsilon(pair: &CoupledPair) -> Result<f64, CliError> {
    sweet_spot_amplitude_biased(&pair.tunable, pair.dc_bias, SWEET_SPOT_OMEGA_P).map_err(CliError::core("locating the AC sweet spot"))
}

fn no_decoherence() -> DecoherenceRates {
    DecoherenceRates { fixed: QubitDecoherence::none(), tunable: QubitDecoherence::none() }
}

fn device_rates(pair: &CoupledPair, on: bool) -> Result<DecoherenceRates, CliError> {
    if on {
        DecoherenceRates::from_pair(pair).map_err(CliError::core("device coherence"))
    } else {
        Ok(no_decoherence())
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

pub fn dum(cfg: &ExperimentConfig, out: &mut Emitter) -> Result<(), CliError> {
    let block = cfg.dum.clone().unwrap_or_default();
    let spec = &cfg.device.tunable;
    let sweet_spot = sweet_spot_amplitude_biased(spec, cfg.device.dc_bias, block.omega_p)
        .map_err(CliError::core("locating the AC sweet spot"))?;
    let epsilon = grid(block.epsilon_min, block.epsilon_max, block.points);
    let shift_mhz = epsilon.iter().map(|&e| avg_shift_mhz(spec, cfg.device.dc_bias, e)).collect();
    let curve = ShiftCurve { epsilon, shift_mhz, sweet_spot };
    let path = out.emit("dum.csv", |w, m| io::write_shift_csv(w, m, &curve))?;
    out.plot("dum.svg", || {
        let (_, c) = io::read_shift_csv(read(&path)?.as_slice()).map_err(CliError::core("reloading dum.csv"))?;
        let at = c.epsilon.iter().zip(&c.shift_mhz).min_by(|a, b| (a.0 - c.sweet_spot).abs().total_cmp(&(b.0 - c.sweet_spot).abs()));
        Ok(svg::line_plot(&Plot {
            title: format!("Averaged detuning, sweet spot at {:.4} Φ0", c.sweet_spot),
            x_label: "modulation amplitude ε (Φ0)".into(),
            y_label: "δω_T (MHz)".into(),
            series: vec![
                Series::new("δω_T", c.epsilon.iter().copied().zip(c.shift_mhz.iter().copied()).collect(), Style::Line),
                Series::new("sweet spot", at.map(|(e, s)| vec![(*e, *s)]).unwrap_or_default(), Style::Markers),
            ],
        }))
    })
}

pub fn coherence(cfg: &ExperimentConfig, seed: Option<u64>, out: &mut Emitter) -> Result<(), CliError> {
    let block = ExperimentConfig::block(&cfg.coherence, "coherence")?;
    let seed = cfg.seed(seed)?;
    let points = coherence_sweep(&cfg.device, &block.epsilons, block.omega_p, &cfg.noise, &block.ramsey, &block.relaxation, seed)
        .map_err(CliError::core("coherence sweep"))?;
    let rows: Vec<CoherenceRow> = points.iter().map(CoherenceRow::from).collect();
    let path = out.emit("coherence.csv", |w, m| io::write_coherence_csv(w, m, &rows))?;
    out.plot("coherence.svg", || {
        let (_, rows) = io::read_coherence_csv(read(&path)?.as_slice()).map_err(CliError::core("reloading coherence.csv"))?;
        Ok(svg::line_plot(&Plot {
            title: "Coherence under modulation".into(),
            x_label: "modulation amplitude ε (Φ0)".into(),
            y_label: "time (µs)".into(),
            series: vec![
                Series::new("T1", rows.iter().map(|r| (r.epsilon, r.t1)).collect(), Style::Markers),
                Series::new("T2*", rows.iter().map(|r| (r.epsilon, r.t2_star)).collect(), Style::Markers),
            ],
        }))
    })
}

pub fn chevron(cfg: &ExperimentConfig, out: &mut Emitter) -> Result<(), CliError> {
    let block = cfg.chevron.clone().unwrap_or_default();
    let pair = &cfg.device;
    let epsilon = match block.epsilon {
        Some(e) => e,
        None => default_epsilon(pair)?,
    };
    let center = block.freq_center.unwrap_or_else(|| resonant_mod_freq(pair, epsilon));
    let freqs = grid(center - 0.5 * block.freq_span, center + 0.5 * block.freq_span, block.freq_points);
    let durations = grid(block.duration_min, block.duration_max, block.duration_points);
    let rates = device_rates(pair, block.decoherence)?;
    let data = run_chevron(pair, epsilon, &freqs, &durations, block.edge, Some(&rates).filter(|r| !r.is_zero()), &cfg.integrator)
        .map_err(CliError::core("chevron"))?;
    for w in &data.warnings {
        eprintln!("warning: {w}");
    }
    let path = out.emit("chevron.csv", |w, m| io::write_chevron_csv(w, m, &data))?;
    out.plot("chevron.svg", || {
        let (_, d) = io::read_chevron_csv(read(&path)?.as_slice()).map_err(CliError::core("reloading chevron.csv"))?;
        // Rows of the map are durations, columns frequencies.
        let z: Vec<Vec<f64>> = (0..d.durations.len()).map(|j| d.population.iter().map(|row| row[j]).collect()).collect();
        Ok(svg::heat_map("Fixed-qubit |1⟩ population from |11⟩", "modulation frequency (MHz)", "pulse duration (ns)", &d.frequencies, &d.durations, &z))
    })
}

#[derive(Serialize)]
struct CalibrationReport<'a> {
    calibration: &'a CzCalibration,
    average_gate_fidelity: f64,
}

fn calibrate(cfg: &ExperimentConfig, epsilon: Option<f64>, search: &paracz::calibration::CalibrationSearch) -> Result<CzCalibration, CliError> {
    let epsilon = match epsilon {
        Some(e) => e,
        None => default_epsilon(&cfg.device)?,
    };
    calibrate_cz(&cfg.device, epsilon, search, &cfg.integrator).map_err(CliError::core("CZ calibration"))
}

fn noiseless_fidelity(cfg: &ExperimentConfig, cal: &CzCalibration) -> Result<f64, CliError> {
    let ch = cal.channel(&cfg.device, None, &cfg.integrator).map_err(CliError::core("gate channel"))?;
    average_gate_fidelity(&ch.superop, &cz_unitary()).map_err(CliError::core("gate fidelity"))
}

pub fn calibrate_cmd(cfg: &ExperimentConfig, out: &mut Emitter) -> Result<(), CliError> {
    let block = cfg.calibrate.clone().unwrap_or_default();
    let cal = calibrate(cfg, block.epsilon, &block.search)?;
    let report = CalibrationReport { average_gate_fidelity: noiseless_fidelity(cfg, &cal)?, calibration: &cal };
    out.emit("calibration.json", |w, m| io::write_json(w, m, &report))?;
    Ok(())
}

/// The gate under test, its calibration if one was used, and the channels.
struct Gate {
    calibration: Option<CzCalibration>,
    source: Box<dyn ChannelSource>,
}

fn gate(cfg: &ExperimentConfig, block: &GateBlock) -> Result<Gate, CliError> {
    if block.ideal {
        return Ok(Gate { calibration: None, source: Box::new(FixedChannels(NativeChannels::ideal())) });
    }
    let calibration = match &block.calibration {
        Some(c) => c.clone(),
        None => calibrate(cfg, block.epsilon, &block.search)?,
    };
    let model = GateModel {
        pair: cfg.device,
        calibration: calibration.clone(),
        rates: device_rates(&cfg.device, block.decoherence)?,
        local_layer_ns: if block.decoherence { block.local_layer_ns } else { 0.0 },
        opts: cfg.integrator,
        probes: None,
    };
    Ok(Gate { calibration: Some(calibration), source: Box::new(model) })
}

#[derive(Serialize)]
struct IrbReport {
    irb: IrbResult,
    reference: DecayFit,
    interleaved: DecayFit,
    /// 90% percentile interval of the infidelity.
    bootstrap: BootstrapCi,
    calibration: Option<CzCalibration>,
}

fn irb_statistic(d: &RbDataset) -> paracz::Result<f64> {
    Ok(irb_estimate(&fit_decay(&d.decay(0))?, &fit_decay(&d.decay(1))?)?.infidelity)
}

pub fn irb(cfg: &ExperimentConfig, seed: Option<u64>, out: &mut Emitter) -> Result<(), CliError> {
    let block = cfg.irb.clone().unwrap_or_default();
    let seed = cfg.seed(seed)?;
    let gate = gate(cfg, &block.gate)?;
    let channels = gate.source.channels(1.0).map_err(CliError::core("gate channels"))?;
    let schedule = ChannelSchedule::constant(&channels).map_err(CliError::core("gate channels"))?;
    let plan = [
        DecayPlan { kind: DecayKind::Reference, sequence_set: 0 },
        DecayPlan { kind: DecayKind::Interleaved, sequence_set: 1 },
    ];
    let data = run_decays(&block.rb, &plan, &schedule, 0, seed).map_err(CliError::core("RB simulation"))?;
    let reference = fit_decay(&data.decay(0)).map_err(CliError::core("reference decay fit"))?;
    let interleaved = fit_decay(&data.decay(1)).map_err(CliError::core("interleaved decay fit"))?;
    let irb = irb_estimate(&reference, &interleaved).map_err(CliError::core("iRB estimate"))?;
    let bootstrap = bootstrap_ci(&data, irb_statistic, block.replicants, seed).map_err(CliError::core("bootstrap"))?;
    let report = IrbReport { irb, reference, interleaved, bootstrap, calibration: gate.calibration };
    out.emit("irb.json", |w, m| io::write_json(w, m, &report))?;
    let path = out.emit("irb_decays.csv", |w, m| io::write_rb_csv(w, m, &data))?;
    out.plot("irb_decays.svg", || {
        let (_, d) = io::read_rb_csv(read(&path)?.as_slice()).map_err(CliError::core("reloading irb_decays.csv"))?;
        let mut series = Vec::new();
        for (k, name) in [(0, "reference"), (1, "interleaved")] {
            let fit = fit_decay(&d.decay(k)).map_err(CliError::core("decay fit"))?;
            series.push(Series::new(name, fit.lengths.iter().map(|&l| l as f64).zip(fit.means.iter().copied()).collect(), Style::Markers));
            let top = *fit.lengths.last().unwrap_or(&1) as f64;
            let curve = (0..=100).map(|i| top * i as f64 / 100.0).map(|l| (l, fit.model(l))).collect();
            series.push(Series::new(&format!("{name} fit, p = {:.4}", fit.p), curve, Style::Line));
        }
        Ok(svg::line_plot(&Plot {
            title: "Interleaved randomized benchmarking".into(),
            x_label: "number of Cliffords".into(),
            y_label: "|00⟩ survival".into(),
            series,
        }))
    })
}

#[derive(Serialize)]
struct RepeatedReport<'a> {
    summary: &'a RepeatedIrb,
    retained: usize,
    max_retained_infidelity: Option<f64>,
    calibration: Option<CzCalibration>,
}

pub fn repeat_irb(cfg: &ExperimentConfig, seed: Option<u64>, out: &mut Emitter) -> Result<(), CliError> {
    let block = cfg.repeat_irb.clone().unwrap_or_default();
    let seed = cfg.seed(seed)?;
    let gate = gate(cfg, &block.gate)?;
    let result = run_repeated_irb(&block.repeated, gate.source.as_ref(), &cfg.noise, seed).map_err(CliError::core("repeated iRB"))?;
    let retained: Vec<f64> = result.retained().map(|e| e.irb.infidelity).collect();
    let report = RepeatedReport {
        summary: &result,
        retained: retained.len(),
        max_retained_infidelity: retained.iter().copied().reduce(f64::max),
        calibration: gate.calibration,
    };
    out.emit("repeat_irb.json", |w, m| io::write_json(w, m, &report))?;
    let ecdf = result.ecdf.as_ref().ok_or_else(|| CliError::Core {
        context: "repeated iRB".into(),
        source: paracz::Error::Fit { reason: format!("only {} experiment(s) retained, no ECDF", retained.len()), residual_norm: f64::NAN },
    })?;
    let path = out.emit("ecdf.csv", |w, m| io::write_ecdf_csv(w, m, ecdf))?;
    out.plot("ecdf.svg", || {
        let (_, e) = io::read_ecdf_csv(read(&path)?.as_slice()).map_err(CliError::core("reloading ecdf.csv"))?;
        let step = |ys: &[f64]| -> Vec<(f64, f64)> {
            let mut pts = vec![(e.values[0], 0.0)];
            pts.extend(e.values.iter().copied().zip(ys.iter().copied()));
            pts
        };
        Ok(svg::line_plot(&Plot {
            title: format!("ECDF of CZ infidelity ({} experiments)", e.values.len()),
            x_label: "infidelity".into(),
            y_label: "cumulative probability".into(),
            series: vec![
                Series::new("ECDF", step(&e.cumulative), Style::Step),
                Series::new("90% band", step(&e.band_low), Style::DashedStep).with_color(1),
                Series::new("", step(&e.band_high), Style::DashedStep).with_color(1),
            ],
        }))
    })
}

#[derive(Serialize)]
struct PtmReport {
    average_gate_fidelity: f64,
    leakage: [f64; 4],
    calibration: Option<CzCalibration>,
}

pub fn ptm(cfg: &ExperimentConfig, out: &mut Emitter) -> Result<(), CliError> {
    let block = cfg.ptm.clone().unwrap_or_default();
    let gate = gate(cfg, &block.gate)?;
    let (superop, leakage) = match &gate.calibration {
        Some(cal) => {
            let rates = device_rates(&cfg.device, block.gate.decoherence)?;
            let ch = cal
                .channel(&cfg.device, Some(&rates).filter(|r| !r.is_zero()), &cfg.integrator)
                .map_err(CliError::core("gate channel"))?;
            (ch.superop, ch.leakage)
        }
        None => (gate.source.channels(1.0).map_err(CliError::core("gate channel"))?.cz, [0.0; 4]),
    };
    let ptm = pauli_transfer_matrix(&superop).map_err(CliError::core("Pauli transfer matrix"))?;
    let fidelity = average_gate_fidelity(&superop, &cz_unitary()).map_err(CliError::core("gate fidelity"))?;
    let report = PtmReport { average_gate_fidelity: fidelity, leakage, calibration: gate.calibration };
    out.emit("ptm.json", |w, m| io::write_json(w, m, &report))?;
    let path = out.emit("ptm.csv", |w, m| io::write_real_matrix_csv(w, m, &ptm))?;
    out.plot("ptm.svg", || {
        let (_, m) = io::read_real_matrix_csv(read(&path)?.as_slice(), 16).map_err(CliError::core("reloading ptm.csv"))?;
        let idx: Vec<f64> = (0..16).map(|k| k as f64).collect();
        let z: Vec<Vec<f64>> = (0..16).map(|i| (0..16).map(|j| m[(i, j)]).collect()).collect();
        Ok(svg::heat_map("CZ Pauli transfer matrix", "input Pauli index", "output Pauli index", &idx, &idx, &z))
    })
}

pub fn psd(loaded: &LoadedConfig, input: &Path, out: &mut Emitter) -> Result<(), CliError> {
    let bytes = read(input)?;
    let psd = parse_psd(bytes.as_slice()).map_err(CliError::core(format!("reading {}", input.display())))?;
    let summary = summarize_psd(&psd, loaded.config.noise.transfer_coefficient);
    out.meta.extra = BTreeMap::from([("input_sha256".to_string(), io::config_hash(&bytes))]);
    out.emit("psd_summary.json", |w, m| io::write_json(w, m, &summary))?;
    out.plot("psd.svg", || {
        Ok(svg::line_plot(&Plot {
            title: format!("Instrument PSD, white floor {:.1} dBm/Hz", summary.white_floor_dbm_hz),
            x_label: "frequency (MHz)".into(),
            y_label: "PSD (dBm/Hz)".into(),
            series: vec![Series::new("PSD", psd.frequencies.iter().copied().zip(psd.power.iter().copied()).collect(), Style::Line)],
        }))
    })
}
