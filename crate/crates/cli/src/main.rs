//! `paracz`: batch front-end for the parametric CZ laboratory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 1 anything else (e.g. an unwritable output directory).

mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use paracz::io::Metadata;

use crate::commands::Emitter;
use crate::config::LoadedConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "paracz", version, about = "Simulate, calibrate and benchmark a flux-modulated parametric CZ gate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the configuration's `output_dir`, else `.`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also render SVG plots from the emitted CSVs.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Averaged detuning δω_T versus modulation amplitude, with the AC sweet spot.
    Dum,
    /// T1 and T2* versus modulation amplitude under the configured noise.
    Coherence,
    /// Chevron: |11⟩ → |02⟩ exchange versus modulation frequency and duration.
    Chevron,
    /// Find the CZ operating point and frame corrections.
    Calibrate,
    /// One interleaved RB experiment on the CZ.
    Irb,
    /// Repeated iRB with stability tests and the infidelity ECDF.
    RepeatIrb,
    /// Pauli transfer matrix of the calibrated CZ.
    Ptm,
    /// Summarize a measured instrument PSD (frequency MHz, power dBm/Hz).
    Psd { input: PathBuf },
}

impl Command {
    fn is_stochastic(&self) -> bool {
        matches!(self, Command::Coherence | Command::Irb | Command::RepeatIrb)
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let loaded = LoadedConfig::load(cli.config.as_deref())?;
    let cfg = &loaded.config;
    let seed = if cli.command.is_stochastic() { Some(cfg.seed(cli.seed)?) } else { None };
    let dir = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let meta = Metadata::new(&loaded.bytes, seed, env!("CARGO_PKG_VERSION"));
    let mut out = Emitter::new(dir, meta, cli.svg)?;
    match &cli.command {
        Command::Dum => commands::dum(cfg, &mut out)?,
        Command::Coherence => commands::coherence(cfg, seed, &mut out)?,
        Command::Chevron => commands::chevron(cfg, &mut out)?,
        Command::Calibrate => commands::calibrate_cmd(cfg, &mut out)?,
        Command::Irb => commands::irb(cfg, seed, &mut out)?,
        Command::RepeatIrb => commands::repeat_irb(cfg, seed, &mut out)?,
        Command::Ptm => commands::ptm(cfg, &mut out)?,
        Command::Psd { input } => commands::psd(&loaded, input, &mut out)?,
    }
    Ok(out.written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
