//! Command-line front end for the `spinfit` library: schema-checked CSV
//! input, INI configuration, JSON reports, SVG plots and the reproduction
//! table.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod reference;
pub mod report;
pub mod reproduce;
pub mod table;

use config::RunConfig;
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "spinfit", version, about = "Spin-ensemble spectroscopy models, fits and reports")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// INI configuration file (falls back to $SPINFIT_CONFIG, then defaults)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Write an SVG plot here
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,
    /// Write the CSV output here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base RNG seed for synthetic data
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resonance field of every magnetic sub-site over an in-plane angle grid
    AngleMap(commands::spin::AngleMapArgs),
    /// Fit complex or polar S21 of a notch resonator
    S21Fit(commands::resonator::S21Args),
    /// Fit or evaluate the spin-induced linewidth and frequency shift
    SpinSignature(commands::spin::SignatureArgs),
    /// Fit Hahn, saturation-recovery or stimulated-echo decays
    DecayFit(commands::coherence::DecayArgs),
    /// Stimulated-echo amplitude over a (tau, waiting time) grid
    SdMap(commands::coherence::SdMapArgs),
    /// Magnetic field noise from Hahn and CPMG coherence times
    NoiseBudget(commands::coherence::NoiseArgs),
    /// Fit power-dependent TLS loss
    TlsFit(commands::resonator::TlsArgs),
    /// Purcell factor, mode volume, single-ion coupling and lifetimes
    Purcell(commands::optical::PurcellArgs),
    /// Fit or evaluate optical hole linewidths
    Holeburn(commands::optical::HoleburnArgs),
    /// Echo areas from quadrature traces
    EchoProcess(commands::echo::EchoArgs),
    /// Acceptance table and quoted-value discrepancies
    Reproduce(commands::ReproduceArgs),
}

fn apply_globals(cfg: &mut RunConfig, g: &GlobalArgs) -> CliResult<()> {
    let paths = [("output", &g.out), ("report", &g.report), ("plot", &g.plot)];
    for (key, p) in paths {
        if let Some(p) = p {
            cfg.set("io", key, &p.display().to_string())?;
        }
    }
    if let Some(s) = g.seed {
        cfg.set("run", "seed", &s.to_string())?;
    }
    Ok(())
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> CliResult<i32> {
    let mut cfg = RunConfig::resolve(cli.global.config.as_deref())?;
    apply_globals(&mut cfg, &cli.global)?;
    let outcome = match &cli.command {
        Command::AngleMap(a) => commands::spin::angle_map(&mut cfg, a)?,
        Command::S21Fit(a) => commands::resonator::s21_fit(&mut cfg, a)?,
        Command::SpinSignature(a) => commands::spin::signature(&mut cfg, a)?,
        Command::DecayFit(a) => commands::coherence::decay_fit(&mut cfg, a)?,
        Command::SdMap(a) => commands::coherence::sd_map(&mut cfg, a)?,
        Command::NoiseBudget(a) => commands::coherence::noise(&mut cfg, a)?,
        Command::TlsFit(a) => commands::resonator::tls_fit(&mut cfg, a)?,
        Command::Purcell(a) => commands::optical::purcell(&mut cfg, a)?,
        Command::Holeburn(a) => commands::optical::holeburn(&mut cfg, a)?,
        Command::EchoProcess(a) => commands::echo::echo_process(&mut cfg, a)?,
        Command::Reproduce(a) => commands::reproduce(&mut cfg, a)?,
    };
    commands::emit(&cfg, outcome, stdout)
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
