//! `mousetrap`: spectra, single evolutions and parameter scans of the
//! Kitaev-trimer sensor and its comparison sensors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "mousetrap", version, about = "Kitaev-trimer Ramsey sensor simulations")]
struct Cli {
    /// TOML file with [model] [waveform] [grid] [scan] [spectrum] [output] sections,
    /// whose keys are the flag names without the leading dashes; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    options: RunConfig,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Instantaneous eigenvalues at each --b
    Spectrum,
    /// One evolution: exact and adiabatic survival, infidelity and phase per checkpoint
    Evolve,
    /// Response against amplitude (or against time and amplitude with --sweep time)
    Sweep,
    /// Exact response over the octant of field directions
    Direction,
    /// Adiabatic infidelity against its upper bound over amplitude
    Error,
    /// Rerun the scan behind one reference figure
    Reproduce {
        /// fig2, fig3, fig4 or fig5
        figure: String,
    },
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<mousetrap::Error> for Failure {
    fn from(e: mousetrap::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = cli.options.overlay(file);
    if let Some(n) = cfg.output.threads {
        if n == 0 {
            return Err(Failure::Usage("output.threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Evolve => commands::evolve(&cfg),
        Command::Sweep => commands::scan(&cfg, commands::sweep_kind(&cfg)?, None),
        Command::Direction => commands::scan(&cfg, mousetrap::scan::ScanKind::DirectionalOctant, None),
        Command::Error => commands::scan(&cfg, mousetrap::scan::ScanKind::AdiabaticError, None),
        Command::Reproduce { figure } => commands::reproduce(&cfg, &figure),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
