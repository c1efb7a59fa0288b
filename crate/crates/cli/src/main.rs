//! `arnold`: curve and table data for the scattering-map geometry of an a
//! priori unstable Hamiltonian.
//!
//! Exit codes: 0 success, 1 numeric failure, 2 invalid configuration.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CrestsArgs, ExponentArgs, HighwaysArgs, OrbitArgs, PortraitArgs, TangencyArgs};
use config::{CommonArgs, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Numeric(#[from] arnold_core::Error),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Numeric(arnold_core::Error::InvalidParams(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "arnold", version, about = "Scattering maps, highways and diffusion times for an a priori unstable Hamiltonian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify the μ-regime and report the critical actions.
    Regime,
    /// Sample both crests at one action.
    Crests(CrestsArgs),
    /// Grid of the reduced potential plus its level curves.
    Portrait(PortraitArgs),
    /// Trace the highways over an action range.
    Highways(HighwaysArgs),
    /// Tangency angles over an action range.
    Tangency(TangencyArgs),
    /// Build a pseudo-orbit from −I* to I*.
    Orbit(OrbitArgs),
    /// Diffusion-time estimate over [−I*, I*].
    Difftime(ExponentArgs),
    /// Perturbation threshold ε*(I*).
    Epsstar,
    /// Run the quick oracle suite; exits 1 if any check fails.
    Verify,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (c, a) = match &cli.command {
        Command::Orbit(o) => (o.exponents.c, o.exponents.a),
        Command::Difftime(e) => (e.c, e.a),
        _ => (None, None),
    };
    let cfg = RunConfig::resolve(&cli.common, c, a)?;
    let text = match &cli.command {
        Command::Regime => commands::regime(&cfg)?,
        Command::Crests(args) => commands::crests(&cfg, args)?,
        Command::Portrait(args) => commands::portrait(&cfg, args)?,
        Command::Highways(args) => commands::highways(&cfg, args)?,
        Command::Tangency(args) => commands::tangency(&cfg, args)?,
        Command::Orbit(args) => commands::orbit(&cfg, args)?,
        Command::Difftime(_) => commands::difftime(&cfg)?,
        Command::Epsstar => commands::epsstar(&cfg)?,
        Command::Verify => {
            let (text, failed) = commands::verify(&cfg)?;
            output::emit(&text, cfg.out.as_deref())?;
            return if failed > 0 { Err(CliError::ChecksFailed(failed)) } else { Ok(()) };
        }
    };
    output::emit(&text, cfg.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("arnold: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
