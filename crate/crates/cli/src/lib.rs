//! Command-line drivers: operator matrices, digit frontiers, error sweeps and
//! the advection-diffusion solver.

pub mod commands;
pub mod io;

use clap::{Parser, Subcommand};
use fracspec::Error;

pub use commands::Outcome;

#[derive(Debug, Parser)]
#[command(name = "fracspec", version, about = "Spectral fractional calculus toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the four operator matrices and the nodes as CSV.
    Genmat(commands::GenmatArgs),
    /// Minimum working digits per N, with a linear fit.
    Digits(commands::DigitsArgs),
    /// Errors of the operators on e^{imt}.
    VerifyExp(commands::VerifyArgs),
    /// Relative errors over a range of orders or sizes.
    Sweep(commands::SweepArgs),
    /// Solve the advection-diffusion test problem.
    Pde(commands::PdeArgs),
}

/// Bad flag combinations found after parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PRECISION: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::Genmat(a) => commands::genmat(a),
        Command::Digits(a) => commands::digits(a),
        Command::VerifyExp(a) => commands::verify_exp(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Pde(a) => commands::pde(a),
    }
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidArgument(_) | Error::InvalidRequest(_) | Error::ShapeMismatch(_)) => EXIT_USAGE,
        Some(Error::PrecisionWarning { .. } | Error::Overflow(_)) => EXIT_PRECISION,
        Some(_) => EXIT_SOLVER,
        None => 1,
    }
}
