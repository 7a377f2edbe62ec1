//! `ekgw`: evaluate special functions, run verification suites, compute GW
//! generating series and emit q-expansions.

mod commands;
mod config;
mod parse;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{EvalArgs, GwArgs, QexpArgs, VerifyArgs};

#[derive(Parser)]
#[command(name = "ekgw", version, about = "Eisenstein-Kronecker forms and elliptic GW generating series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one function at a point.
    Eval(EvalArgs),
    /// Run verification suites and report every checked identity.
    Verify(VerifyArgs),
    /// Closed-form and numeric GW generating-series values.
    Gw(GwArgs),
    /// Emit an exact truncated q-expansion.
    Qexp(QexpArgs),
}

/// Failure classes mapped to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A precondition or domain failure (exit 2).
    #[error("{0}")]
    Domain(String),
    /// A gating verification failed (exit 1); the report was still emitted.
    #[error("{0}")]
    Gating(String),
}

impl From<ekgw_core::Error> for CliError {
    fn from(e: ekgw_core::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<String> for CliError {
    fn from(e: String) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(format!("i/o: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config::Config::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Eval(a) => commands::eval(a, &cfg),
        Command::Verify(a) => commands::verify(a, &cfg),
        Command::Gw(a) => commands::gw(a, &cfg),
        Command::Qexp(a) => commands::qexp(a, &cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Gating(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
