//! `pnqkd`: sweeps, optimization runs, bound curves, check-state tables and
//! tomography reports for the photon-number encoded swapping protocol.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! integrity failure.

mod commands;
mod config;
mod plot;
mod table;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonArgs, Defaults, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "pnqkd", version, about = "Photon-number encoded entanglement-swapping QKD simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Key rate, RCI and bounds over a distance grid.
    Sweep,
    /// Optimized source coefficients (or squeezing) per distance.
    Optimize,
    /// Charlie's statistics for key and check states.
    CheckStates,
    /// Two-qubit tomography of the heralded state.
    Tomography,
    /// Repeaterless and single-repeater bounds.
    Bounds,
}

const USAGE: u8 = 2;
const INTEGRITY: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    let integrity = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<pnqkd::Error>(),
            Some(pnqkd::Error::Integrity(_) | pnqkd::Error::NotNormalized(_))
        )
    });
    if integrity {
        INTEGRITY
    } else {
        USAGE
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let defaults = match cli.command {
        Command::CheckStates => Defaults { n_max: 2, grid: "0:200:1" },
        Command::Optimize => Defaults { n_max: 1, grid: "0:200:10" },
        _ => Defaults { n_max: 1, grid: "0:200:1" },
    };
    let cfg = RunConfig::resolve(cli.common, defaults)?;
    match cli.command {
        Command::Sweep => commands::sweep(&cfg)?,
        Command::Optimize => commands::optimize(&cfg)?,
        Command::Bounds => commands::bounds(&cfg)?,
        Command::Tomography => commands::tomography(&cfg)?,
        Command::CheckStates => {
            if commands::check_states(&cfg)? == Some(false) {
                eprintln!("pnqkd: check-state probabilities deviate from the exact table");
                return Ok(INTEGRITY);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("pnqkd: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
