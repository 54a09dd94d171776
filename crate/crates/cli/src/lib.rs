//! The `que` command line: builds level graphs, certifies identification
//! pairs, compares functional calculus, and writes CSV/JSON/SVG artifacts.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod svg;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{Overrides, RunConfig};
use crate::error::{CliResult, EXIT_BOUND_VIOLATION, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "que", version, about = "Certified graph approximations of the interval and the Sierpinski gasket")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Overrides,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Build one level graph and its pencil.
    Build,
    /// Certify identification pairs against the theoretical rate.
    Certify,
    /// Eigenvalues of one level.
    Spectrum,
    /// Eigenvalue convergence across levels.
    Converge,
    /// Resolvent, heat and spectral projection comparisons for one pair.
    Compare,
    /// Transitivity along a chain of levels.
    Compose,
    /// Restriction/extension comparison on a circle with an obstacle.
    Obstacle,
    /// Summarize every artifact in the output directory.
    Report,
}

pub fn execute(command: Command, cfg: &RunConfig) -> CliResult<Outcome> {
    match command {
        Command::Build => commands::build(cfg),
        Command::Certify => commands::certify_cmd(cfg),
        Command::Spectrum => commands::spectrum(cfg),
        Command::Converge => commands::converge(cfg),
        Command::Compare => commands::compare(cfg),
        Command::Compose => commands::compose_cmd(cfg),
        Command::Obstacle => commands::obstacle(cfg),
        Command::Report => commands::report(cfg),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = RunConfig::resolve(&cli.flags).and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            let violations = outcome.violations();
            if violations.is_empty() {
                EXIT_OK
            } else {
                for c in violations {
                    eprintln!("bound violated: {} (measured {:e}, bound {:e})", c.name, c.measured, c.bound);
                }
                EXIT_BOUND_VIOLATION
            }
        }
        Err(e) => {
            eprintln!("que: {e}");
            e.exit_code()
        }
    }
}
