//! Command-line front end: reads scenario files, runs synthesis or
//! simulations and writes the artifacts.
//!
//! Exit codes are `0` on success, `2` for input/config errors and `3` for
//! numeric failures.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::{
    cmd_grid, cmd_simulate, cmd_simulate_dir, cmd_synthesize, GridFile, RunSummary,
    SynthesisReport,
};
pub use config::{ConfigFile, GainSourceArg, ModeArg, Overrides};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Input(_) | CliError::Io { .. } => EXIT_INPUT,
        }
    }
}

impl From<taskswarm::Error> for CliError {
    fn from(e: taskswarm::Error) -> Self {
        use taskswarm::Error::*;
        match e {
            NonConvergence { .. } | SingularSystem | GainOutOfRange { .. } | SparsityViolation => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "taskswarm", version, about = "Swarm distribution control over task graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the broadcast kernel for a scenario's graph and target.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        gain_source: Option<GainSourceArg>,
    },
    /// Run a scenario (or every `*.toml` in a directory) and write the CSV trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        gain_source: Option<GainSourceArg>,
        /// `meanfield` or `agents:N`
        #[arg(long)]
        mode: Option<ModeArg>,
    },
    /// Emit a Moore-neighbourhood grid and its normalized kernel as a `[graph]` section.
    Grid {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Synthesize {
            config,
            out,
            gain_source,
        } => {
            let overrides = Overrides {
                gain_source,
                ..Overrides::default()
            };
            cmd_synthesize(&config, out.as_deref(), overrides).map(|_| ())
        }
        Command::Simulate {
            config,
            out,
            seed,
            gain_source,
            mode,
        } => {
            let overrides = Overrides {
                seed,
                gain_source,
                mode,
            };
            if config.is_dir() {
                return simulate_dir(&config, out.as_deref(), overrides);
            }
            cmd_simulate(&config, out.as_deref(), overrides).map(|summary| {
                if summary.trace_path.is_some() {
                    println!("{summary}");
                } else {
                    eprintln!("{summary}");
                }
            })
        }
        Command::Grid { rows, cols, out } => cmd_grid(rows, cols, out.as_deref()).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn simulate_dir(dir: &Path, out: Option<&Path>, overrides: Overrides) -> u8 {
    let results = match cmd_simulate_dir(dir, out, overrides) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let mut code = 0;
    for (path, result) in results {
        match result {
            Ok(summary) => println!("{}: {summary}", path.display()),
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                code = code.max(e.exit_code());
            }
        }
    }
    code
}
