//! `lsp`: emits separatrix curves, phase portraits, cost sweeps, optimal plans
//! and Monte Carlo checks as CSV or JSON, and runs the acceptance criteria.

mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Command, Flags, Partial, CONFIG_ENV};

#[derive(Debug, Parser)]
#[command(name = "lsp", version, about = "Optimal linear search on the half-line")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Sub {
    /// Invariant curve (y,phi,residual) or, with --steps, its backward images
    Separatrix,
    /// Region labels x1,label,break_step; --x1 for one orbit, --cone for the cone report
    Portrait,
    /// Approximant E^N over a range of x1
    Sweep,
    /// Boundary candidates, their costs and the optimal plan
    Optimize,
    /// Monte Carlo cost of the optimal plan
    Simulate,
    /// Iterates of the two-sided Gaussian map from seeds t in the range
    BeckIterate,
    /// Runs every acceptance criterion
    Validate,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Separatrix => Command::Separatrix,
            Sub::Portrait => Command::Portrait,
            Sub::Sweep => Command::Sweep,
            Sub::Optimize => Command::Optimize,
            Sub::Simulate => Command::Simulate,
            Sub::BeckIterate => Command::BeckIterate,
            Sub::Validate => Command::Validate,
        }
    }
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("lsp: config: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file: Option<Partial> = match std::env::var_os(CONFIG_ENV) {
        Some(path) => {
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => return config_error(format!("{}: {e}", path.to_string_lossy())),
            };
            match config::parse_config_file(&text) {
                Ok(p) => Some(p),
                Err(e) => return config_error(e),
            }
        }
        None => None,
    };
    let flags = match cli.flags.to_partial() {
        Ok(p) => p,
        Err(e) => return config_error(e),
    };
    let cfg = config::resolve(cli.command.into(), file, flags);
    if cli.flags.print_config {
        println!(
            "{}",
            serde_json::to_string_pretty(&Partial::from(cfg)).expect("config serializes")
        );
        return ExitCode::SUCCESS;
    }
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return config_error(e);
        }
    }
    let output = match commands::run(&cfg) {
        Ok(o) => o,
        Err(commands::Failure::Config(msg)) => return config_error(msg),
        Err(commands::Failure::Module(e)) => {
            eprintln!("lsp: {e}");
            return ExitCode::from(1);
        }
    };
    let written = match &cfg.out {
        Some(path) => std::fs::write(path, &output.bytes),
        None => std::io::stdout().write_all(&output.bytes),
    };
    match written {
        Ok(()) => {}
        // a closed reader is not our failure
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lsp: write_output: {e}");
            return ExitCode::from(1);
        }
    }
    if output.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
