//! `edm`: dataset diversity, learnability and image statistics from the command line.
//!
//! Exit codes: 0 success, 1 bad input or failed computation, 2 a validation check failed.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, OutputArgs};
use commands::Failure;

fn init_threads(out: &OutputArgs) -> Result<(), Failure> {
    if let Some(n) = out.threads {
        if n == 0 {
            return Err(Failure { code: 1, message: "--threads must be >= 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: 1, message: e.to_string() })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Diversity { manifest, kernel, method, out } => {
            init_threads(out)?;
            commands::diversity(manifest, kernel, method, out)
        }
        Command::Learnability { manifest, task, out } => {
            init_threads(out)?;
            commands::learnability(manifest, task, out)
        }
        Command::Lowlevel { manifest, budget, seed, out } => {
            init_threads(out)?;
            commands::lowlevel(manifest, *budget, *seed, out)
        }
        Command::Validate { tolerance, seeds, out } => {
            init_threads(out)?;
            commands::validate(*tolerance, *seeds, out)
        }
        Command::Report { manifests, kernel, method, task, budget, timings, emit_features, out } => {
            init_threads(out)?;
            commands::report(manifests, kernel, method, task, *budget, *timings, emit_features.as_deref(), out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
