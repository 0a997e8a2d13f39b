//! Command-line front end: configuration, dispatch and output.

pub mod args;
pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod specstr;

use config::RunConfig;
use error::CliError;
use run::{Outcome, Runtime};

/// Resolves, runs and writes one configuration; returns the process exit code.
pub fn run_config(cfg: RunConfig, rt: Runtime) -> Result<i32, CliError> {
    let resolved = cfg.resolve()?;
    match run::execute(&resolved, rt)? {
        Outcome::Rows(rows) => {
            output::emit(&rows, &resolved.cfg)?;
            Ok(0)
        }
        Outcome::Validation { lines, passed } => {
            for l in lines {
                println!("{l}");
            }
            Ok(if passed { 0 } else { 4 })
        }
    }
}
