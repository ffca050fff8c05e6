//! Command-line harness for `xray-pose`: dataset generation, stand-in
//! predictions, pose solving, evaluation, timing and calibration sweeps.
//!
//! Every command writes plain CSV or JSON-lines files plus a
//! `<command>.manifest.json` echoing the effective configuration. Exit
//! codes: 2 for configuration errors, 3 for unreadable or inconsistent
//! data, 4 for numerical failures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
mod error;

pub use cli::{Cli, Command};
pub use config::RunConfig;
pub use error::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = cli.effective_config()?;
    if config.threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global();
    }
    match &cli.command {
        Command::Generate { .. } => commands::generate(&config),
        Command::PredictOracle { .. } => commands::predict_oracle(&config),
        Command::Solve { .. } => commands::solve(&config),
        Command::Evaluate { .. } => commands::evaluate(&config),
        Command::Bench { .. } => commands::bench(&config),
        Command::Calibrate { .. } => commands::calibrate(&config),
    }
}
