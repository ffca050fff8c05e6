use std::process::ExitCode;

use clap::Parser;
use xray_pose_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xray-pose {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
