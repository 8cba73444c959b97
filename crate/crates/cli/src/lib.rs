//! Command-line driver: argument parsing, configuration resolution and the
//! `train-mnist`, `train-trajectory`, `eval`, `hardware-report` and `export`
//! commands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod lock;

use args::{Cli, Command};
use error::CliResult;

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::TrainMnist(a) => commands::train_mnist(a),
        Command::TrainTrajectory(a) => commands::train_trajectory_cmd(a),
        Command::Eval(a) => commands::eval(a),
        Command::HardwareReport(a) => commands::hardware(a),
        Command::Export(a) => commands::export(a),
    }
}
