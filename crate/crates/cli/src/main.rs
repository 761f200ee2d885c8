mod args;
mod commands;
mod config;
mod error;
mod io;
mod model_file;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit_cmd(a),
        Command::Predict(a) => commands::predict_cmd(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::InferNetwork(a) => commands::infer_network(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
