mod args;
mod commands;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => commands::generate_cmd(a),
        Command::Infer(a) => commands::infer_cmd(a),
        Command::Spectrum(a) => commands::spectrum_cmd(a),
        Command::Bench(a) => commands::bench_cmd(a),
        Command::Features(a) => commands::features_cmd(a),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kroninfer: {e}");
            e.exit_code()
        }
    }
}
