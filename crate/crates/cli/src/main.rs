mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::UsageError;

const USAGE: u8 = 1;
const DATA: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return USAGE;
        }
        if let Some(e) = cause.downcast_ref::<seedscope::Error>() {
            return if e.is_usage() { USAGE } else { DATA };
        }
    }
    DATA
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(threads) = std::env::var("SEEDSCOPE_THREADS") {
        match threads.trim().parse::<usize>() {
            Ok(n) if n > 0 => seedscope::exec::configure_threads(n),
            _ => {
                eprintln!("error: SEEDSCOPE_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::from(USAGE);
            }
        }
    }
    let outcome = match &cli.command {
        Command::Ks(a) => commands::ks(a),
        Command::Alpha(a) => commands::alpha(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Synth(a) => commands::synth(a),
        Command::Bounds(a) => commands::bounds(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
