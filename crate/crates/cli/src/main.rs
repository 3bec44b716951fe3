//! `hrlt`: train, evaluate and run the hierarchical triplet extractor.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;
use hrlt_core::encoder::EncoderError;
use hrlt_core::numerics::{CheckpointError, NumericError};
use hrlt_core::Error;

use args::{Cli, Command};

/// Usage, configuration, data and I/O problems.
const EXIT_USAGE: u8 = 2;
/// Unreadable or mismatched checkpoint or encoding cache.
const EXIT_ARTIFACT: u8 = 3;
/// Training produced a non-finite value.
const EXIT_NUMERIC: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numeric(NumericError::NonFinite(_)) => EXIT_NUMERIC,
        Error::Checkpoint(CheckpointError::Io { .. }) | Error::Encoder(EncoderError::Io(_)) => EXIT_USAGE,
        Error::Checkpoint(_) | Error::Encoder(_) | Error::Numeric(_) => EXIT_ARTIFACT,
        Error::Domain(_) | Error::Data(_) | Error::Config(_) | Error::Usage(_) | Error::Io { .. } => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HRLT_LOG", "info")).init();
    let cli = Cli::parse_from(args::expand_dotted(std::env::args_os()));
    let result = match cli.command {
        Command::Pretrain(a) => commands::pretrain(&a),
        Command::Finetune(a) => commands::finetune(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Predict(a) => commands::predict(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
