//! `irn`: data generation, training, evaluation and inspection of
//! interpretable reasoning networks.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 failed gradient check. Set `IRN_LOG=debug` for progress logging.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_CHECK: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IRN_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
