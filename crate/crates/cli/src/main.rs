//! `gnpr` command-line front end.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Exit statuses.
const EXIT_INTERNAL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gnpr::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn kind(&self) -> (&'static str, u8) {
        match self {
            CliError::Core(e) => match e.kind() {
                gnpr::ErrorKind::Input => ("input", EXIT_INPUT),
                gnpr::ErrorKind::Config => ("config", EXIT_CONFIG),
                gnpr::ErrorKind::Internal => ("internal", EXIT_INTERNAL),
            },
            CliError::Usage(_) => ("config", EXIT_CONFIG),
        }
    }
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        log::LevelFilter::Info
    };
    let mut builder = env_logger::Builder::new();
    builder.filter_level(level).parse_default_env();
    if cli.json_logs {
        builder.format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().as_str().to_lowercase(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    }
    builder.init();
}

fn report(err: &CliError, json: bool) -> u8 {
    let (kind, code) = err.kind();
    let message = err.to_string();
    let mut stderr = std::io::stderr().lock();
    if json {
        let line = serde_json::json!({
            "level": "error",
            "kind": kind,
            "exit_code": code,
            "message": message,
        });
        let _ = writeln!(stderr, "{line}");
    } else {
        let _ = writeln!(stderr, "error[{kind}]: {message}");
    }
    code
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging(&cli);
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            return ExitCode::from(report(&CliError::Usage(e.to_string()), cli.json_logs));
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => ExitCode::from(report(&e, cli.json_logs)),
    }
}
