//! `sparsevine` command-line tool.

mod args;
mod commands;
mod table;

use args::{Cli, Command};
use clap::Parser;
use std::io::Write;
use std::process::ExitCode;

pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Output(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::Output(_) => "output",
            CliError::Numerical(_) => "numerical",
        }
    }
}

impl From<sparsevine::Error> for CliError {
    fn from(e: sparsevine::Error) -> Self {
        match e {
            sparsevine::Error::InvalidInput(_) | sparsevine::Error::EmptyCandidates => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn diagnostic(level: &str, kind: &str, message: &str) {
    let line = serde_json::json!({ "level": level, "kind": kind, "message": message });
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPARSEVINE_LOG", "warn"))
        .format(|buf, rec| {
            let line = serde_json::json!({
                "level": rec.level().as_str().to_lowercase(),
                "target": rec.target(),
                "message": rec.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Simulate(a) => commands::simulate(&a, cli.seed),
        Command::ExtractFeatures(a) => commands::extract_features(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
    }
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            diagnostic("error", "usage", e.to_string().trim());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            diagnostic("error", e.kind(), &e.to_string());
            ExitCode::from(e.exit_code())
        }
    }
}
