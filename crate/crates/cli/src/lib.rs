//! Configuration loading and scenario orchestration for the `tsdyn` binary.

pub mod config;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;
use serde_json::json;

pub use config::{load_config, parse_config, Scenario, ScenarioConfig};
pub use run::{run, Command, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] tsdyn_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use tsdyn_core::Error as E;
        match self {
            CliError::Model(E::AssumptionFailed { .. } | E::NoConvergence(_)) => EXIT_FAILED,
            _ => EXIT_USAGE,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Model(_) => "model",
        }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> serde_json::Value {
        let details = match self {
            CliError::Config(list) => list.clone(),
            other => vec![other.to_string()],
        };
        json!({ "error": { "kind": self.kind(), "message": self.to_string(), "details": details, "exit_code": self.exit_code() } })
    }
}

/// Dynamic equations on a periodic time scale: simulation, bounded solutions
/// and their verification.
#[derive(Debug, Parser)]
#[command(name = "tsdyn", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario file (JSON); optional for `example`
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Replace a configuration value, e.g. `tolerances.eval_tol=1e-6`
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let scenario = match (&cli.config, cli.command) {
        (Some(path), _) => load_config(path, &cli.overrides)?,
        (None, Command::Example) => config::example(&cli.overrides)?,
        (None, _) => return Err(CliError::Usage("--config is required".into())),
    };
    run(cli.command, &scenario, &cli.out)
}

/// Parses arguments, runs, prints a summary or error record, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            if code != EXIT_OK {
                eprintln!("{}", CliError::Usage(e.kind().to_string()).record());
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            println!("{}", json!({ "pass": outcome.pass, "files": outcome.files }));
            if outcome.pass {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(e) => {
            let record = e.record();
            eprintln!("{record}");
            if std::fs::create_dir_all(&cli.out).is_ok() {
                let _ = output::write_json(&cli.out.join("error.json"), &record);
            }
            e.exit_code()
        }
    }
}
