//! The `restamp` command line.
//!
//! Exit codes: 0 success, 1 failing tests or lint findings, 2 configuration
//! or input errors, 3 runtime errors.

pub mod amplify;
pub mod args;
pub mod commands;
pub mod report;
mod target;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::Parser;

pub use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

pub(crate) fn config(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}

pub(crate) fn read_input(path: &Path, what: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| config(format!("cannot read {what} {}: {e}", path.display())))
}

pub(crate) fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| anyhow::anyhow!("cannot create {}: {e}", dir.display()))?;
    }
    std::fs::write(path, text).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

pub(crate) fn pretty_json(value: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    text
}

/// Run one command, writing results to `out` and diagnostics to `err`.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    use args::Command::*;
    match cli.command {
        Amplify(a) => amplify::cmd_amplify(&a, out, err),
        Run(a) => commands::cmd_run(&a, out),
        Coverage(a) => commands::cmd_coverage(&a, out),
        Triage(a) => commands::cmd_triage(&a, out),
        Report(a) => report::cmd_report(&a, out),
        Demo(a) => commands::cmd_demo(&a, out),
        Lint(a) => commands::cmd_lint(&a, out),
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            e.exit_code()
        }
    }
}
