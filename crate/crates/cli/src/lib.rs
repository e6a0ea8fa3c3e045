//! Command-line front end for `ziegler-core`.
//!
//! Every subcommand reads a pendulum configuration, runs one analysis and
//! writes JSON (reports) or CSV (sweeps, grids). Files written with `--out`
//! get a `<out>.manifest.json` sidecar; the data files themselves depend only
//! on the inputs, so identical runs produce identical bytes.
//!
//! Exit codes: 0 success, 1 failed verification checks, 2 bad configuration
//! or arguments, 3 numeric failure, 4 I/O failure. Errors are printed to
//! standard error as one JSON object.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

pub mod args;
mod commands;

use args::Cli;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.message(),
            }
        })
        .to_string()
    }
}

impl From<ziegler_core::Error> for CliError {
    fn from(e: ziegler_core::Error) -> Self {
        use ziegler_core::Error as E;
        match e {
            E::InvalidConfig(_) | E::NonFinite(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Provenance record written next to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_path: Option<PathBuf>,
    /// Configuration fields replaced on the command line.
    pub overrides: serde_json::Map<String, serde_json::Value>,
    /// Every effective option of the subcommand, defaults included.
    pub parameters: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub wall_time_seconds: f64,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Parse `argv` (program name first), run the subcommand and return the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let outcome = match cli.jobs {
        Some(0) => Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Numeric(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| commands::execute(&cli.command, started))),
        None => commands::execute(&cli.command, started),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
