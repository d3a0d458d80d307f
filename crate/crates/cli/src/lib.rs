//! Command-line front end for `refprior-core`.
//!
//! Each command reads a JSON [`config::RunConfig`], writes CSV and SVG
//! artifacts plus a `report.json` to the output directory, and maps
//! failures to exit codes: 2 for configuration errors, 3 for numerical
//! failures, 4 for violated hypotheses or constraints.

pub mod commands;
pub mod config;
pub mod plot;
pub mod report;

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use refprior_core::ErrorKind;
use thiserror::Error;

use config::LoadedConfig;
use report::Report;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] refprior_core::Error),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Hypothesis => 4,
            },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "numerical",
            _ => "hypothesis",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Jeffreys,
    Constrain,
    Properize,
    Decay,
    Hierarchy,
    Mutualinfo,
    Sensitivity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Jeffreys => "jeffreys",
            Command::Constrain => "constrain",
            Command::Properize => "properize",
            Command::Decay => "decay",
            Command::Hierarchy => "hierarchy",
            Command::Mutualinfo => "mutualinfo",
            Command::Sensitivity => "sensitivity",
        }
    }
}

/// Results and warnings of a successful command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub results: serde_json::Value,
    pub warnings: Vec<String>,
}

/// Runs `command` on a loaded configuration, writing artifacts to `out`.
pub fn run(command: Command, cfg: &LoadedConfig, out: &Path) -> Result<Outcome, CliError> {
    if let Some(c) = &cfg.run.command {
        if c != command.name() {
            return Err(CliError::Config(format!(
                "config is for command '{c}', not '{}'",
                command.name()
            )));
        }
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    match command {
        Command::Jeffreys => commands::jeffreys(cfg, out),
        Command::Constrain => commands::constrain(cfg, out),
        Command::Properize => commands::properize(cfg, out),
        Command::Decay => commands::decay(cfg, out),
        Command::Hierarchy => commands::hierarchy(cfg, out),
        Command::Mutualinfo => commands::mutualinfo(cfg, out),
        Command::Sensitivity => commands::sensitivity(cfg, out),
    }
}

/// Loads the config at `config_path`, runs the command and writes
/// `report.json`. Returns the report and the process exit code.
pub fn execute(command: Command, config_path: &Path, out_override: Option<PathBuf>) -> (Report, i32) {
    let loaded = config::load(config_path);
    let out = out_override
        .or_else(|| loaded.as_ref().ok().and_then(|c| c.run.output_dir.clone()).map(|p| {
            if p.is_relative() {
                config_path.parent().unwrap_or(Path::new(".")).join(p)
            } else {
                p
            }
        }))
        .unwrap_or_else(|| PathBuf::from("out"));
    let result = loaded.and_then(|cfg| run(command, &cfg, &out));
    let (report, code) = match result {
        Ok(o) => (Report::ok(command.name(), o.results, o.warnings), 0),
        Err(e) => (Report::failed(command.name(), &e), e.exit_code()),
    };
    if let Err(e) = report.write(&out) {
        eprintln!("{e}");
        return (report, if code == 0 { e.exit_code() } else { code });
    }
    (report, code)
}
