//! The `report.json` envelope and CSV output.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: String,
    pub command: String,
    pub status: String,
    pub results: Value,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

impl Report {
    pub fn ok(command: &str, results: Value, warnings: Vec<String>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            status: "ok".into(),
            results,
            warnings,
            error: None,
        }
    }

    pub fn failed(command: &str, err: &CliError) -> Self {
        Report {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            status: "error".into(),
            results: Value::Object(Default::default()),
            warnings: Vec::new(),
            error: Some(ErrorInfo {
                kind: err.kind_name().into(),
                message: err.to_string(),
                exit_code: err.exit_code(),
            }),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        write_text(&dir.join("report.json"), &text)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes a header row and numeric rows.
pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
