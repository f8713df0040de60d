//! CSV and JSON output of sweep results.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SweepResult;
use crate::config::keyword_enum;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "mode,grid_value,curve,mse_mean,mse_se,nmse_mean,nmse_se,trials,overload_rate,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Json,
}

keyword_enum!(ExportFormat {
    ExportFormat::Csv => "csv",
    ExportFormat::Json => "json",
});

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        self.as_str()
    }
}

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per grid point and curve, in grid then curve order.
pub fn to_csv_string(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let mode = result.manifest.mode.as_str();
    for point in &result.points {
        for c in &point.curves {
            writeln!(
                out,
                "{mode},{},{},{},{},{},{},{},{},{}",
                point.grid_value,
                c.curve,
                c.mse_mean,
                opt(c.mse_se),
                c.nmse_mean,
                opt(c.nmse_se),
                c.trials,
                opt(c.overload_rate),
                result.manifest.master_seed
            )
            .expect("writing to a String");
        }
    }
    out
}

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv_string(result)).map_err(Error::io(path))
}

pub fn write_json(result: &SweepResult, path: &Path) -> Result<()> {
    let json_err = |source| Error::Json {
        path: path.to_path_buf(),
        source,
    };
    let text = serde_json::to_string_pretty(result).map_err(json_err)?;
    std::fs::write(path, text).map_err(Error::io(path))
}

pub fn read_json(path: &Path) -> Result<SweepResult> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn export_results(result: &SweepResult, path: &Path, format: ExportFormat) -> Result<()> {
    match format {
        ExportFormat::Csv => write_csv(result, path),
        ExportFormat::Json => write_json(result, path),
    }
}
