//! Dataset and sample loading shared by the subcommands and the server.

use std::fs::File;
use std::path::{Path, PathBuf};

use spindle_core::dataset::{generate_synthetic, load_dataset_path, SynthConfig};
use spindle_core::service::LoadedDataset;

use crate::error::{CliError, Result};

/// Dataset name reported when no data file is given.
pub const SYNTHETIC_NAME: &str = "synthetic";

/// Loads `path`, or the default seeded synthetic dataset when `path` is
/// `None`.
pub fn load(path: Option<&Path>) -> Result<LoadedDataset> {
    match path {
        Some(p) => {
            let (records, report) = load_dataset_path(p)?;
            log::info!("loaded {} rows from {} ({} dropped)", report.records, p.display(), report.dropped());
            let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
            Ok(LoadedDataset::new(name, records, Some(report))?)
        }
        None => {
            let synth = generate_synthetic(&SynthConfig::default())?;
            Ok(LoadedDataset::new(SYNTHETIC_NAME, synth.records, None)?)
        }
    }
}

/// Reads one numeric column from a CSV file. A first row that does not parse
/// as a number is taken as the header; `column` selects a column by header
/// name, otherwise the first column is used. Empty cells are skipped.
pub fn read_sample(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file);
    let bad = |message: String| CliError::Sample { path: PathBuf::from(path), message };
    let mut index = 0usize;
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if line == 0 && record.get(0).is_some_and(|c| !c.is_empty() && c.parse::<f64>().is_err()) {
            if let Some(name) = column {
                index = record.iter().position(|h| h == name).ok_or_else(|| bad(format!("no column named '{name}'")))?;
            }
            continue;
        }
        if line == 0 && column.is_some() {
            return Err(bad("a column name was given but the file has no header row".into()));
        }
        let cell = record.get(index).unwrap_or("");
        if cell.is_empty() {
            continue;
        }
        let v: f64 = cell.parse().map_err(|_| bad(format!("line {}: '{cell}' is not a number", line + 1)))?;
        if !v.is_finite() {
            return Err(bad(format!("line {}: non-finite value", line + 1)));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(bad("no numeric values".into()));
    }
    Ok(values)
}
