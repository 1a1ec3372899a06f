use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::MetricsSummary;
use super::nested::nested_cv;
use crate::dataset::{polymer_subset, polymers, StudyRecord};
use crate::error::Result;
use crate::learners::ModelKind;
use crate::seed::Seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub polymer: String,
    pub kind: ModelKind,
    /// `None` with an error message when the learner could not be evaluated.
    pub summary: Option<MetricsSummary>,
    pub error: Option<String>,
}

/// Polymer × learner matrix of nested cross-validation summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub seed: Seed,
    pub cells: Vec<BenchmarkCell>,
}

/// Evaluates every learner on every polymer with at least two studies.
/// Polymers that cannot form a table are skipped with a warning.
pub fn benchmark(records: &[StudyRecord], kinds: &[ModelKind], include_collector: bool, seed: Seed) -> Result<BenchmarkTable> {
    let mut cells = Vec::new();
    for polymer in polymers(records) {
        let table = match polymer_subset(records, &polymer, include_collector) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("skipping polymer {polymer}: {e}");
                continue;
            }
        };
        for &kind in kinds {
            log::info!("benchmark {polymer} / {kind}");
            let cell = match nested_cv(&table, kind, seed) {
                Ok((_, s)) => BenchmarkCell { polymer: polymer.clone(), kind, summary: Some(s), error: None },
                Err(e) => BenchmarkCell { polymer: polymer.clone(), kind, summary: None, error: Some(e.to_string()) },
            };
            cells.push(cell);
        }
    }
    Ok(BenchmarkTable { seed, cells })
}

impl BenchmarkTable {
    pub const HEADER: [&'static str; 5] = ["polymer", "model", "RMSE", "MAE", "R2"];

    /// One row per (polymer, model) with `mean ± SD` cells.
    pub fn rows(&self) -> Vec<[String; 5]> {
        self.cells
            .iter()
            .map(|c| match &c.summary {
                Some(s) => [c.polymer.clone(), c.kind.to_string(), s.rmse.display(2), s.mae.display(2), s.r2.display(3)],
                None => {
                    let msg = format!("failed: {}", c.error.as_deref().unwrap_or("unknown error"));
                    [c.polymer.clone(), c.kind.to_string(), msg, String::new(), String::new()]
                }
            })
            .collect()
    }

    /// Plain-text table with aligned columns.
    pub fn render(&self) -> String {
        let rows = self.rows();
        let mut widths = Self::HEADER.map(|h| h.chars().count());
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &Self::HEADER.map(String::from));
        line(&mut out, &widths.map(|w| "-".repeat(w)));
        for r in &rows {
            line(&mut out, r);
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::HEADER)?;
        for r in self.rows() {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| crate::error::Error::Serialization(e.to_string()))
    }
}
