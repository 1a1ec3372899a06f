use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ProcessInputs, StudyRecord, PROCESS_FEATURES};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const COLLECTOR_PREFIX: &str = "collector_type=";

/// Group key for a study: the DOI, trimmed and lowercased.
pub fn study_key(doi: &str) -> String {
    doi.trim().to_lowercase()
}

fn same_polymer(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

/// Distinct polymer labels in first-seen order.
pub fn polymers(records: &[StudyRecord]) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for r in records {
        if !seen.iter().any(|p| same_polymer(p, &r.polymer)) {
            seen.push(r.polymer.trim().to_string());
        }
    }
    seen
}

pub fn polymer_records<'a>(records: &'a [StudyRecord], polymer: &str) -> Vec<&'a StudyRecord> {
    records.iter().filter(|r| same_polymer(&r.polymer, polymer)).collect()
}

/// Model-ready view of one polymer: raw (untransformed) features, the target
/// in nm and the study group of every row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolymerTable {
    pub polymer: String,
    pub feature_names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub study_ids: Vec<String>,
    /// Collector labels encoded as indicator columns (empty unless requested).
    pub collector_levels: Vec<String>,
}

impl PolymerTable {
    /// Builds a table directly from arrays; used by tests and benchmarks.
    pub fn from_parts(
        polymer: impl Into<String>,
        feature_names: Vec<String>,
        x: Matrix,
        y: Vec<f64>,
        study_ids: Vec<String>,
    ) -> Result<Self> {
        if x.nrows() != y.len() || y.len() != study_ids.len() {
            return Err(Error::InvalidInput(format!(
                "table parts disagree: {} feature rows, {} targets, {} study ids",
                x.nrows(),
                y.len(),
                study_ids.len()
            )));
        }
        if x.ncols() != feature_names.len() {
            return Err(Error::InvalidInput("feature name count does not match matrix width".into()));
        }
        Ok(PolymerTable { polymer: polymer.into(), feature_names, x, y, study_ids, collector_levels: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_studies(&self) -> usize {
        self.study_ids.iter().collect::<BTreeSet<_>>().len()
    }

    /// Row indices of each study, keyed by study id.
    pub fn study_groups(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.study_ids.iter().enumerate() {
            groups.entry(s.as_str()).or_default().push(i);
        }
        groups
    }

    pub fn subset(&self, rows: &[usize]) -> PolymerTable {
        PolymerTable {
            polymer: self.polymer.clone(),
            feature_names: self.feature_names.clone(),
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            study_ids: rows.iter().map(|&i| self.study_ids[i].clone()).collect(),
            collector_levels: self.collector_levels.clone(),
        }
    }

    /// Encodes a user operating point in this table's column layout.
    pub fn feature_row(&self, inputs: &ProcessInputs) -> Vec<f64> {
        let mut row = inputs.values().to_vec();
        row.extend(self.collector_levels.iter().map(|l| f64::from(u8::from(*l == inputs.collector_type.trim()))));
        row
    }

    pub fn target_range(&self) -> (f64, f64) {
        self.y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Encodes an operating point in an arbitrary feature layout made of process
/// parameters and `collector_type=<label>` indicators.
pub fn encode_inputs(feature_names: &[String], inputs: &ProcessInputs) -> Result<Vec<f64>> {
    let values = inputs.values();
    feature_names
        .iter()
        .map(|name| {
            if let Some(k) = PROCESS_FEATURES.iter().position(|f| f == name) {
                Ok(values[k])
            } else if let Some(label) = name.strip_prefix(COLLECTOR_PREFIX) {
                Ok(f64::from(u8::from(label == inputs.collector_type.trim())))
            } else {
                Err(Error::MissingFeature(name.clone()))
            }
        })
        .collect()
}

/// Selects one polymer's rows and lays out the six process parameters as
/// candidate features, optionally followed by one indicator column per
/// collector label (only when more than one label is present).
pub fn polymer_subset(records: &[StudyRecord], polymer: &str, include_collector: bool) -> Result<PolymerTable> {
    let rows = polymer_records(records, polymer);
    if rows.is_empty() {
        return Err(Error::UnknownPolymer { name: polymer.to_string(), available: polymers(records) });
    }
    let study_ids: Vec<String> = rows.iter().map(|r| study_key(&r.doi)).collect();
    let n_studies = study_ids.iter().collect::<BTreeSet<_>>().len();
    if n_studies < 2 {
        return Err(Error::InsufficientStudies { polymer: polymer.to_string(), found: n_studies });
    }

    let mut feature_names: Vec<String> = PROCESS_FEATURES.iter().map(|s| s.to_string()).collect();
    let collector_levels: Vec<String> = if include_collector {
        let levels: BTreeSet<&str> = rows.iter().map(|r| r.collector_type.trim()).collect();
        if levels.len() > 1 { levels.into_iter().map(str::to_string).collect() } else { Vec::new() }
    } else {
        Vec::new()
    };
    feature_names.extend(collector_levels.iter().map(|l| format!("{COLLECTOR_PREFIX}{l}")));

    let mut x = Matrix::zeros(0, feature_names.len());
    for r in &rows {
        let mut v = r.process_values().to_vec();
        v.extend(collector_levels.iter().map(|l| f64::from(u8::from(l == r.collector_type.trim()))));
        x.push_row(&v)?;
    }
    Ok(PolymerTable {
        polymer: rows[0].polymer.trim().to_string(),
        feature_names,
        x,
        y: rows.iter().map(|r| r.fibre_diameter).collect(),
        study_ids,
        collector_levels,
    })
}
