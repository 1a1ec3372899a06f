use serde::{Deserialize, Serialize};

use super::{PolymerTable, ProcessInputs, StudyRecord, PROCESS_FEATURES};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub feature: String,
    pub min: f64,
    pub max: f64,
}

/// Observed min/max of each process parameter over one polymer, raw units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeSummary {
    pub polymer: String,
    pub features: Vec<FeatureRange>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeViolation {
    pub feature: String,
    pub value: f64,
    pub min: f64,
    pub max: f64,
}

impl RangeSummary {
    pub fn from_records<'a>(polymer: &str, rows: impl IntoIterator<Item = &'a StudyRecord>) -> Result<Self> {
        let mut lo = [f64::INFINITY; 6];
        let mut hi = [f64::NEG_INFINITY; 6];
        let mut any = false;
        for r in rows {
            any = true;
            for (k, v) in r.process_values().into_iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        if !any {
            return Err(Error::EmptySample);
        }
        Ok(Self::build(polymer, lo, hi))
    }

    pub fn from_table(table: &PolymerTable) -> Result<Self> {
        if table.n() == 0 {
            return Err(Error::EmptySample);
        }
        let mut lo = [f64::INFINITY; 6];
        let mut hi = [f64::NEG_INFINITY; 6];
        for row in table.x.rows() {
            for k in 0..6 {
                lo[k] = lo[k].min(row[k]);
                hi[k] = hi[k].max(row[k]);
            }
        }
        Ok(Self::build(&table.polymer, lo, hi))
    }

    fn build(polymer: &str, lo: [f64; 6], hi: [f64; 6]) -> Self {
        RangeSummary {
            polymer: polymer.to_string(),
            features: PROCESS_FEATURES
                .iter()
                .enumerate()
                .map(|(k, f)| FeatureRange { feature: f.to_string(), min: lo[k], max: hi[k] })
                .collect(),
        }
    }

    pub fn get(&self, feature: &str) -> Option<&FeatureRange> {
        self.features.iter().find(|f| f.feature == feature)
    }
}

/// Lists the inputs lying outside the closed observed interval.
pub fn range_check(inputs: &ProcessInputs, range: &RangeSummary) -> Vec<RangeViolation> {
    PROCESS_FEATURES
        .iter()
        .zip(inputs.values())
        .filter_map(|(name, value)| {
            let fr = range.get(name)?;
            (value < fr.min || value > fr.max).then(|| RangeViolation {
                feature: name.to_string(),
                value,
                min: fr.min,
                max: fr.max,
            })
        })
        .collect()
}
