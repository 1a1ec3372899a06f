//! Electrospinning records: ingestion, cleaning, polymer subsets and
//! normalization.

mod load;
mod parse;
mod range;
mod recipe;
mod synth;
mod table;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use load::{load_dataset, load_dataset_path, write_dataset, IngestReport};
pub use parse::parse_numeric;
pub use range::{range_check, RangeSummary, FeatureRange, RangeViolation};
pub use recipe::{apply_recipe, fit_recipe, NormalizationRecipe};
pub use synth::{generate_synthetic, ground_truth, SynthConfig, SynthDataset, SYNTHETIC_POLYMER};
pub use table::{encode_inputs, polymer_records, polymer_subset, polymers, study_key, PolymerTable};

/// The six process parameters used as predictors, in canonical column order.
pub const PROCESS_FEATURES: [&str; 6] =
    ["concentration", "needle_diameter", "rotation_speed", "voltage", "flow_rate", "distance"];

/// Label used for an absent solvent slot.
pub const NO_SOLVENT: &str = "NONE";

/// One observed fibre: its provenance, solution, process settings and the
/// measured diameter in nm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub doi: String,
    pub polymer: String,
    pub solvents: [Option<String>; 3],
    pub solvent_ratios: [Option<f64>; 3],
    /// Solution concentration, % w/w.
    pub concentration: f64,
    /// Needle gauge number, used as-is.
    pub needle_diameter: f64,
    pub collector_type: String,
    /// rpm
    pub rotation_speed: f64,
    /// kV
    pub voltage: f64,
    /// ml/h
    pub flow_rate: f64,
    /// Tip-to-collector distance, cm.
    pub distance: f64,
    pub temperature: Option<f64>,
    pub humidity: Option<f64>,
    /// nm
    pub fibre_diameter: f64,
}

impl StudyRecord {
    pub fn process_values(&self) -> [f64; 6] {
        [
            self.concentration,
            self.needle_diameter,
            self.rotation_speed,
            self.voltage,
            self.flow_rate,
            self.distance,
        ]
    }

    /// Solvent triplet with absent slots rendered as [`NO_SOLVENT`].
    pub fn solvent_triplet(&self) -> [String; 3] {
        self.solvents.clone().map(|s| s.unwrap_or_else(|| NO_SOLVENT.to_string()))
    }
}

/// Operating point entered by a user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessInputs {
    pub concentration: f64,
    pub needle_diameter: f64,
    pub rotation_speed: f64,
    pub voltage: f64,
    pub flow_rate: f64,
    pub distance: f64,
    #[serde(default)]
    pub collector_type: String,
}

impl ProcessInputs {
    pub fn values(&self) -> [f64; 6] {
        [
            self.concentration,
            self.needle_diameter,
            self.rotation_speed,
            self.voltage,
            self.flow_rate,
            self.distance,
        ]
    }

    pub fn from_values(v: [f64; 6], collector_type: impl Into<String>) -> Self {
        ProcessInputs {
            concentration: v[0],
            needle_diameter: v[1],
            rotation_speed: v[2],
            voltage: v[3],
            flow_rate: v[4],
            distance: v[5],
            collector_type: collector_type.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in PROCESS_FEATURES.iter().zip(self.values()) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}
