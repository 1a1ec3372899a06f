//! Deterministic synthetic electrospinning data with a known ground truth.
//!
//! Each study fixes needle gauge, rotation speed, flow rate, distance and a
//! solvent system, then varies concentration and voltage across its rows. The
//! diameter is
//!
//! ```text
//! d = 200 + 300·σ(c − 12) + 400·exp(−((v − 19)/3)²)·(0.5 + c/20)
//!       − 6·(g − 18) + 15·q·√c − 0.3·(L − 15)² − 0.01·ω
//!       + study offset + noise
//! ```
//!
//! with σ the logistic function, c concentration (%), g gauge, ω rotation
//! (rpm), v voltage (kV), q flow rate (ml/h) and L distance (cm). The
//! concentration effect dominates and is monotone increasing; the voltage
//! effect is a bump, which linear models cannot represent. Diameters are
//! floored at 1 nm.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::StudyRecord;
use crate::error::{Error, Result};
use crate::seed::Seed;

pub const SYNTHETIC_POLYMER: &str = "SYN";

const GAUGES: [f64; 3] = [18.0, 21.0, 23.0];
const ROTATIONS: [f64; 3] = [0.0, 0.0, 1000.0];
const FLOWS: [f64; 4] = [0.5, 1.0, 1.0, 2.0];
const DISTANCES: [f64; 4] = [10.0, 15.0, 15.0, 20.0];
const SOLVENT_SYSTEMS: [([&str; 3], [f64; 3]); 5] = [
    (["WATER", "NONE", "NONE"], [100.0, 0.0, 0.0]),
    (["DMF", "THF", "NONE"], [60.0, 40.0, 0.0]),
    (["CHLOROFORM", "DMF", "NONE"], [80.0, 20.0, 0.0]),
    (["DCM", "DMF", "NONE"], [70.0, 30.0, 0.0]),
    (["HFIP", "NONE", "NONE"], [100.0, 0.0, 0.0]),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_studies: usize,
    pub rows_per_study: usize,
    pub noise_sd: f64,
    pub study_offset_sd: f64,
    pub seed: u64,
    pub polymer: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_studies: 30,
            rows_per_study: 20,
            noise_sd: 20.0,
            study_offset_sd: 20.0,
            seed: 42,
            polymer: SYNTHETIC_POLYMER.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthDataset {
    pub polymer: String,
    pub records: Vec<StudyRecord>,
    /// Additive offset of each study, indexed by study number.
    pub study_offsets: Vec<f64>,
    /// Noise-free, offset-free diameter of every record.
    pub truth: Vec<f64>,
}

/// Noise-free diameter (nm) for the six process parameters in canonical order.
pub fn ground_truth(v: &[f64; 6]) -> f64 {
    let [c, g, rpm, kv, q, dist] = *v;
    200.0 + 300.0 / (1.0 + (-(c - 12.0)).exp()) + 400.0 * (-((kv - 19.0) / 3.0).powi(2)).exp() * (0.5 + c / 20.0)
        - 6.0 * (g - 18.0)
        + 15.0 * q * c.max(0.0).sqrt()
        - 0.3 * (dist - 15.0).powi(2)
        - 0.01 * rpm
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<SynthDataset> {
    if config.n_studies == 0 || config.rows_per_study == 0 {
        return Err(Error::InvalidInput("synthetic sizes must be positive".into()));
    }
    if !(config.noise_sd >= 0.0 && config.study_offset_sd >= 0.0) {
        return Err(Error::InvalidInput("noise and offset standard deviations must be non-negative".into()));
    }
    let seed = Seed(config.seed);
    let mut records = Vec::with_capacity(config.n_studies * config.rows_per_study);
    let mut study_offsets = Vec::with_capacity(config.n_studies);
    let mut truth = Vec::with_capacity(records.capacity());
    for s in 0..config.n_studies {
        let mut rng = seed.derive("synth-study", s as u64).rng();
        let gauge = GAUGES[rng.random_range(0..GAUGES.len())];
        let rotation = ROTATIONS[rng.random_range(0..ROTATIONS.len())];
        let flow = FLOWS[rng.random_range(0..FLOWS.len())];
        let distance = DISTANCES[rng.random_range(0..DISTANCES.len())];
        let (solvents, ratios) = SOLVENT_SYSTEMS[rng.random_range(0..SOLVENT_SYSTEMS.len())];
        let z: f64 = rng.sample(StandardNormal);
        let offset = config.study_offset_sd * z;
        study_offsets.push(offset);
        let collector = if rotation > 0.0 { "rotating drum" } else { "flat plate" };
        for _ in 0..config.rows_per_study {
            let concentration = (rng.random_range(4.0..20.0f64) * 2.0).round() / 2.0;
            let voltage = rng.random_range(8.0..30.0f64).round();
            let values = [concentration, gauge, rotation, voltage, flow, distance];
            let f = ground_truth(&values);
            let e: f64 = rng.sample(StandardNormal);
            let temperature = (rng.random_range(18.0..28.0f64) * 10.0).round() / 10.0;
            let humidity = rng.random_range(30.0..60.0f64).round();
            truth.push(f);
            records.push(StudyRecord {
                doi: format!("10.5555/synthetic.{s:03}"),
                polymer: config.polymer.clone(),
                solvents: solvents.map(|n| (n != "NONE").then(|| n.to_string())),
                solvent_ratios: ratios.map(Some),
                concentration,
                needle_diameter: gauge,
                collector_type: collector.to_string(),
                rotation_speed: rotation,
                voltage,
                flow_rate: flow,
                distance,
                temperature: Some(temperature),
                humidity: Some(humidity),
                fibre_diameter: (f + offset + config.noise_sd * e).max(1.0),
            });
        }
    }
    Ok(SynthDataset { polymer: config.polymer.clone(), records, study_offsets, truth })
}
