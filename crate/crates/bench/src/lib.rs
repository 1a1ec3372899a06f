//! Shared fixtures for the criterion benches.

use spindle_core::dataset::{generate_synthetic, polymer_subset, SynthConfig, SYNTHETIC_POLYMER};
use spindle_core::PolymerTable;

/// Modelling table of the seeded synthetic polymer.
pub fn synthetic_table(n_studies: usize, rows_per_study: usize) -> PolymerTable {
    let config = SynthConfig { n_studies, rows_per_study, ..SynthConfig::default() };
    let synth = generate_synthetic(&config).expect("synthetic config is valid");
    polymer_subset(&synth.records, SYNTHETIC_POLYMER, false).expect("synthetic polymer has several studies")
}

/// Deterministic pseudo-normal sample built from a fixed quasi-random
/// sequence, so the benches need no random number generator.
pub fn sample(n: usize, mean: f64, sd: f64) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let u = (i as f64 * 0.618_033_988_749_895).fract().clamp(1e-9, 1.0 - 1e-9);
            let v = (i as f64 * 0.754_877_666_246_693).fract();
            mean + sd * (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        })
        .collect()
}
