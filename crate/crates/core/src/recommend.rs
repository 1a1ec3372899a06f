//! Solvent-system recommendation from historical runs near an operating
//! point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{ProcessInputs, StudyRecord};
use crate::error::{Error, Result};

/// Rows considered around the operating point.
pub const DEFAULT_NEIGHBOURS: usize = 10;
/// Weight of parameter proximity against diameter closeness.
pub const DEFAULT_PARAMETER_WEIGHT: f64 = 0.7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolventRecommendation {
    /// Solvent labels with absent slots as `NONE`.
    pub triplet: [String; 3],
    /// Median ratio (%) per slot over the supporting rows; `None` when no
    /// supporting row records that ratio.
    pub ratios: [Option<f64>; 3],
    /// Number of closest rows examined.
    pub k: usize,
    /// Indices of the `k` closest rows, best first.
    pub candidates: Vec<usize>,
    /// Candidates carrying the recommended triplet.
    pub supporting: Vec<usize>,
}

impl SolventRecommendation {
    /// Status sentence in the web console's wording.
    pub fn sentence(&self) -> String {
        let ratios: Vec<String> = self.ratios.iter().map(|r| r.map_or("NA".to_string(), |v| format!("{}%", trim(v)))).collect();
        format!(
            "Recommended solvents & ratios (from {} closest rows): {}. Median ratios: {}.",
            self.k,
            self.triplet.join(" + "),
            ratios.join(" / ")
        )
    }
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn min_max(v: &[f64]) -> Vec<f64> {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    v.iter().map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }).collect()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Scores each row by `w · parameter distance + (1 − w) · diameter
/// distance` (both SD-scaled, then min-max normalized over the rows) and
/// recommends the most frequent solvent triplet among the `k` best rows.
///
/// Ties in score go to the lower row index; ties in triplet frequency go to
/// the lower summed score, then the lexicographically smaller triplet.
pub fn recommend_solvents(rows: &[&StudyRecord], inputs: &ProcessInputs, predicted: f64, k: usize, w: f64) -> Result<SolventRecommendation> {
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(0.0..=1.0).contains(&w) || k == 0 {
        return Err(Error::InvalidInput(format!("recommendation needs 0 <= w <= 1 and k >= 1, got w = {w}, k = {k}")));
    }
    let query = inputs.values();
    let scales: Vec<f64> = (0..6).map(|j| sd(rows.iter().map(move |r| r.process_values()[j]))).collect();
    let parameter: Vec<f64> = rows
        .iter()
        .map(|r| {
            let v = r.process_values();
            (0..6).filter(|&j| scales[j] > 0.0).map(|j| ((v[j] - query[j]) / scales[j]).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    let diameter_sd = sd(rows.iter().map(|r| r.fibre_diameter));
    let diameter: Vec<f64> = rows
        .iter()
        .map(|r| if diameter_sd > 0.0 { (r.fibre_diameter - predicted).abs() / diameter_sd } else { 0.0 })
        .collect();
    let (parameter, diameter) = (min_max(&parameter), min_max(&diameter));
    let score: Vec<f64> = parameter.iter().zip(&diameter).map(|(p, d)| w * p + (1.0 - w) * d).collect();

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    order.truncate(k);

    let mut tally: BTreeMap<[String; 3], (usize, f64)> = BTreeMap::new();
    for &i in &order {
        let e = tally.entry(rows[i].solvent_triplet()).or_default();
        e.0 += 1;
        e.1 += score[i];
    }
    let triplet = tally
        .iter()
        .min_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.total_cmp(&b.1 .1)).then(a.0.cmp(b.0)))
        .map(|(t, _)| t.clone())
        .expect("at least one candidate");
    let supporting: Vec<usize> = order.iter().copied().filter(|&i| rows[i].solvent_triplet() == triplet).collect();
    let ratios = std::array::from_fn(|slot| {
        let values = supporting
            .iter()
            .filter_map(|&i| {
                let r = rows[i];
                r.solvent_ratios[slot].or(r.solvents[slot].is_none().then_some(0.0))
            })
            .collect();
        median(values).map(|v| v.clamp(0.0, 100.0))
    });
    Ok(SolventRecommendation { triplet, ratios, k: order.len(), candidates: order, supporting })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(solvents: [&str; 3], ratios: [f64; 3], process: [f64; 6], diameter: f64) -> StudyRecord {
        let slot = |s: &str| (s != "NONE").then(|| s.to_string());
        StudyRecord {
            doi: "10.1/x".into(),
            polymer: "PVA".into(),
            solvents: solvents.map(slot),
            solvent_ratios: ratios.map(Some),
            concentration: process[0],
            needle_diameter: process[1],
            collector_type: "FLAT".into(),
            rotation_speed: process[2],
            voltage: process[3],
            flow_rate: process[4],
            distance: process[5],
            temperature: None,
            humidity: None,
            fibre_diameter: diameter,
        }
    }

    fn query(process: [f64; 6]) -> ProcessInputs {
        ProcessInputs::from_values(process, "FLAT")
    }

    #[test]
    fn water_only_rows_reproduce_console_sentence() {
        let rows: Vec<StudyRecord> = (0..25)
            .map(|i| record(["WATER", "NONE", "NONE"], [100.0, 0.0, 0.0], [8.0 + i as f64 * 0.3, 21.0, 0.0, 15.0 + i as f64 * 0.1, 0.5, 10.0], 150.0 + i as f64))
            .collect();
        let refs: Vec<&StudyRecord> = rows.iter().collect();
        let r = recommend_solvents(&refs, &query([10.0, 21.0, 0.0, 15.0, 0.5, 10.0]), 137.651, 10, 0.7).unwrap();
        assert_eq!(
            r.sentence(),
            "Recommended solvents & ratios (from 10 closest rows): WATER + NONE + NONE. Median ratios: 100% / 0% / 0%."
        );
        assert_eq!(r.candidates.len(), 10);
    }

    #[test]
    fn single_row() {
        let rows = [record(["DMF", "THF", "NONE"], [60.0, 40.0, 0.0], [1.0; 6], 300.0)];
        let r = recommend_solvents(&[&rows[0]], &query([5.0; 6]), 10.0, 10, 0.7).unwrap();
        assert_eq!(r.triplet, ["DMF", "THF", "NONE"].map(String::from));
        assert_eq!(r.ratios, [Some(60.0), Some(40.0), Some(0.0)]);
        assert_eq!(r.k, 1);
    }

    #[test]
    fn hand_scored_rows() {
        // concentration only varies; sd = 1, query 0 -> distances 1, 0, 2
        // diameters 100, 100, 100 so the diameter term is flat
        // min-max: r1 0.5, r2 0, r3 1 -> order r2 < r1 < r3
        let rows = [
            record(["DCM", "DMF", "NONE"], [70.0, 30.0, 0.0], [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 100.0),
            record(["DCM", "DMF", "NONE"], [80.0, 20.0, 0.0], [0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 100.0),
            record(["WATER", "NONE", "NONE"], [100.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0, 0.0, 0.0], 100.0),
        ];
        let refs: Vec<&StudyRecord> = rows.iter().collect();
        let r = recommend_solvents(&refs, &query([0.0; 6]), 100.0, 2, 0.7).unwrap();
        assert_eq!(r.candidates, vec![1, 0]);
        assert_eq!(r.triplet, ["DCM", "DMF", "NONE"].map(String::from));
        assert_eq!(r.ratios, [Some(75.0), Some(25.0), Some(0.0)]);
    }

    #[test]
    fn weight_extremes_select_by_one_term() {
        // row 0 matches the parameters, row 1 matches the diameter
        let rows = [
            record(["A", "NONE", "NONE"], [100.0, 0.0, 0.0], [5.0, 20.0, 0.0, 10.0, 1.0, 15.0], 500.0),
            record(["B", "NONE", "NONE"], [100.0, 0.0, 0.0], [9.0, 25.0, 100.0, 20.0, 3.0, 25.0], 200.0),
            record(["C", "NONE", "NONE"], [100.0, 0.0, 0.0], [7.0, 22.0, 50.0, 15.0, 2.0, 20.0], 350.0),
        ];
        let refs: Vec<&StudyRecord> = rows.iter().collect();
        let q = query([5.0, 20.0, 0.0, 10.0, 1.0, 15.0]);
        assert_eq!(recommend_solvents(&refs, &q, 200.0, 1, 1.0).unwrap().triplet[0], "A");
        assert_eq!(recommend_solvents(&refs, &q, 200.0, 1, 0.0).unwrap().triplet[0], "B");
    }

    #[test]
    fn ties_and_errors() {
        let rows = [
            record(["B", "NONE", "NONE"], [100.0, 0.0, 0.0], [1.0; 6], 100.0),
            record(["A", "NONE", "NONE"], [100.0, 0.0, 0.0], [1.0; 6], 100.0),
        ];
        let refs: Vec<&StudyRecord> = rows.iter().collect();
        // equal counts and scores -> lexicographic
        assert_eq!(recommend_solvents(&refs, &query([1.0; 6]), 100.0, 2, 0.7).unwrap().triplet[0], "A");
        assert!(recommend_solvents(&[], &query([1.0; 6]), 100.0, 2, 0.7).is_err());
        assert!(recommend_solvents(&refs, &query([1.0; 6]), 100.0, 2, 1.5).is_err());
    }

    #[test]
    fn ratio_formatting() {
        assert_eq!(trim(100.0), "100");
        assert_eq!(trim(37.5), "37.5");
        assert_eq!(trim(33.333), "33.33");
    }

    proptest! {
        #[test]
        fn column_scaling_keeps_the_candidate_set(
            process in prop::collection::vec(prop::array::uniform6(0.0f64..100.0), 3..30),
            diam in prop::collection::vec(50.0f64..800.0, 30),
            q in prop::array::uniform6(0.0f64..100.0),
            column in 0usize..6,
            factor in 0.01f64..100.0,
        ) {
            let names = ["A", "B", "C"];
            let rows: Vec<StudyRecord> = process.iter().enumerate()
                .map(|(i, p)| record([names[i % 3], "NONE", "NONE"], [100.0, 0.0, 0.0], *p, diam[i]))
                .collect();
            let scaled: Vec<StudyRecord> = rows.iter().map(|r| {
                let mut v = r.process_values();
                v[column] *= factor;
                record([names[0], "NONE", "NONE"], [100.0, 0.0, 0.0], v, r.fibre_diameter)
            }).collect();
            let mut qs = q;
            qs[column] *= factor;
            let a = recommend_solvents(&rows.iter().collect::<Vec<_>>(), &query(q), 300.0, 5, 0.7).unwrap();
            let b = recommend_solvents(&scaled.iter().collect::<Vec<_>>(), &query(qs), 300.0, 5, 0.7).unwrap();
            let (mut sa, mut sb) = (a.candidates.clone(), b.candidates.clone());
            sa.sort_unstable();
            sb.sort_unstable();
            prop_assert_eq!(sa, sb);
        }
    }
}
