use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::PolymerTable;
use crate::error::{Error, Result};
use crate::learners::{ModelState, TrainedModel};
use crate::seed::Seed;
use crate::validation::metrics;

pub const PERMUTATION_REPEATS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    AbsTStatistic,
    AbsCoefficient,
    SplitReduction,
    /// Mean RMSE increase over seeded column permutations.
    Permutation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub raw: f64,
    /// Min-max scaled to [0, 100].
    pub scaled: f64,
}

/// Rows sorted by decreasing score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub method: ImportanceMethod,
    pub rows: Vec<ImportanceRow>,
}

impl ImportanceTable {
    /// The `n` highest-ranked rows.
    pub fn top(&self, n: usize) -> &[ImportanceRow] {
        &self.rows[..n.min(self.rows.len())]
    }

    pub fn get(&self, feature: &str) -> Option<&ImportanceRow> {
        self.rows.iter().find(|r| r.feature == feature)
    }
}

/// `(s - min) / (max - min) · 100`. Equal scores map to 100 when positive
/// and to 0 otherwise.
pub fn scale_scores(raw: &[f64]) -> Vec<f64> {
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if raw.is_empty() {
        return Vec::new();
    }
    if hi > lo {
        raw.iter().map(|v| (100.0 * (v - lo) / (hi - lo)).clamp(0.0, 100.0)).collect()
    } else {
        let fill = if hi > 0.0 { 100.0 } else { 0.0 };
        vec![fill; raw.len()]
    }
}

/// Per-feature importance of `model` over every column of its raw layout.
/// Features dropped by the model's recipe score zero.
pub fn variable_importance(model: &TrainedModel, table: &PolymerTable, seed: Seed) -> Result<ImportanceTable> {
    if table.feature_names != model.feature_names {
        return Err(Error::InvalidInput("table columns do not match the model's feature layout".into()));
    }
    let kept = &model.recipe.kept_index;
    let on_kept = |scores: Vec<f64>| {
        let mut full = vec![0.0; model.feature_names.len()];
        for (&j, s) in kept.iter().zip(scores) {
            full[j] = if s.is_finite() { s } else { 0.0 };
        }
        full
    };
    let (method, raw) = match &model.state {
        ModelState::Linear(f) => (ImportanceMethod::AbsTStatistic, on_kept(f.t_values.iter().map(|t| t.abs()).collect())),
        ModelState::ElasticNet(f) => (ImportanceMethod::AbsCoefficient, on_kept(f.coefficients.iter().map(|b| b.abs()).collect())),
        ModelState::Tree(f) => (ImportanceMethod::SplitReduction, on_kept(f.importance.clone())),
        ModelState::Forest(f) => (ImportanceMethod::SplitReduction, on_kept(f.importance.clone())),
        ModelState::SvrRbf(_) | ModelState::Knn(_) | ModelState::Mars(_) => {
            (ImportanceMethod::Permutation, permutation_importance(model, table, seed)?)
        }
    };
    let scaled = scale_scores(&raw);
    let mut rows: Vec<ImportanceRow> = model
        .feature_names
        .iter()
        .zip(raw.iter().zip(&scaled))
        .map(|(f, (&raw, &scaled))| ImportanceRow { feature: f.clone(), raw, scaled })
        .collect();
    rows.sort_by(|a, b| b.scaled.total_cmp(&a.scaled).then(b.raw.total_cmp(&a.raw)));
    Ok(ImportanceTable { method, rows })
}

fn permutation_importance(model: &TrainedModel, table: &PolymerTable, seed: Seed) -> Result<Vec<f64>> {
    let base = metrics(&table.y, &model.predict(&table.x)?)?.rmse;
    let kept = &model.recipe.kept_index;
    let mut out = vec![0.0; table.p()];
    for &j in kept {
        let mut rng = seed.derive("permutation", j as u64).rng();
        let mut x = table.x.clone();
        let mut column = table.x.column(j);
        let mut total = 0.0;
        for _ in 0..PERMUTATION_REPEATS {
            column.shuffle(&mut rng);
            for (i, &v) in column.iter().enumerate() {
                x.set(i, j, v);
            }
            total += metrics(&table.y, &model.predict(&x)?)?.rmse - base;
        }
        out[j] = total / PERMUTATION_REPEATS as f64;
    }
    Ok(out)
}
