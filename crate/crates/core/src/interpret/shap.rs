use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::PolymerTable;
use crate::error::{Error, Result};
use crate::learners::TrainedModel;
use crate::matrix::Matrix;
use crate::seed::Seed;

pub const SHAP_SIMULATIONS: usize = 50;
pub const MAX_BACKGROUND: usize = 200;
pub const MAX_INSTANCES: usize = 200;

/// Monte-Carlo Shapley attributions, one row per explained instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub features: Vec<String>,
    /// Instances × features, nm.
    pub phi: Matrix,
    /// Monte-Carlo standard error of every entry of `phi`.
    pub std_errors: Matrix,
    /// Model output for each instance.
    pub predictions: Vec<f64>,
    /// Mean model output over the background rows.
    pub baseline: f64,
    /// Mean |φ| per feature.
    pub mean_abs: Vec<f64>,
    /// Feature indices by decreasing mean |φ|.
    pub order: Vec<usize>,
    pub background_rows: usize,
    pub simulations: usize,
    /// Table rows explained, when the instances came from a table.
    pub instance_rows: Vec<usize>,
}

impl ShapSummary {
    /// Names of the `n` features with the largest mean |φ|.
    pub fn top(&self, n: usize) -> Vec<&str> {
        self.order.iter().take(n).map(|&j| self.features[j].as_str()).collect()
    }

    /// Long-form `(instance, feature, φ)` triples.
    pub fn long_rows(&self) -> Vec<(usize, &str, f64)> {
        let mut out = Vec::with_capacity(self.phi.nrows() * self.phi.ncols());
        for i in 0..self.phi.nrows() {
            let id = self.instance_rows.get(i).copied().unwrap_or(i);
            for (j, f) in self.features.iter().enumerate() {
                out.push((id, f.as_str(), self.phi.get(i, j)));
            }
        }
        out
    }
}

/// Keeps at most `cap` rows, drawn without replacement and kept in table order.
fn sample_rows(n: usize, cap: usize, seed: Seed) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rows = index::sample(&mut seed.rng(), n, cap).into_vec();
    rows.sort_unstable();
    rows
}

/// Shapley values of `model` at each row of `instances` (raw layout of the
/// model), against `background` rows.
///
/// Each simulation draws a feature permutation and a background row, then
/// switches features from the background row to the instance in permutation
/// order; the change in prediction at each switch is one sample of that
/// feature's contribution given the features switched before it.
pub fn shap_values(model: &TrainedModel, instances: &Matrix, background: &Matrix, sims: usize, seed: Seed) -> Result<ShapSummary> {
    let p = model.feature_names.len();
    if background.nrows() == 0 {
        return Err(Error::InvalidInput("SHAP needs a non-empty background sample".into()));
    }
    if sims == 0 {
        return Err(Error::InvalidInput("SHAP needs at least one simulation".into()));
    }
    if instances.ncols() != p || background.ncols() != p {
        return Err(Error::InvalidInput(format!("SHAP inputs must have the model's {p} feature columns")));
    }
    let keep = sample_rows(background.nrows(), MAX_BACKGROUND, seed.derive("shap-background", 0));
    let background = background.select_rows(&keep);
    let baseline = model.predict(&background)?.iter().sum::<f64>() / background.nrows() as f64;
    let predictions = model.predict(instances)?;

    let per_instance: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..instances.nrows())
        .into_par_iter()
        .map(|i| explain(model, instances.row(i), &background, sims, seed.derive("shap", i as u64)))
        .collect();
    let mut phi = Matrix::zeros(instances.nrows(), p);
    let mut std_errors = Matrix::zeros(instances.nrows(), p);
    for (i, r) in per_instance.into_iter().enumerate() {
        let (mean, se) = r?;
        phi.row_mut(i).copy_from_slice(&mean);
        std_errors.row_mut(i).copy_from_slice(&se);
    }
    let n = instances.nrows().max(1) as f64;
    let mean_abs: Vec<f64> = (0..p).map(|j| (0..instances.nrows()).map(|i| phi.get(i, j).abs()).sum::<f64>() / n).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then(a.cmp(&b)));
    Ok(ShapSummary {
        features: model.feature_names.clone(),
        phi,
        std_errors,
        predictions,
        baseline,
        mean_abs,
        order,
        background_rows: background.nrows(),
        simulations: sims,
        instance_rows: Vec::new(),
    })
}

fn explain(model: &TrainedModel, x: &[f64], background: &Matrix, sims: usize, seed: Seed) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = x.len();
    let mut rng = seed.rng();
    let mut perm: Vec<usize> = (0..p).collect();
    // all coalition rows of every simulation, predicted in one batch
    let mut rows = Matrix::zeros(sims * (p + 1), p);
    let mut perms = Vec::with_capacity(sims);
    for s in 0..sims {
        perm.shuffle(&mut rng);
        let z = background.row(rng.random_range(0..background.nrows()));
        let mut current = z.to_vec();
        rows.row_mut(s * (p + 1)).copy_from_slice(&current);
        for (step, &j) in perm.iter().enumerate() {
            current[j] = x[j];
            rows.row_mut(s * (p + 1) + step + 1).copy_from_slice(&current);
        }
        perms.push(perm.clone());
    }
    let f = model.predict(&rows)?;
    let mut sum = vec![0.0; p];
    let mut sum_sq = vec![0.0; p];
    for (s, perm) in perms.iter().enumerate() {
        for (step, &j) in perm.iter().enumerate() {
            let d = f[s * (p + 1) + step + 1] - f[s * (p + 1) + step];
            sum[j] += d;
            sum_sq[j] += d * d;
        }
    }
    let k = sims as f64;
    let mean: Vec<f64> = sum.iter().map(|v| v / k).collect();
    let se = (0..p)
        .map(|j| if sims > 1 { ((sum_sq[j] - k * mean[j] * mean[j]).max(0.0) / (k - 1.0) / k).sqrt() } else { f64::NAN })
        .collect();
    Ok((mean, se))
}

/// Explains up to 200 seeded rows of `table` against up to 200 seeded
/// background rows of the same table.
pub fn shap_for_table(model: &TrainedModel, table: &PolymerTable, sims: usize, seed: Seed) -> Result<ShapSummary> {
    let rows = sample_rows(table.n(), MAX_INSTANCES, seed.derive("shap-instances", 0));
    let mut summary = shap_values(model, &table.x.select_rows(&rows), &table.x, sims, seed)?;
    summary.instance_rows = rows;
    Ok(summary)
}
