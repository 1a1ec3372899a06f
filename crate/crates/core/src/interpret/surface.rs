use serde::{Deserialize, Serialize};

use crate::dataset::{encode_inputs, ProcessInputs, RangeSummary};
use crate::error::{Error, Result};
use crate::learners::TrainedModel;
use crate::matrix::Matrix;

/// Default number of points on each axis.
pub const SURFACE_GRID: usize = 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseSurface {
    pub feature_a: String,
    pub feature_b: String,
    /// Axis values in raw units.
    pub axis_a: Vec<f64>,
    pub axis_b: Vec<f64>,
    /// Values held for every other feature.
    pub fixed: Vec<(String, f64)>,
    /// `axis_a.len() × axis_b.len()` predictions, nm.
    pub predictions: Matrix,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
}

/// Predictions over a grid spanning the observed ranges of two features,
/// with every other feature held at `fixed`.
pub fn response_surface(
    model: &TrainedModel,
    feature_a: &str,
    feature_b: &str,
    grid: (usize, usize),
    fixed: &ProcessInputs,
    range: &RangeSummary,
) -> Result<ResponseSurface> {
    if grid.0 < 2 || grid.1 < 2 {
        return Err(Error::InvalidInput(format!("surface grid sizes must be at least 2, got {}×{}", grid.0, grid.1)));
    }
    if feature_a == feature_b {
        return Err(Error::InvalidInput("surface needs two different features".into()));
    }
    let locate = |f: &str| -> Result<(usize, Vec<f64>, usize)> {
        if !model.kept_features().iter().any(|k| k == f) {
            return Err(Error::MissingFeature(f.to_string()));
        }
        let j = model.feature_names.iter().position(|n| n == f).ok_or_else(|| Error::MissingFeature(f.to_string()))?;
        let fr = range.get(f).ok_or_else(|| Error::MissingFeature(f.to_string()))?;
        let n = if f == feature_a { grid.0 } else { grid.1 };
        Ok((j, linspace(fr.min, fr.max, n), n))
    };
    let (ja, axis_a, na) = locate(feature_a)?;
    let (jb, axis_b, nb) = locate(feature_b)?;
    let base = encode_inputs(&model.feature_names, fixed)?;
    let mut rows = Matrix::zeros(na * nb, base.len());
    for (a, &va) in axis_a.iter().enumerate() {
        for (b, &vb) in axis_b.iter().enumerate() {
            let row = rows.row_mut(a * nb + b);
            row.copy_from_slice(&base);
            row[ja] = va;
            row[jb] = vb;
        }
    }
    let predictions = Matrix::new(na, nb, model.predict(&rows)?)?;
    let fixed = model
        .feature_names
        .iter()
        .zip(&base)
        .enumerate()
        .filter(|&(j, _)| j != ja && j != jb)
        .map(|(_, (n, &v))| (n.clone(), v))
        .collect();
    Ok(ResponseSurface { feature_a: feature_a.into(), feature_b: feature_b.into(), axis_a, axis_b, fixed, predictions })
}
