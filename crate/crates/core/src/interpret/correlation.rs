use serde::{Deserialize, Serialize};

use crate::dataset::PolymerTable;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Column name given to the target in the correlation matrix.
pub const TARGET_NAME: &str = "fibre_diameter";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    /// Predictors followed by the target.
    pub names: Vec<String>,
    pub r: Matrix,
    /// Zero-variance columns left out of the matrix.
    pub excluded: Vec<String>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.r.get(i, j))
    }
}

/// Pearson correlation; `None` when either column is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n != b.len() || n < 2 {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - ma, y - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pairwise Pearson correlations over every predictor and the target.
pub fn correlation_matrix(table: &PolymerTable) -> Result<CorrelationMatrix> {
    if table.n() < 2 {
        return Err(Error::InvalidInput(format!("correlations need at least 2 rows, got {}", table.n())));
    }
    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut excluded = Vec::new();
    let candidates = table.feature_names.iter().cloned().zip((0..table.p()).map(|j| table.x.column(j)));
    for (name, col) in candidates.chain(std::iter::once((TARGET_NAME.to_string(), table.y.clone()))) {
        if col.iter().all(|&v| v == col[0]) {
            log::info!("correlation matrix: {name} has zero variance and is left out");
            excluded.push(name);
        } else {
            names.push(name);
            columns.push(col);
        }
    }
    let k = names.len();
    let mut r = Matrix::zeros(k, k);
    for i in 0..k {
        r.set(i, i, 1.0);
        for j in 0..i {
            let v = pearson(&columns[i], &columns[j]).expect("non-constant columns");
            r.set(i, j, v);
            r.set(j, i, v);
        }
    }
    Ok(CorrelationMatrix { names, r, excluded })
}
