use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnFit {
    pub k: usize,
    pub x: Matrix,
    pub y: Vec<f64>,
}

pub fn fit_knn(x: &Matrix, y: &[f64], k: usize) -> Result<KnnFit> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::InvalidInput("knn needs one target per row".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("knn needs 1 <= k <= {n}, got {k}")));
    }
    Ok(KnnFit { k, x: x.clone(), y: y.to_vec() })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Training row indices ordered by distance to `row`, ties by lower index.
#[cfg(test)]
pub(crate) fn neighbour_order(x: &Matrix, row: &[f64]) -> Vec<usize> {
    let d: Vec<f64> = x.rows().map(|r| sq_dist(r, row)).collect();
    let mut idx: Vec<usize> = (0..x.nrows()).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    idx
}

/// Mean target of the first `k` entries of a neighbour ordering.
#[cfg(test)]
pub(crate) fn mean_of_first(order: &[usize], y: &[f64], k: usize) -> f64 {
    order[..k].iter().map(|&i| y[i]).sum::<f64>() / k as f64
}

impl KnnFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, r) in self.x.rows().enumerate() {
            let d = sq_dist(r, row);
            if best.len() == self.k && d >= best[self.k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(self.k);
        }
        best.iter().map(|&(_, i)| self.y[i]).sum::<f64>() / self.k as f64
    }
}
