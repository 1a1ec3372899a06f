use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{Binned, GrowParams, Grower, RegressionTree};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::Seed;

const MAX_DEPTH: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestFit {
    pub mtry: usize,
    pub min_node_size: usize,
    pub trees: Vec<RegressionTree>,
    /// Mean sum-of-squares reduction per tree credited to each feature.
    pub importance: Vec<f64>,
}

impl ForestFit {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Same values as [`ForestFit::predict_row`] on every row, visiting the
    /// trees one at a time.
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut acc = vec![-0.0; x.nrows()];
        for t in &self.trees {
            for (a, r) in acc.iter_mut().zip(x.rows()) {
                *a += t.predict_row(r);
            }
        }
        acc.iter_mut().for_each(|a| *a /= self.trees.len() as f64);
        acc
    }
}

/// Bagged regression trees with `mtry` candidate features per split.
///
/// Tree `t` draws its bootstrap and feature subsets from
/// `seed.derive("tree", t)`, so parallel and serial growth agree bit for bit.
pub fn fit_forest(x: &Matrix, y: &[f64], mtry: usize, min_node_size: usize, n_trees: usize, seed: Seed) -> Result<ForestFit> {
    let mut fits = fit_forest_sizes(x, y, mtry, &[min_node_size], n_trees, seed)?;
    Ok(fits.remove(0))
}

/// One forest per entry of `min_node_sizes`, each identical to a separate
/// [`fit_forest`] call. Every tree is grown once at the smallest size and
/// truncated for the others.
pub fn fit_forest_sizes(
    x: &Matrix,
    y: &[f64],
    mtry: usize,
    min_node_sizes: &[usize],
    n_trees: usize,
    seed: Seed,
) -> Result<Vec<ForestFit>> {
    let (n, p) = (x.nrows(), x.ncols());
    if n == 0 || y.len() != n || n > u32::MAX as usize {
        return Err(Error::InvalidInput("forest needs matching non-empty inputs".into()));
    }
    let smallest = min_node_sizes.iter().copied().min().unwrap_or(0);
    if mtry == 0 || mtry > p || smallest == 0 || n_trees == 0 {
        return Err(Error::InvalidInput(format!(
            "forest needs 1 <= mtry <= {p}, min_node_size >= 1 and n_trees >= 1 (got {mtry}, {smallest}, {n_trees})"
        )));
    }
    let binned = Binned::new(x);
    let params = GrowParams { min_split: smallest + 1, min_leaf: 1, max_depth: MAX_DEPTH, min_gain: 0.0, mtry: Some(mtry) };
    let mut grown: Vec<std::vec::IntoIter<RegressionTree>> = (0..n_trees)
        .into_par_iter()
        .map_init(
            || (Grower::new(&binned, y, params), vec![0u32; n]),
            |(grower, weights), t| {
                let tree_seed = seed.derive("tree", t as u64);
                let mut rng = tree_seed.rng();
                weights.iter_mut().for_each(|w| *w = 0);
                for _ in 0..n {
                    weights[rng.random_range(0..n as u32) as usize] += 1;
                }
                let full = grower.grow(weights, tree_seed.0);
                let mut out: Vec<Option<RegressionTree>> =
                    min_node_sizes.iter().map(|&s| (s != smallest).then(|| full.truncated(s as u32))).collect();
                let first = out.iter().position(Option::is_none).expect("smallest size present");
                out[first] = Some(full);
                for k in first + 1..out.len() {
                    if out[k].is_none() {
                        out[k] = out[first].clone();
                    }
                }
                out.into_iter().map(|t| t.expect("filled")).collect::<Vec<_>>()
            },
        )
        .map(Vec::into_iter)
        .collect();
    Ok(min_node_sizes
        .iter()
        .map(|&min_node_size| {
            let trees: Vec<RegressionTree> = grown.iter_mut().map(|g| g.next().expect("one tree per size")).collect();
            let mut importance = vec![0.0; p];
            for tree in &trees {
                for (acc, v) in importance.iter_mut().zip(tree.importance(p)) {
                    *acc += v;
                }
            }
            importance.iter_mut().for_each(|v| *v /= n_trees as f64);
            ForestFit { mtry, min_node_size, trees, importance }
        })
        .collect())
}
