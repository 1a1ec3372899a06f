use serde::{Deserialize, Serialize};

use super::split::{Binned, GrowParams, Grower, RegressionTree};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeControl {
    pub min_split: usize,
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl Default for TreeControl {
    fn default() -> Self {
        TreeControl { min_split: 20, min_leaf: 7, max_depth: 30 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeFit {
    pub cp: f64,
    pub tree: RegressionTree,
    /// Sum-of-squares reduction credited to each feature.
    pub importance: Vec<f64>,
}

impl TreeFit {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.tree.predict_row(row)
    }
}

/// Single regression tree; a split is kept only when its sum-of-squares
/// reduction is at least `cp` times the root sum of squares.
pub fn fit_tree(x: &Matrix, y: &[f64], cp: f64) -> Result<TreeFit> {
    fit_tree_with(x, y, cp, TreeControl::default())
}

pub fn fit_tree_with(x: &Matrix, y: &[f64], cp: f64, control: TreeControl) -> Result<TreeFit> {
    let n = x.nrows();
    if n == 0 || y.len() != n {
        return Err(Error::InvalidInput("tree needs matching non-empty inputs".into()));
    }
    if !(cp > 0.0 && cp < 1.0) {
        return Err(Error::InvalidInput(format!("cp must lie in (0, 1), got {cp}")));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let root_ss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let binned = Binned::new(x);
    let params = GrowParams {
        min_split: control.min_split,
        min_leaf: control.min_leaf,
        max_depth: control.max_depth,
        min_gain: cp * root_ss,
        mtry: None,
    };
    let mut grower = Grower::new(&binned, y, params);
    let tree = grower.grow(&vec![1; n], 0);
    let importance = tree.importance(x.ncols());
    Ok(TreeFit { cp, tree, importance })
}
