use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Zero-variance removal followed by z-scoring, estimated on training rows
/// only. The target is never part of a recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecipe {
    /// Column layout the recipe was fitted on.
    pub source_names: Vec<String>,
    pub kept: Vec<String>,
    pub kept_index: Vec<usize>,
    pub dropped_zero_variance: Vec<String>,
    pub means: Vec<f64>,
    /// Sample standard deviations (n - 1 denominator), all > 0.
    pub sds: Vec<f64>,
}

/// Fits a recipe on the given training rows.
pub fn fit_recipe(x: &Matrix, names: &[String]) -> Result<NormalizationRecipe> {
    if x.ncols() != names.len() {
        return Err(Error::InvalidInput(format!("{} names for {} columns", names.len(), x.ncols())));
    }
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!("a normalization recipe needs at least 2 rows, got {n}")));
    }
    let mut recipe = NormalizationRecipe {
        source_names: names.to_vec(),
        kept: Vec::new(),
        kept_index: Vec::new(),
        dropped_zero_variance: Vec::new(),
        means: Vec::new(),
        sds: Vec::new(),
    };
    for (j, name) in names.iter().enumerate() {
        let first = x.get(0, j);
        if (1..n).all(|i| x.get(i, j) == first) {
            recipe.dropped_zero_variance.push(name.clone());
            continue;
        }
        let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
        let ss: f64 = (0..n).map(|i| (x.get(i, j) - mean).powi(2)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if sd <= 0.0 || !sd.is_finite() {
            recipe.dropped_zero_variance.push(name.clone());
            continue;
        }
        recipe.kept.push(name.clone());
        recipe.kept_index.push(j);
        recipe.means.push(mean);
        recipe.sds.push(sd);
    }
    if recipe.kept.is_empty() {
        return Err(Error::AllZeroVariance);
    }
    Ok(recipe)
}

/// Applies a recipe to rows laid out by `names`, which must contain every
/// kept feature.
pub fn apply_recipe(recipe: &NormalizationRecipe, names: &[String], x: &Matrix) -> Result<Matrix> {
    let idx: Vec<usize> = recipe
        .kept
        .iter()
        .map(|k| names.iter().position(|n| n == k).ok_or_else(|| Error::MissingFeature(k.clone())))
        .collect::<Result<_>>()?;
    Ok(recipe.transform_columns(x, &idx))
}

impl NormalizationRecipe {
    pub fn n_kept(&self) -> usize {
        self.kept.len()
    }

    /// Transforms rows in the recipe's own source layout.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.ncols() != self.source_names.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} feature columns, got {}",
                self.source_names.len(),
                x.ncols()
            )));
        }
        Ok(self.transform_columns(x, &self.kept_index))
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        self.kept_index
            .iter()
            .enumerate()
            .map(|(k, &j)| (row[j] - self.means[k]) / self.sds[k])
            .collect()
    }

    fn transform_columns(&self, x: &Matrix, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(x.nrows(), idx.len());
        for i in 0..x.nrows() {
            let src = x.row(i);
            let dst = out.row_mut(i);
            for (k, &j) in idx.iter().enumerate() {
                dst[k] = (src[j] - self.means[k]) / self.sds[k];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn constant_feature_is_dropped() {
        let x = Matrix::from_rows(&[[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]).unwrap();
        let r = fit_recipe(&x, &names(2)).unwrap();
        assert_eq!(r.dropped_zero_variance, vec!["f0".to_string()]);
        assert_eq!(r.kept, vec!["f1".to_string()]);
        // [1,2,3]: mean 2, sample sd 1
        assert_eq!(r.means, vec![2.0]);
        assert_eq!(r.sds, vec![1.0]);
    }

    #[test]
    fn all_constant_is_an_error() {
        let x = Matrix::from_rows(&[[5.0], [5.0]]).unwrap();
        assert!(matches!(fit_recipe(&x, &names(1)), Err(Error::AllZeroVariance)));
        let one = Matrix::from_rows(&[[5.0]]).unwrap();
        assert!(fit_recipe(&one, &names(1)).is_err());
    }

    #[test]
    fn own_rows_become_standard() {
        let x = Matrix::from_rows(&[[1.0, 10.0], [4.0, -3.0], [2.5, 7.0], [9.0, 0.5], [3.0, 3.0]]).unwrap();
        let r = fit_recipe(&x, &names(2)).unwrap();
        let z = r.transform(&x).unwrap();
        for j in 0..2 {
            let c = z.column(j);
            let m = c.iter().sum::<f64>() / 5.0;
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 4.0).sqrt();
            assert!(m.abs() < 1e-12);
            assert!((sd - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_row_maps_to_zero_and_two_sd_to_two() {
        let x = Matrix::from_rows(&[[1.0, 10.0], [4.0, -3.0], [2.5, 7.0]]).unwrap();
        let r = fit_recipe(&x, &names(2)).unwrap();
        assert_eq!(r.transform_row(&r.means.clone()), vec![0.0, 0.0]);
        let shifted: Vec<f64> = r.means.iter().zip(&r.sds).map(|(m, s)| m + 2.0 * s).collect();
        for v in r.transform_row(&shifted) {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_by_name_needs_kept_features() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 5.0]]).unwrap();
        let r = fit_recipe(&x, &names(2)).unwrap();
        let reordered = Matrix::from_rows(&[[2.0, 1.0]]).unwrap();
        let out = apply_recipe(&r, &["f1".to_string(), "f0".to_string()], &reordered).unwrap();
        assert_eq!(out.row(0), r.transform_row(&[1.0, 2.0]).as_slice());
        let err = apply_recipe(&r, &["f1".to_string()], &Matrix::from_rows(&[[2.0]]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::MissingFeature(f) if f == "f0"));
    }

    #[test]
    fn recipe_ignores_rows_it_was_not_fitted_on() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [100.0]]).unwrap();
        let train = x.select_rows(&[0, 1, 2]);
        let a = fit_recipe(&train, &names(1)).unwrap();
        let mut mutated = x.clone();
        mutated.set(3, 0, -55.0);
        let b = fit_recipe(&mutated.select_rows(&[0, 1, 2]), &names(1)).unwrap();
        assert_eq!(a, b);
    }
}
