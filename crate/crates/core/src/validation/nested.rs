use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{inner_splits, make_folds_with, InnerSplit, OuterScheme};
use super::metrics::{metrics, summarize, Metrics, MetricsSummary};
use crate::dataset::PolymerTable;
use crate::error::{Error, Result};
use crate::learners::{default_grid, fit, fit_many, HyperParams, ModelKind, TrainedModel};
use crate::seed::Seed;

/// Outcome of grid tuning on one training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_index: usize,
    pub best: HyperParams,
    /// Mean inner RMSE per grid point; `None` where some split failed to fit.
    pub mean_rmse: Vec<Option<f64>>,
}

/// Picks the grid point with the lowest mean validation RMSE over `splits`.
/// Each split refits the normalization recipe on its own training rows.
/// Ties go to the earliest grid point.
pub fn tune(table: &PolymerTable, grid: &[HyperParams], splits: &[InnerSplit], seed: Seed) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty tuning grid".into()));
    }
    if grid.len() == 1 {
        return Ok(TuneResult { best_index: 0, best: grid[0], mean_rmse: vec![None] });
    }
    let per_split: Vec<Vec<Option<f64>>> = splits
        .par_iter()
        .enumerate()
        .map(|(s, split)| {
            let train = table.subset(&split.train);
            let valid = table.x.select_rows(&split.validation);
            let y_valid: Vec<f64> = split.validation.iter().map(|&i| table.y[i]).collect();
            fit_many(grid, &train.x, &train.feature_names, &train.y, seed.derive("inner-fit", s as u64))
                .into_iter()
                .map(|m| {
                    let m = m.ok()?;
                    let pred = m.predict(&valid).ok()?;
                    let rmse = metrics(&y_valid, &pred).ok()?.rmse;
                    rmse.is_finite().then_some(rmse)
                })
                .collect()
        })
        .collect();
    let mean_rmse: Vec<Option<f64>> = (0..grid.len())
        .map(|g| {
            let vals: Option<Vec<f64>> = per_split.iter().map(|s| s[g]).collect();
            vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (g, r) in mean_rmse.iter().enumerate() {
        if let Some(r) = *r {
            if best.is_none_or(|(_, b)| r < b) {
                best = Some((g, r));
            }
        }
    }
    let (best_index, _) = best.ok_or_else(|| Error::InvalidInput("no grid point could be fitted on every inner split".into()))?;
    Ok(TuneResult { best_index, best: grid[best_index], mean_rmse })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub index: usize,
    pub label: String,
    /// Grid point chosen by the inner loop.
    pub selected: HyperParams,
    /// The same point with data-dependent values resolved on the outer-train.
    pub fitted: HyperParams,
    pub test_rows: Vec<usize>,
    pub predictions: Vec<f64>,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub kind: ModelKind,
    pub scheme: OuterScheme,
    pub seed: Seed,
    pub folds: Vec<FoldResult>,
    /// Out-of-fold prediction for every table row.
    pub oof: Vec<f64>,
    pub observed: Vec<f64>,
    pub summary: MetricsSummary,
}

impl CvResult {
    /// Observed minus out-of-fold predicted, row-aligned.
    pub fn residuals(&self) -> Vec<f64> {
        self.observed.iter().zip(&self.oof).map(|(y, p)| y - p).collect()
    }
}

#[derive(Clone, Debug, Default)]
pub struct CvOptions {
    pub scheme: OuterScheme,
    /// Overrides the default grid of the model kind.
    pub grid: Option<Vec<HyperParams>>,
}

/// Nested cross-validation with leave-one-study-out outer folds.
pub fn nested_cv(table: &PolymerTable, kind: ModelKind, seed: Seed) -> Result<(CvResult, MetricsSummary)> {
    nested_cv_with(table, kind, &CvOptions::default(), seed)
}

pub fn nested_cv_with(table: &PolymerTable, kind: ModelKind, options: &CvOptions, seed: Seed) -> Result<(CvResult, MetricsSummary)> {
    let grid = options.grid.clone().unwrap_or_else(|| default_grid(kind, table.p()));
    if let Some(bad) = grid.iter().find(|p| p.kind() != kind) {
        return Err(Error::InvalidInput(format!("grid point {bad} does not belong to {kind}")));
    }
    let plan = make_folds_with(&table.study_ids, options.scheme, seed)?;
    let folds: Vec<FoldResult> = plan
        .outer
        .par_iter()
        .map(|fold| {
            let fold_seed = seed.derive("outer-fit", fold.index as u64);
            let run = || -> Result<FoldResult> {
                let tuned = tune(table, &grid, &fold.inner, fold_seed)?;
                let train = table.subset(&fold.train);
                let model = fit(&tuned.best, &train.x, &train.feature_names, &train.y, fold_seed)?;
                let predictions = model.predict(&table.x.select_rows(&fold.test))?;
                let observed: Vec<f64> = fold.test.iter().map(|&i| table.y[i]).collect();
                Ok(FoldResult {
                    index: fold.index,
                    label: fold.label.clone(),
                    selected: tuned.best,
                    fitted: model.params,
                    test_rows: fold.test.clone(),
                    metrics: metrics(&observed, &predictions)?,
                    predictions,
                })
            };
            run().map_err(|e| e.in_fold(fold.index))
        })
        .collect::<Result<_>>()?;
    let mut oof = vec![f64::NAN; table.n()];
    for f in &folds {
        for (&row, &p) in f.test_rows.iter().zip(&f.predictions) {
            oof[row] = p;
        }
    }
    let summary = summarize(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>());
    let result = CvResult { kind, scheme: options.scheme, seed, folds, oof, observed: table.y.clone(), summary };
    Ok((result, summary))
}

/// Model used for user predictions: tuned by 5 × 2 folds on the whole table,
/// then refitted on every row.
pub fn final_fit(table: &PolymerTable, kind: ModelKind, seed: Seed) -> Result<TrainedModel> {
    final_fit_with(table, &default_grid(kind, table.p()), seed)
}

pub fn final_fit_with(table: &PolymerTable, grid: &[HyperParams], seed: Seed) -> Result<TrainedModel> {
    let rows: Vec<usize> = (0..table.n()).collect();
    let splits = inner_splits(&rows, seed.derive("final-folds", 0));
    let fit_seed = seed.derive("final-fit", 0);
    let tuned = tune(table, grid, &splits, fit_seed)?;
    fit(&tuned.best, &table.x, &table.feature_names, &table.y, fit_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::fit_linear;
    use crate::matrix::Matrix;
    use rand::Rng;

    fn linear_table(studies: usize, per: usize, noise: f64, seed: u64) -> PolymerTable {
        let mut rng = Seed(seed).rng();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut ids = Vec::new();
        for s in 0..studies {
            for _ in 0..per {
                let r = [rng.random_range(0.0..10.0), rng.random_range(-5.0..5.0)];
                y.push(4.0 + 2.0 * r[0] - 3.0 * r[1] + noise * rng.random_range(-1.0..1.0));
                rows.push(r);
                ids.push(format!("study-{s}"));
            }
        }
        PolymerTable::from_parts("T", vec!["a".into(), "b".into()], Matrix::from_rows(&rows).unwrap(), y, ids).unwrap()
    }

    #[test]
    fn noiseless_linear_data_is_recovered_in_every_fold() {
        let t = linear_table(5, 8, 0.0, 1);
        let (cv, summary) = nested_cv(&t, ModelKind::Linear, Seed(42)).unwrap();
        assert_eq!(cv.oof.len(), t.n());
        assert!(cv.folds.iter().all(|f| f.metrics.rmse < 1e-8));
        assert!((summary.r2.mean - 1.0).abs() < 1e-12);
        assert!(summary.r2.sd < 1e-12);
        assert_eq!(summary.folds, 5);
    }

    #[test]
    fn summary_matches_direct_recomputation() {
        let t = linear_table(6, 7, 1.0, 2);
        let (cv, s) = nested_cv(&t, ModelKind::Knn, Seed(1)).unwrap();
        let rmse: Vec<f64> = cv.folds.iter().map(|f| f.metrics.rmse).collect();
        let mean = rmse.iter().sum::<f64>() / 6.0;
        let sd = (rmse.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0).sqrt();
        assert!((s.rmse.mean - mean).abs() < 1e-12 && (s.rmse.sd - sd).abs() < 1e-12);
        for f in &cv.folds {
            let obs: Vec<f64> = f.test_rows.iter().map(|&i| t.y[i]).collect();
            let oof: Vec<f64> = f.test_rows.iter().map(|&i| cv.oof[i]).collect();
            assert_eq!(metrics(&obs, &oof).unwrap(), f.metrics);
        }
    }

    #[test]
    fn singleton_grid_and_final_linear_fit() {
        let t = linear_table(3, 10, 0.5, 3);
        let m = final_fit(&t, ModelKind::Linear, Seed(1)).unwrap();
        let direct = fit_linear(&t.x, &t.y).unwrap();
        for r in t.x.rows() {
            assert!((m.predict_row(r) - direct.predict_row(r)).abs() < 1e-9);
        }
    }

    #[test]
    fn knn_tuning_picks_smallest_k_on_memorizable_data() {
        // a noiseless step-free function sampled densely: neighbours closer in
        // feature space are closer in target, so inner RMSE grows with k
        let rows: Vec<[f64; 1]> = (0..80).map(|i| [i as f64]).collect();
        let y: Vec<f64> = (0..80).map(|i| (i as f64 * 0.15).sin() * 100.0 + i as f64 * i as f64 * 0.05).collect();
        let ids: Vec<String> = (0..80).map(|i| format!("s{}", i % 4)).collect();
        let t = PolymerTable::from_parts("T", vec!["a".into()], Matrix::from_rows(&rows).unwrap(), y, ids).unwrap();
        let splits = inner_splits(&(0..80).collect::<Vec<_>>(), Seed(1));
        let r = tune(&t, &default_grid(ModelKind::Knn, 1), &splits, Seed(1)).unwrap();
        assert_eq!(r.best, HyperParams::Knn { k: 3 });
        let scores: Vec<f64> = r.mean_rmse.iter().map(|v| v.unwrap()).collect();
        assert!(scores.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ties_go_to_the_first_grid_point() {
        let t = linear_table(3, 10, 1.0, 4);
        let splits = inner_splits(&(0..30).collect::<Vec<_>>(), Seed(1));
        let grid = [HyperParams::Knn { k: 30 }, HyperParams::Knn { k: 40 }];
        // both clamp to every training row, so the scores tie exactly
        let r = tune(&t, &grid, &splits, Seed(1)).unwrap();
        assert_eq!(r.mean_rmse[0], r.mean_rmse[1]);
        assert_eq!(r.best_index, 0);
    }

    #[test]
    fn test_rows_never_influence_their_fold() {
        let t = linear_table(4, 10, 1.0, 5);
        let (base, _) = nested_cv(&t, ModelKind::ElasticNet, Seed(9)).unwrap();
        let mut mutated = t.clone();
        let held = &base.folds[1].test_rows;
        for &i in held {
            mutated.x.set(i, 0, 1e6);
            mutated.x.set(i, 1, -1e6);
        }
        let (after, _) = nested_cv(&mutated, ModelKind::ElasticNet, Seed(9)).unwrap();
        assert_eq!(base.folds[1].selected, after.folds[1].selected);
        assert_eq!(base.folds[1].fitted, after.folds[1].fitted);
    }

    #[test]
    fn fold_errors_carry_the_fold_index() {
        // a constant feature in one fold's training side makes every column
        // zero-variance there
        let rows = vec![[1.0], [1.0], [1.0], [1.0], [2.0], [3.0]];
        let ids = vec!["a", "a", "a", "a", "b", "b"].into_iter().map(String::from).collect();
        let t = PolymerTable::from_parts("T", vec!["a".into()], Matrix::from_rows(&rows).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], ids).unwrap();
        let err = nested_cv(&t, ModelKind::Linear, Seed(1)).unwrap_err();
        assert!(matches!(err, Error::Fold { fold: 1, .. }), "{err}");
    }
}
