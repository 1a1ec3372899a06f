//! Nested cross-validation and error metrics.

mod benchmark;
mod folds;
mod metrics;
mod nested;

pub use benchmark::{benchmark, BenchmarkCell, BenchmarkTable};
pub use folds::{inner_splits, make_folds, make_folds_with, FoldPlan, InnerSplit, OuterFold, OuterScheme, INNER_FOLDS, INNER_REPEATS};
pub use metrics::{metrics, summarize, Metrics, MetricsSummary, Stat};
pub use nested::{final_fit, final_fit_with, nested_cv, nested_cv_with, tune, CvOptions, CvResult, FoldResult, TuneResult};
