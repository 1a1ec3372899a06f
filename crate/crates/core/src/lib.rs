//! Prediction of electrospun fibre-diameter distributions from process
//! parameters.
//!
//! The crate is organised around the stages of one modelling run:
//!
//! - [`dataset`]: ingestion, numeric cleaning, polymer subsets, leak-free
//!   normalization recipes, observed ranges and a synthetic generator.
//! - [`learners`]: seven regression learners behind one fit/predict contract.
//! - [`validation`]: nested cross-validation (leave-one-study-out outer loop,
//!   repeated k-fold inner tuning) and the error metrics.
//! - [`interpret`]: variable importance, Monte-Carlo SHAP, correlations and
//!   response surfaces.
//! - [`distribution`]: residual-bootstrap predictive distributions and the
//!   two-sample comparison battery.
//! - [`recommend`]: solvent-system recommendation from nearby historical runs.
//! - [`report`]: sheet-per-CSV report bundles with vector figures.
//! - [`service`]: the run pipeline, result cache and asynchronous job table.

pub mod dataset;
pub mod distribution;
pub mod error;
pub mod interpret;
pub mod learners;
pub mod matrix;
pub mod recommend;
pub mod report;
pub mod seed;
mod serde_float;
pub mod service;
pub mod validation;

pub use dataset::{
    IngestReport, NormalizationRecipe, PolymerTable, ProcessInputs, RangeSummary, RangeViolation,
    StudyRecord,
};
pub use distribution::{DistComparison, NormalityResult, PredictiveDistribution};
pub use error::{Error, Result};
pub use learners::{HyperParams, ModelKind, TrainedModel};
pub use matrix::Matrix;
pub use recommend::SolventRecommendation;
pub use report::{ReportBundle, RunArtifacts};
pub use service::{RunRequest, Service};
pub use seed::Seed;
pub use validation::{CvResult, FoldPlan, Metrics, MetricsSummary};
