//! The run pipeline, its result cache and the asynchronous job table served
//! to the web console.

mod jobs;

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{
    encode_inputs, polymer_records, polymer_subset, polymers, range_check, study_key, write_dataset, IngestReport, ProcessInputs,
    RangeSummary, StudyRecord,
};
use crate::distribution::{residual_bootstrap, DEFAULT_REALISATIONS};
use crate::error::{Error, Result};
use crate::interpret::{correlation_matrix, shap_for_table, variable_importance, SHAP_SIMULATIONS};
use crate::learners::ModelKind;
use crate::recommend::{recommend_solvents, DEFAULT_NEIGHBOURS, DEFAULT_PARAMETER_WEIGHT};
use crate::report::{CoefficientTable, RunArtifacts};
use crate::seed::Seed;
use crate::validation::{final_fit, nested_cv};

pub use jobs::{RunState, RunStatus, Service};

/// Pipeline stages in execution order.
pub const STAGES: [&str; 10] =
    ["subset", "nested_cv", "final_fit", "predict", "bootstrap", "importance", "shap", "correlations", "recommendation", "range_check"];

/// One prediction request from the console or the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub polymer: String,
    pub inputs: ProcessInputs,
    pub model: ModelKind,
    /// Defaults to 42 when omitted.
    #[serde(default)]
    pub seed: Option<Seed>,
    /// Adds collector-type indicator columns to the predictors.
    #[serde(default)]
    pub include_collector: bool,
}

impl RunRequest {
    /// The request with its seed filled in.
    pub fn resolved(&self) -> RunRequest {
        RunRequest { seed: Some(self.seed.unwrap_or_default()), ..self.clone() }
    }

    /// Content key of this request against a dataset fingerprint.
    pub fn cache_key(&self, fingerprint: &str) -> String {
        let body = serde_json::to_string(&self.resolved()).expect("request serializes");
        hex::encode(Sha256::new().chain_update(body).chain_update([0]).chain_update(fingerprint).finalize())
    }
}

/// A dataset held by the service, with its content hash.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedDataset {
    pub name: String,
    pub records: Vec<StudyRecord>,
    pub fingerprint: String,
    pub ingest: Option<IngestReport>,
}

impl LoadedDataset {
    /// Fingerprints the records by hashing their canonical CSV form.
    pub fn new(name: impl Into<String>, records: Vec<StudyRecord>, ingest: Option<IngestReport>) -> Result<Self> {
        let mut csv = Vec::new();
        write_dataset(&records, &mut csv)?;
        Ok(LoadedDataset { name: name.into(), fingerprint: hex::encode(Sha256::digest(&csv)), records, ingest })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolymerInfo {
    pub name: String,
    pub rows: usize,
    pub studies: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub kind: ModelKind,
    pub available: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capabilities {
    pub dataset: String,
    pub dataset_fingerprint: String,
    pub polymers: Vec<PolymerInfo>,
    pub models: Vec<ModelInfo>,
    /// Sidebar line listing the runnable models.
    pub models_line: String,
    pub default_seed: Seed,
}

/// Polymers present in the dataset and the model kinds this build runs.
pub fn list_capabilities(dataset: &LoadedDataset) -> Capabilities {
    let polymers = polymers(&dataset.records)
        .into_iter()
        .map(|name| {
            let rows = polymer_records(&dataset.records, &name);
            let studies = rows.iter().map(|r| study_key(&r.doi)).collect::<std::collections::BTreeSet<_>>().len();
            PolymerInfo { rows: rows.len(), studies, name }
        })
        .collect();
    let models: Vec<ModelInfo> = ModelKind::ALL.iter().map(|&kind| ModelInfo { kind, available: true }).collect();
    let names: Vec<&str> = models.iter().filter(|m| m.available).map(|m| m.kind.as_str()).collect();
    Capabilities {
        dataset: dataset.name.clone(),
        dataset_fingerprint: dataset.fingerprint.clone(),
        polymers,
        models,
        models_line: format!("Available models on this server: {}", names.join(", ")),
        default_seed: Seed::default(),
    }
}

/// Observed min/max of every process parameter for one polymer.
pub fn polymer_range(dataset: &LoadedDataset, polymer: &str) -> Result<RangeSummary> {
    let rows = polymer_records(&dataset.records, polymer);
    if rows.is_empty() {
        return Err(Error::UnknownPolymer { name: polymer.to_string(), available: polymers(&dataset.records) });
    }
    RangeSummary::from_records(polymer, rows)
}

/// Seconds since the epoch, or `SOURCE_DATE_EPOCH` when set.
pub fn now_unix() -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return v;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Runs every stage for one request.
pub fn run_pipeline(dataset: &LoadedDataset, request: &RunRequest) -> Result<RunArtifacts> {
    run_pipeline_with(dataset, request, &|_| {})
}

/// As [`run_pipeline`], reporting each stage name before it starts.
pub fn run_pipeline_with(dataset: &LoadedDataset, request: &RunRequest, progress: &(dyn Fn(&'static str) + Sync)) -> Result<RunArtifacts> {
    let request = request.resolved();
    let seed = request.seed.unwrap_or_default();
    let started_at = now_unix();
    request.inputs.validate()?;
    let stage = |name: &'static str| {
        progress(name);
        move |e: Error| e.at_stage(name)
    };

    let on_err = stage("subset");
    let table = polymer_subset(&dataset.records, &request.polymer, request.include_collector).map_err(on_err)?;

    let on_err = stage("nested_cv");
    let (cv, _) = nested_cv(&table, request.model, seed).map_err(on_err)?;

    let on_err = stage("final_fit");
    let model = final_fit(&table, request.model, seed).map_err(on_err)?;

    let on_err = stage("predict");
    let row = encode_inputs(&model.feature_names, &request.inputs).map_err(on_err)?;
    let prediction = model.predict_row(&row);

    let on_err = stage("bootstrap");
    let distribution = residual_bootstrap(prediction, &cv.residuals(), DEFAULT_REALISATIONS, seed).map_err(on_err)?;

    let on_err = stage("importance");
    let importance = variable_importance(&model, &table, seed.derive("importance", 0)).map_err(on_err)?;

    let on_err = stage("shap");
    let shap = shap_for_table(&model, &table, SHAP_SIMULATIONS, seed.derive("shap-run", 0)).map_err(on_err)?;

    let on_err = stage("correlations");
    let correlations = correlation_matrix(&table).map_err(on_err)?;

    let on_err = stage("recommendation");
    let rows = polymer_records(&dataset.records, &request.polymer);
    let recommendation =
        recommend_solvents(&rows, &request.inputs, prediction, DEFAULT_NEIGHBOURS, DEFAULT_PARAMETER_WEIGHT).map_err(on_err)?;

    let on_err = stage("range_check");
    let range = RangeSummary::from_records(&request.polymer, rows).map_err(on_err)?;
    let violations = range_check(&request.inputs, &range);

    Ok(RunArtifacts {
        prediction,
        distribution,
        final_params: model.params,
        coefficients: CoefficientTable::from_model(&model),
        cv,
        importance,
        shap,
        correlations,
        recommendation,
        range,
        violations,
        table,
        dataset_fingerprint: dataset.fingerprint.clone(),
        started_at,
        finished_at: now_unix(),
        request,
    })
}
