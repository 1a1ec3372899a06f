//! Report bundles: one CSV per sheet, vector figures and a manifest of
//! content hashes, packed into a zip archive.

mod figures;
mod sheets;
mod svg;

use std::io::{Cursor, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use crate::dataset::{PolymerTable, RangeSummary, RangeViolation};
use crate::distribution::PredictiveDistribution;
use crate::error::{Error, Result};
use crate::interpret::{CorrelationMatrix, ImportanceTable, ShapSummary};
use crate::learners::{HyperParams, ModelState, TrainedModel};
use crate::recommend::SolventRecommendation;
use crate::service::RunRequest;
use crate::validation::CvResult;

pub use sheets::SHEETS;

/// Figure files, in archive order.
pub const FIGURES: [&str; 5] =
    ["prediction_distribution", "predicted_vs_observed", "variable_importance", "shap_summary", "correlation_heatmap"];

pub const MANIFEST: &str = "manifest.json";

/// Note written in place of coefficients for models without them.
pub const NO_COEFFICIENTS: &str = "This model has no transparent coefficients; see Variable_Importance and SHAP_Summary for its effects.";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub term: String,
    /// Effect of one standard deviation of the predictor, nm.
    pub estimate: f64,
    /// Effect of one raw unit of the predictor, nm.
    pub per_unit: f64,
    /// Missing for penalized fits and undefined standard errors.
    pub std_error: Option<f64>,
    pub t_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub rows: Vec<CoefficientRow>,
    /// Set when `rows` is empty, saying why.
    pub note: Option<String>,
}

impl CoefficientTable {
    /// Coefficients of a LINEAR or ELASTIC_NET model on its kept features;
    /// other models get an explanatory note instead.
    pub fn from_model(model: &TrainedModel) -> Self {
        let (intercept, beta, se, t, intercept_se) = match &model.state {
            ModelState::Linear(f) => (f.intercept, &f.coefficients, Some(&f.std_errors), Some(&f.t_values), Some(f.intercept_se)),
            ModelState::ElasticNet(f) => (f.intercept, &f.coefficients, None, None, None),
            _ => return CoefficientTable { rows: Vec::new(), note: Some(NO_COEFFICIENTS.to_string()) },
        };
        let finite = |v: f64| v.is_finite().then_some(v);
        let recipe = &model.recipe;
        let raw_intercept = intercept - beta.iter().zip(&recipe.means).zip(&recipe.sds).map(|((b, m), s)| b * m / s).sum::<f64>();
        let mut rows = vec![CoefficientRow {
            term: "(Intercept)".into(),
            estimate: intercept,
            per_unit: raw_intercept,
            std_error: intercept_se.and_then(finite),
            t_value: intercept_se.and_then(|s| finite(intercept / s)),
        }];
        for (j, name) in recipe.kept.iter().enumerate() {
            rows.push(CoefficientRow {
                term: name.clone(),
                estimate: beta[j],
                per_unit: beta[j] / recipe.sds[j],
                std_error: se.and_then(|s| finite(s[j])),
                t_value: t.and_then(|t| finite(t[j])),
            });
        }
        CoefficientTable { rows, note: None }
    }
}

/// Everything one modelling run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    /// The request with its seed resolved.
    pub request: RunRequest,
    /// nm
    pub prediction: f64,
    pub distribution: PredictiveDistribution,
    pub cv: CvResult,
    /// Hyperparameters tuned on the whole polymer table.
    pub final_params: HyperParams,
    pub coefficients: CoefficientTable,
    pub importance: ImportanceTable,
    pub shap: ShapSummary,
    pub correlations: CorrelationMatrix,
    pub recommendation: SolventRecommendation,
    pub range: RangeSummary,
    pub violations: Vec<RangeViolation>,
    pub table: PolymerTable,
    /// SHA-256 of the dataset content.
    pub dataset_fingerprint: String,
    /// Unix seconds; recorded only in the manifest.
    pub started_at: u64,
    pub finished_at: u64,
}

/// One archive member listed in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub version: String,
    pub polymer: String,
    pub model: String,
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub started_at: u64,
    pub finished_at: u64,
    pub members: Vec<ManifestEntry>,
}

/// The rendered members of a report, ready to archive.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportBundle {
    pub manifest: Manifest,
    /// `(path, bytes)` in archive order, manifest excluded.
    pub members: Vec<(String, Vec<u8>)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Renders every sheet and figure of a run.
pub fn build_report(artifacts: &RunArtifacts) -> Result<ReportBundle> {
    let mut members = Vec::new();
    for (name, body) in sheets::render(artifacts)? {
        members.push((format!("sheets/{name}.csv"), body.into_bytes()));
    }
    for (name, body) in figures::render(artifacts) {
        members.push((format!("figures/{name}.svg"), body.into_bytes()));
    }
    let manifest = Manifest {
        generator: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        polymer: artifacts.request.polymer.clone(),
        model: artifacts.request.model.to_string(),
        seed: artifacts.request.seed.unwrap_or_default().0,
        dataset_fingerprint: artifacts.dataset_fingerprint.clone(),
        started_at: artifacts.started_at,
        finished_at: artifacts.finished_at,
        members: members.iter().map(|(p, b)| ManifestEntry { path: p.clone(), sha256: sha256_hex(b), bytes: b.len() }).collect(),
    };
    Ok(ReportBundle { manifest, members })
}

impl ReportBundle {
    /// The zip archive: manifest first, then members in order, with fixed
    /// entry timestamps.
    pub fn to_zip(&self) -> Result<Vec<u8>> {
        let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
        let options = SimpleFileOptions::default()
            .compression_method(CompressionMethod::Deflated)
            .last_modified_time(DateTime::default())
            .unix_permissions(0o644);
        let manifest = serde_json::to_vec_pretty(&self.manifest)?;
        for (path, bytes) in std::iter::once((MANIFEST, manifest.as_slice())).chain(self.members.iter().map(|(p, b)| (p.as_str(), b.as_slice()))) {
            zip.start_file(path, options)?;
            zip.write_all(bytes)?;
        }
        Ok(zip.finish()?.into_inner())
    }

    pub fn member(&self, path: &str) -> Option<&[u8]> {
        self.members.iter().find(|(p, _)| p == path).map(|(_, b)| b.as_slice())
    }
}

/// Writes the bundle as a single zip archive.
pub fn write_bundle(bundle: &ReportBundle, path: &Path) -> Result<()> {
    std::fs::write(path, bundle.to_zip()?)?;
    Ok(())
}

/// Reads an archive back and checks every member against the manifest.
pub fn read_bundle(bytes: &[u8]) -> Result<ReportBundle> {
    let mut archive = ZipArchive::new(Cursor::new(bytes))?;
    let mut manifest: Option<Manifest> = None;
    let mut members = Vec::new();
    for i in 0..archive.len() {
        let mut file = archive.by_index(i)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        if file.name() == MANIFEST {
            manifest = Some(serde_json::from_slice(&buf)?);
        } else {
            members.push((file.name().to_string(), buf));
        }
    }
    let manifest = manifest.ok_or_else(|| Error::Serialization("archive has no manifest".into()))?;
    if manifest.members.len() != members.len() {
        return Err(Error::Serialization("manifest and archive list different members".into()));
    }
    for (entry, (path, bytes)) in manifest.members.iter().zip(&members) {
        if &entry.path != path || entry.sha256 != sha256_hex(bytes) || entry.bytes != bytes.len() {
            return Err(Error::Serialization(format!("member {path} does not match the manifest")));
        }
    }
    Ok(ReportBundle { manifest, members })
}
