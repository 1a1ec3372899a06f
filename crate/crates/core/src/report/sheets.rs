use crate::dataset::PROCESS_FEATURES;
use crate::error::{Error, Result};
use crate::validation::Stat;

use super::RunArtifacts;

/// Sheet names, in archive order.
pub const SHEETS: [&str; 9] = [
    "Summary",
    "Out_of_Range",
    "CV_Predictions",
    "Prediction_Distribution",
    "Metrics",
    "Coefficients",
    "Variable_Importance",
    "SHAP_Summary",
    "Correlation_Matrix",
];

fn num(v: f64) -> String {
    if v.is_finite() { format!("{v}") } else { "NA".into() }
}

fn opt(v: Option<f64>) -> String {
    v.map_or("NA".into(), num)
}

struct Sheet {
    w: csv::Writer<Vec<u8>>,
}

impl Sheet {
    fn new(header: &[&str]) -> Result<Self> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(header)?;
        Ok(Sheet { w })
    }

    fn row<I: IntoIterator<Item = S>, S: AsRef<[u8]>>(&mut self, fields: I) -> Result<()> {
        Ok(self.w.write_record(fields)?)
    }

    fn finish(self) -> Result<String> {
        let bytes = self.w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn stat_fields(s: &Stat) -> [String; 2] {
    [num(s.mean), num(s.sd)]
}

/// All nine sheets as `(name, CSV text)`.
pub(super) fn render(a: &RunArtifacts) -> Result<Vec<(&'static str, String)>> {
    Ok(vec![
        ("Summary", summary(a)?),
        ("Out_of_Range", out_of_range(a)?),
        ("CV_Predictions", cv_predictions(a)?),
        ("Prediction_Distribution", prediction_distribution(a)?),
        ("Metrics", metrics(a)?),
        ("Coefficients", coefficients(a)?),
        ("Variable_Importance", importance(a)?),
        ("SHAP_Summary", shap(a)?),
        ("Correlation_Matrix", correlations(a)?),
    ])
}

fn summary(a: &RunArtifacts) -> Result<String> {
    let mut s = Sheet::new(&["item", "value"])?;
    let r = &a.request;
    let d = &a.distribution;
    let m = &a.cv.summary;
    let mut items: Vec<(String, String)> = vec![
        ("polymer".into(), r.polymer.clone()),
        ("collector_type".into(), r.inputs.collector_type.clone()),
        ("model".into(), r.model.to_string()),
        ("seed".into(), r.seed.unwrap_or_default().to_string()),
    ];
    for (name, v) in PROCESS_FEATURES.iter().zip(r.inputs.values()) {
        items.push((name.to_string(), num(v)));
    }
    items.extend([
        ("prediction_nm".into(), num(a.prediction)),
        ("realisations".into(), d.realisations.len().to_string()),
        ("realisation_mean_nm".into(), num(d.mean())),
        ("realisation_sd_nm".into(), num(d.sd())),
        ("realisation_p05_nm".into(), num(d.quantile(0.05))),
        ("realisation_p95_nm".into(), num(d.quantile(0.95))),
        ("cv_folds".into(), m.folds.to_string()),
        ("cv_r2_mean".into(), num(m.r2.mean)),
        ("cv_r2_sd".into(), num(m.r2.sd)),
        ("cv_rmse_mean_nm".into(), num(m.rmse.mean)),
        ("cv_rmse_sd_nm".into(), num(m.rmse.sd)),
        ("cv_mae_mean_nm".into(), num(m.mae.mean)),
        ("cv_mae_sd_nm".into(), num(m.mae.sd)),
        ("final_params".into(), serde_json::to_string(&a.final_params)?),
        ("top_feature".into(), a.importance.rows.first().map_or("NA".into(), |r| r.feature.clone())),
        ("out_of_range_count".into(), a.violations.len().to_string()),
        ("solvent_recommendation".into(), a.recommendation.sentence()),
        ("dataset_rows".into(), a.table.n().to_string()),
        ("dataset_fingerprint".into(), a.dataset_fingerprint.clone()),
    ]);
    for (k, v) in items {
        s.row([k, v])?;
    }
    s.finish()
}

fn out_of_range(a: &RunArtifacts) -> Result<String> {
    let mut s = Sheet::new(&["feature", "value", "min", "max", "status"])?;
    for (name, v) in PROCESS_FEATURES.iter().zip(a.request.inputs.values()) {
        let Some(fr) = a.range.get(name) else { continue };
        let outside = a.violations.iter().any(|x| x.feature == *name);
        s.row([name.to_string(), num(v), num(fr.min), num(fr.max), if outside { "OUT".into() } else { "WITHIN".to_string() }])?;
    }
    s.finish()
}

fn cv_predictions(a: &RunArtifacts) -> Result<String> {
    let mut s = Sheet::new(&["row", "study", "fold", "observed_nm", "predicted_nm", "residual_nm"])?;
    let mut fold_of = vec![None; a.cv.oof.len()];
    for f in &a.cv.folds {
        for &i in &f.test_rows {
            fold_of[i] = Some(f.index);
        }
    }
    for (i, (y, p)) in a.cv.observed.iter().zip(&a.cv.oof).enumerate() {
        let study = a.table.study_ids.get(i).cloned().unwrap_or_default();
        s.row([i.to_string(), study, fold_of[i].map_or("NA".into(), |f| f.to_string()), num(*y), num(*p), num(y - p)])?;
    }
    s.finish()
}

fn prediction_distribution(a: &RunArtifacts) -> Result<String> {
    let mut s = Sheet::new(&["source", "index", "value_nm"])?;
    s.row(["prediction".to_string(), "0".into(), num(a.prediction)])?;
    for (i, v) in a.distribution.realisations.iter().enumerate() {
        s.row(["bootstrap".to_string(), i.to_string(), num(*v)])?;
    }
    for (i, v) in a.cv.oof.iter().enumerate() {
        s.row(["cv_prediction".to_string(), i.to_string(), num(*v)])?;
    }
    s.finish()
}

fn metrics(a: &RunArtifacts) -> Result<String> {
    let mut s = Sheet::new(&["fold", "label", "n", "Rsquared", "RMSE", "MAE", "params"])?;
    for f in &a.cv.folds {
        s.row([
            f.index.to_string(),
            f.label.clone(),
            f.metrics.n.to_string(),
            opt(f.metrics.r2),
            num(f.metrics.rmse),
            num(f.metrics.mae),
            serde_json::to_string(&f.fitted)?,
        ])?;
    }
    let m = &a.cv.summary;
    let [r2m, r2s] = stat_fields(&m.r2);
    let [rm, rs] = stat_fields(&m.rmse);
    let [mm, ms] = stat_fields(&m.mae);
    s.row(["mean".to_string(), String::new(), String::new(), r2m, rm, mm, String::new()])?;
    s.row(["sd".to_string(), String::new(), String::new(), r2s, rs, ms, String::new()])?;
    s.finish()
}

fn coefficients(a: &RunArtifacts) -> Result<String> {
    let mut s = Sheet::new(&["term", "estimate_per_sd", "estimate_per_unit", "std_error", "t_value", "note"])?;
    if let Some(note) = &a.coefficients.note {
        s.row(["", "", "", "", "", note.as_str()])?;
    }
    for r in &a.coefficients.rows {
        s.row([r.term.clone(), num(r.estimate), num(r.per_unit), opt(r.std_error), opt(r.t_value), String::new()])?;
    }
    s.finish()
}

fn importance(a: &RunArtifacts) -> Result<String> {
    let mut s = Sheet::new(&["rank", "feature", "raw", "scaled", "method"])?;
    let method = serde_json::to_value(a.importance.method)?;
    let method = method.as_str().unwrap_or_default().to_string();
    for (i, r) in a.importance.rows.iter().enumerate() {
        s.row([(i + 1).to_string(), r.feature.clone(), num(r.raw), num(r.scaled), method.clone()])?;
    }
    s.finish()
}

fn shap(a: &RunArtifacts) -> Result<String> {
    let mut s = Sheet::new(&["instance_row", "feature", "feature_value", "phi_nm", "std_error"])?;
    let sh = &a.shap;
    for i in 0..sh.phi.nrows() {
        let row = sh.instance_rows.get(i).copied().unwrap_or(i);
        for (j, f) in sh.features.iter().enumerate() {
            let value = if row < a.table.n() { num(a.table.x.get(row, j)) } else { "NA".into() };
            s.row([row.to_string(), f.clone(), value, num(sh.phi.get(i, j)), num(sh.std_errors.get(i, j))])?;
        }
    }
    s.finish()
}

fn correlations(a: &RunArtifacts) -> Result<String> {
    let c = &a.correlations;
    let header: Vec<&str> = std::iter::once("variable").chain(c.names.iter().map(String::as_str)).collect();
    let mut s = Sheet::new(&header)?;
    for (i, name) in c.names.iter().enumerate() {
        s.row(std::iter::once(name.clone()).chain((0..c.names.len()).map(|j| num(c.r.get(i, j)))))?;
    }
    for name in &c.excluded {
        s.row(std::iter::once(name.clone()).chain(c.names.iter().map(|_| "NA".to_string())))?;
    }
    s.finish()
}
