use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Missing when the observed values are all identical.
    pub r2: Option<f64>,
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
}

/// R², RMSE and MAE of `yhat` against `y`.
pub fn metrics(y: &[f64], yhat: &[f64]) -> Result<Metrics> {
    if y.len() != yhat.len() {
        return Err(Error::InvalidInput(format!("{} observations but {} predictions", y.len(), yhat.len())));
    }
    if y.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    let mae = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    Ok(Metrics {
        r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
        rmse: (ss_res / n).sqrt(),
        mae,
        n: y.len(),
    })
}

/// Mean and sample standard deviation (n − 1) of one metric across folds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    #[serde(with = "crate::serde_float::scalar")]
    pub mean: f64,
    /// NaN with fewer than two values.
    #[serde(with = "crate::serde_float::scalar")]
    pub sd: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat { mean: f64::NAN, sd: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            f64::NAN
        };
        Stat { mean, sd, n }
    }

    /// `"mean ± sd"` with the given number of decimals.
    pub fn display(&self, decimals: usize) -> String {
        if self.sd.is_nan() {
            format!("{:.*}", decimals, self.mean)
        } else {
            format!("{:.*} ± {:.*}", decimals, self.mean, decimals, self.sd)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub r2: Stat,
    pub rmse: Stat,
    pub mae: Stat,
    pub folds: usize,
    /// Folds whose R² was undefined and left out of `r2`.
    pub r2_missing: usize,
}

pub fn summarize(folds: &[Metrics]) -> MetricsSummary {
    let r2: Vec<f64> = folds.iter().filter_map(|m| m.r2).collect();
    let rmse: Vec<f64> = folds.iter().map(|m| m.rmse).collect();
    let mae: Vec<f64> = folds.iter().map(|m| m.mae).collect();
    MetricsSummary {
        r2: Stat::of(&r2),
        rmse: Stat::of(&rmse),
        mae: Stat::of(&mae),
        folds: folds.len(),
        r2_missing: folds.len() - r2.len(),
    }
}
