use serde::{Deserialize, Serialize};

use super::linear::column_means;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const CONVERGENCE_TOL: f64 = 1e-7;
pub const MAX_SWEEPS: usize = 100_000;
/// Floor on the mixing parameter when computing the largest useful penalty.
pub const ALPHA_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetFit {
    pub alpha: f64,
    pub lambda: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
}

impl ElasticNetFit {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }
}

struct Centered {
    cols: Vec<Vec<f64>>,
    x_mean: Vec<f64>,
    y_mean: f64,
    yc: Vec<f64>,
    col_sq: Vec<f64>,
}

fn center(x: &Matrix, y: &[f64]) -> Result<Centered> {
    let n = x.nrows();
    if n == 0 || y.len() != n {
        return Err(Error::InvalidInput("elastic net needs matching non-empty inputs".into()));
    }
    let x_mean = column_means(x);
    let cols: Vec<Vec<f64>> = (0..x.ncols()).map(|j| (0..n).map(|i| x.get(i, j) - x_mean[j]).collect()).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc = y.iter().map(|v| v - y_mean).collect();
    let col_sq = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n as f64).collect();
    Ok(Centered { cols, x_mean, y_mean, yc, col_sq })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest penalty at which every slope is zero (for `alpha` ≥ 10⁻³):
/// `max_j |⟨x_j, y − ȳ⟩| / (n · max(alpha, 10⁻³))` on centred columns.
pub fn lambda_max(x: &Matrix, y: &[f64], alpha: f64) -> Result<f64> {
    let c = center(x, y)?;
    let n = y.len() as f64;
    let m = c.cols.iter().map(|col| dot(col, &c.yc).abs()).fold(0.0, f64::max);
    Ok(m / (n * alpha.max(ALPHA_FLOOR)))
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

fn descend(c: &Centered, alpha: f64, lambda: f64, beta: &mut [f64], resid: &mut [f64]) -> Result<usize> {
    let n = c.yc.len() as f64;
    let l1 = lambda * alpha;
    let l2 = lambda * (1.0 - alpha);
    for sweep in 1..=MAX_SWEEPS {
        let mut max_delta: f64 = 0.0;
        for j in 0..beta.len() {
            let denom = c.col_sq[j] + l2;
            if denom <= 0.0 {
                continue;
            }
            let col = &c.cols[j];
            let old = beta[j];
            let rho = dot(col, resid) / n + c.col_sq[j] * old;
            let new = soft_threshold(rho, l1) / denom;
            if new != old {
                let d = new - old;
                for (r, x) in resid.iter_mut().zip(col) {
                    *r -= x * d;
                }
                beta[j] = new;
                max_delta = max_delta.max(d.abs());
            }
        }
        if max_delta < CONVERGENCE_TOL {
            return Ok(sweep);
        }
    }
    Err(Error::NonConvergence { learner: "elastic net", iterations: MAX_SWEEPS })
}

fn validate(alpha: f64, lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) || lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidInput(format!("elastic net needs alpha in [0,1] and lambda >= 0, got {alpha}, {lambda}")));
    }
    Ok(())
}

/// Cyclic coordinate descent on
/// `(1/2n)‖y − β₀ − Xβ‖² + λ(α‖β‖₁ + (1−α)‖β‖²/2)`, intercept unpenalized.
pub fn fit_elastic_net(x: &Matrix, y: &[f64], alpha: f64, lambda: f64) -> Result<ElasticNetFit> {
    validate(alpha, lambda)?;
    let c = center(x, y)?;
    let mut beta = vec![0.0; x.ncols()];
    let mut resid = c.yc.clone();
    let sweeps = descend(&c, alpha, lambda, &mut beta, &mut resid)?;
    Ok(finish(&c, alpha, lambda, beta, sweeps))
}

/// Fits a sequence of penalties for one `alpha`, warm-starting each from the
/// previous solution. Results are returned in the order given.
pub fn fit_elastic_net_path(x: &Matrix, y: &[f64], alpha: f64, lambdas: &[f64]) -> Result<Vec<ElasticNetFit>> {
    let c = center(x, y)?;
    let mut beta = vec![0.0; x.ncols()];
    let mut resid = c.yc.clone();
    lambdas
        .iter()
        .map(|&lambda| {
            validate(alpha, lambda)?;
            let sweeps = descend(&c, alpha, lambda, &mut beta, &mut resid)?;
            Ok(finish(&c, alpha, lambda, beta.clone(), sweeps))
        })
        .collect()
}

fn finish(c: &Centered, alpha: f64, lambda: f64, coefficients: Vec<f64>, sweeps: usize) -> ElasticNetFit {
    let intercept = c.y_mean - coefficients.iter().zip(&c.x_mean).map(|(b, m)| b * m).sum::<f64>();
    ElasticNetFit { alpha, lambda, intercept, coefficients, sweeps }
}
