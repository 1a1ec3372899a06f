use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Ordinary least squares fit with coefficient standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    #[serde(with = "crate::serde_float::scalar")]
    pub intercept_se: f64,
    /// NaN when the residual degrees of freedom are zero or the design is
    /// rank deficient.
    #[serde(with = "crate::serde_float::vec")]
    pub std_errors: Vec<f64>,
    #[serde(with = "crate::serde_float::vec")]
    pub t_values: Vec<f64>,
    pub rank: usize,
    pub df_residual: usize,
}

impl LinearFit {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.coefficients.len()
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }
}

pub(crate) fn column_means(x: &Matrix) -> Vec<f64> {
    let n = x.nrows() as f64;
    let mut m = vec![0.0; x.ncols()];
    for row in x.rows() {
        for (acc, v) in m.iter_mut().zip(row) {
            *acc += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// Least squares via a singular value decomposition of the centred design.
/// A rank-deficient design falls back to the minimum-norm solution.
pub fn fit_linear(x: &Matrix, y: &[f64]) -> Result<LinearFit> {
    let (n, p) = (x.nrows(), x.ncols());
    if n == 0 || y.len() != n {
        return Err(Error::InvalidInput(format!("linear fit needs matching non-empty inputs ({n} rows, {} targets)", y.len())));
    }
    let x_mean = column_means(x);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let (beta, rank, inv_gram) = if p == 0 {
        (DVector::zeros(0), 0, Some(DMatrix::zeros(0, 0)))
    } else {
        let svd = xc.clone().svd(true, true);
        let (u, v_t) = (svd.u.as_ref().expect("u requested"), svd.v_t.as_ref().expect("v_t requested"));
        let s = &svd.singular_values;
        let s_max = s.iter().cloned().fold(0.0, f64::max);
        let tol = s_max * (n.max(p) as f64) * f64::EPSILON;
        let rank = s.iter().filter(|&&v| v > tol).count();
        let uty = u.transpose() * &yc;
        let mut w = DVector::zeros(s.len());
        for k in 0..s.len() {
            if s[k] > tol {
                w[k] = uty[k] / s[k];
            }
        }
        let beta = v_t.transpose() * w;
        let inv_gram = (rank == p).then(|| {
            let mut d = DMatrix::zeros(s.len(), s.len());
            for k in 0..s.len() {
                d[(k, k)] = 1.0 / (s[k] * s[k]);
            }
            v_t.transpose() * d * v_t
        });
        (beta, rank, inv_gram)
    };
    if rank < p {
        log::warn!("rank-deficient linear design (rank {rank} < {p}); using the minimum-norm solution");
    }

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    let rss: f64 = (0..n)
        .map(|i| {
            let fit = intercept + x.row(i).iter().zip(&coefficients).map(|(a, b)| a * b).sum::<f64>();
            (y[i] - fit).powi(2)
        })
        .sum();
    let df_residual = n.saturating_sub(rank + 1);
    let sigma2 = if df_residual > 0 { rss / df_residual as f64 } else { f64::NAN };

    let (std_errors, intercept_se) = match &inv_gram {
        Some(g) => {
            let se: Vec<f64> = (0..p).map(|j| (sigma2 * g[(j, j)]).sqrt()).collect();
            let xm = DVector::from_column_slice(&x_mean);
            let quad = (xm.transpose() * g * &xm)[(0, 0)];
            (se, (sigma2 * (1.0 / n as f64 + quad)).sqrt())
        }
        None => (vec![f64::NAN; p], f64::NAN),
    };
    let t_values = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| if *b == 0.0 { 0.0 } else { b / se })
        .collect();
    Ok(LinearFit { intercept, coefficients, intercept_se, std_errors, t_values, rank, df_residual })
}
