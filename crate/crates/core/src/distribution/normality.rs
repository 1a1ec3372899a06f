use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityResult {
    pub w: f64,
    pub p: f64,
    pub n: usize,
}

const MIN_N: usize = 3;
const MAX_N: usize = 5000;

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Royston's approximation to the Shapiro–Wilk coefficients, for the upper
/// half of the order statistics (largest first is index 0).
fn coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let std = Normal::standard();
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> = (1..=half).map(|i| -std.inverse_cdf((i as f64 - 0.375) / an25)).collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = m[0] / ssumm2 + poly(&[0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056], rsn);
    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first_free, fac) = if n > 5 {
        let a2 = m[1] / ssumm2 + poly(&[0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633], rsn);
        a[1] = a2;
        (2, ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt())
    } else {
        (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
    };
    for i in first_free..half {
        a[i] = m[i] / fac;
    }
    a
}

/// Shapiro–Wilk W statistic and p value, valid for 3 ≤ n ≤ 5000.
pub fn shapiro_wilk(x: &[f64]) -> Result<NormalityResult> {
    let n = x.len();
    if !(MIN_N..=MAX_N).contains(&n) {
        return Err(Error::SampleSize { n, min: MIN_N, max: MAX_N });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("Shapiro-Wilk needs finite values".into()));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let range = s[n - 1] - s[0];
    if range <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mean = s.iter().sum::<f64>() / n as f64;
    let ss: f64 = s.iter().map(|v| ((v - mean) / range).powi(2)).sum();
    let a = coefficients(n);
    let numerator: f64 = a.iter().enumerate().map(|(i, c)| c * (s[n - 1 - i] - s[i]) / range).sum();
    let w = (numerator * numerator / ss).min(1.0);

    if n == 3 {
        let p = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - (0.75f64).sqrt().asin());
        return Ok(NormalityResult { w, p: p.clamp(0.0, 1.0), n });
    }
    let nf = n as f64;
    let mut y = (1.0 - w).ln();
    let (mu, sigma) = if n <= 11 {
        let gamma = poly(&[-2.273, 0.459], nf);
        if y >= gamma {
            return Ok(NormalityResult { w, p: 0.0, n });
        }
        y = -(gamma - y).ln();
        (poly(&[0.544, -0.39978, 0.025054, -6.714e-4], nf), poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp())
    } else {
        let ln_n = nf.ln();
        (poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n), poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp())
    };
    let p = Normal::new(mu, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?.sf(y);
    Ok(NormalityResult { w, p: p.clamp(0.0, 1.0), n })
}
