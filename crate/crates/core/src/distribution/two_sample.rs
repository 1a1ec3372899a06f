use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyResult {
    /// The smaller of the two U statistics.
    pub u: f64,
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn need(x: &[f64], min: usize) -> Result<()> {
    match x.len() {
        0 => Err(Error::EmptySample),
        n if n < min => Err(Error::SampleSize { n, min, max: usize::MAX }),
        _ => Ok(()),
    }
}

/// Walks the pooled sorted values once, calling `f(x, next_x, F_a(x), F_b(x))`
/// at every distinct value.
fn walk_ecdfs(a: &[f64], b: &[f64], mut f: impl FnMut(f64, Option<f64>, f64, f64)) {
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    while i < sa.len() || j < sb.len() {
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        let next = match (sa.get(i), sb.get(j)) {
            (Some(&u), Some(&v)) => Some(u.min(v)),
            (Some(&u), None) => Some(u),
            (None, Some(&v)) => Some(v),
            (None, None) => None,
        };
        f(x, next, i as f64 / na, j as f64 / nb);
    }
}

/// Kolmogorov limiting distribution `Q(λ) = 2 Σ (−1)^(k−1) exp(−2k²λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    let a2 = -2.0 * lambda * lambda;
    let (mut fac, mut sum, mut previous) = (2.0, 0.0, 0.0f64);
    for k in 1..=100 {
        let term = fac * (a2 * (k * k) as f64).exp();
        sum += term;
        if term.abs() <= 1e-3 * previous || term.abs() <= 1e-10 * sum {
            return sum.clamp(0.0, 1.0);
        }
        fac = -fac;
        previous = term.abs();
    }
    // the series does not settle for λ near zero, where Q is 1
    1.0
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_test(a: &[f64], b: &[f64]) -> Result<KsResult> {
    need(a, 1)?;
    need(b, 1)?;
    let mut d = 0.0f64;
    walk_ecdfs(a, b, |_, _, fa, fb| d = d.max((fa - fb).abs()));
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let s = ne.sqrt();
    let p = if d == 0.0 { 1.0 } else { kolmogorov_q((s + 0.12 + 0.11 / s) * d) };
    Ok(KsResult { d, p })
}

/// Mann–Whitney U test with midranks, tie-corrected variance and a 0.5
/// continuity correction.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitneyResult> {
    need(a, 1)?;
    need(b, 1)?;
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = pooled.len();
    let (mut rank_sum_a, mut tie_term) = (0.0, 0.0);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        rank_sum_a += midrank * pooled[i..j].iter().filter(|e| e.1).count() as f64;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let u_a = rank_sum_a - na * (na + 1.0) / 2.0;
    let u = u_a.min(na * nb - u_a);
    let mean = na * nb / 2.0;
    let nf = n as f64;
    let var = na * nb / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)).max(1.0));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((mean - u) - 0.5) / var.sqrt();
        (2.0 * Normal::standard().sf(z)).clamp(0.0, 1.0)
    };
    Ok(MannWhitneyResult { u, p })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Unequal-variance (Welch) t test, two-sided.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    need(a, 2)?;
    need(b, 2)?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            WelchResult { t: 0.0, df, p: 1.0 }
        } else {
            WelchResult { t: (ma - mb).signum() * f64::INFINITY, df, p: 0.0 }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(WelchResult { t, df, p })
}

/// Area between the two empirical CDFs, in the samples' units.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    need(a, 1)?;
    need(b, 1)?;
    let mut area = 0.0;
    walk_ecdfs(a, b, |x, next, fa, fb| {
        if let Some(next) = next {
            area += (fa - fb).abs() * (next - x);
        }
    });
    Ok(area)
}
