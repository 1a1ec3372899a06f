use crate::error::{Error, Result};

/// Points on the shared density grid.
pub const KDE_GRID: usize = 512;

const DENSITY_FLOOR: f64 = 1e-12;

/// Silverman's rule of thumb, `0.9 · min(sd, IQR/1.34) · n^(−1/5)`, floored
/// at `1e-6 · scale` for degenerate samples.
pub fn silverman_bandwidth(x: &[f64], scale: f64) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let quantile = |q: f64| {
        let pos = q * (s.len() - 1) as f64;
        let lo = pos.floor() as usize;
        s[lo] + (s[(lo + 1).min(s.len() - 1)] - s[lo]) * (pos - lo as f64)
    };
    let iqr = quantile(0.75) - quantile(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * n.powf(-0.2)).max(1e-6 * scale)
}

struct SharedGrid {
    step: f64,
    fa: Vec<f64>,
    fb: Vec<f64>,
}

fn kde(x: &[f64], h: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (x.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&g| {
            x.iter()
                .map(|&v| {
                    let z = (g - v) / h;
                    if z.abs() > 40.0 { 0.0 } else { (-0.5 * z * z).exp() }
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

fn shared_grid(a: &[f64], b: &[f64]) -> Result<SharedGrid> {
    for x in [a, b] {
        if x.len() < 2 {
            return Err(Error::SampleSize { n: x.len(), min: 2, max: usize::MAX });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("samples must be finite".into()));
        }
    }
    let (lo, hi) = a.iter().chain(b).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let scale = if hi > lo { hi - lo } else { 1.0 };
    let (ha, hb) = (silverman_bandwidth(a, scale), silverman_bandwidth(b, scale));
    let pad = 3.0 * ha.max(hb);
    let (start, end) = (lo - pad, hi + pad);
    let step = (end - start) / (KDE_GRID - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID).map(|k| start + step * k as f64).collect();
    Ok(SharedGrid { step, fa: kde(a, ha, &grid), fb: kde(b, hb, &grid) })
}

fn trapezoid(f: impl Iterator<Item = f64>, step: f64) -> f64 {
    let v: Vec<f64> = f.collect();
    let inner: f64 = v.iter().sum();
    (inner - 0.5 * (v[0] + v[v.len() - 1])) * step
}

/// Area under the pointwise minimum of the two samples' kernel density
/// estimates.
pub fn overlap_coefficient(a: &[f64], b: &[f64]) -> Result<f64> {
    let g = shared_grid(a, b)?;
    Ok(trapezoid(g.fa.iter().zip(&g.fb).map(|(x, y)| x.min(*y)), g.step).clamp(0.0, 1.0))
}

/// KL(a ‖ b) between the two samples' kernel density estimates on the
/// shared grid, each density floored and renormalized to unit mass.
pub fn kl_divergence(a: &[f64], b: &[f64]) -> Result<f64> {
    let g = shared_grid(a, b)?;
    let normalize = |f: Vec<f64>| {
        let f: Vec<f64> = f.into_iter().map(|v| v.max(DENSITY_FLOOR)).collect();
        let mass = f.iter().sum::<f64>() * g.step;
        f.into_iter().map(|v| v / mass).collect::<Vec<f64>>()
    };
    let (fa, fb) = (normalize(g.fa.clone()), normalize(g.fb.clone()));
    let kl: f64 = fa.iter().zip(&fb).map(|(p, q)| p * (p / q).ln()).sum::<f64>() * g.step;
    Ok(kl.max(0.0))
}
