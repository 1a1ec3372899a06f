//! Residual-bootstrap predictive distributions and two-sample comparisons.

mod density;
mod normality;
mod two_sample;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Seed;

pub use density::{kl_divergence, overlap_coefficient, silverman_bandwidth, KDE_GRID};
pub use normality::{shapiro_wilk, NormalityResult};
pub use two_sample::{ks_test, mann_whitney, wasserstein1, welch_t, KsResult, MannWhitneyResult, WelchResult};

/// Number of bootstrap realisations drawn for a prediction.
pub const DEFAULT_REALISATIONS: usize = 100;

/// A point prediction together with realisations `ŷ + ε*`, each `ε*`
/// drawn with replacement from a pool of out-of-fold residuals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    /// nm
    pub prediction: f64,
    /// nm
    pub realisations: Vec<f64>,
    /// Observed minus predicted, nm.
    pub residual_pool: Vec<f64>,
    pub seed: Seed,
}

impl PredictiveDistribution {
    pub fn mean(&self) -> f64 {
        self.realisations.iter().sum::<f64>() / self.realisations.len() as f64
    }

    /// Sample standard deviation; zero for a single realisation.
    pub fn sd(&self) -> f64 {
        let n = self.realisations.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.realisations.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    /// Linear-interpolated quantile of the realisations, `q` in [0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        let mut s = self.realisations.clone();
        s.sort_by(f64::total_cmp);
        let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
    }
}

/// Draws `m` realisations `yhat + ε*`, with `ε*` sampled uniformly with
/// replacement from `residual_pool`.
pub fn residual_bootstrap(yhat: f64, residual_pool: &[f64], m: usize, seed: Seed) -> Result<PredictiveDistribution> {
    if residual_pool.is_empty() {
        return Err(Error::EmptySample);
    }
    if m == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one realisation".into()));
    }
    let mut rng = seed.derive("bootstrap", 0).rng();
    let realisations = (0..m).map(|_| yhat + residual_pool[rng.random_range(0..residual_pool.len())]).collect();
    Ok(PredictiveDistribution { prediction: yhat, realisations, residual_pool: residual_pool.to_vec(), seed })
}

/// Every two-sample statistic for a "real" sample `a` and a "simulated"
/// sample `b`. Statistics whose size requirements are not met are `None`
/// and explained in `notes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistComparison {
    pub n_a: usize,
    pub n_b: usize,
    pub ks: Option<KsResult>,
    pub mwu: Option<MannWhitneyResult>,
    pub welch_t: Option<WelchResult>,
    pub ovl: Option<f64>,
    /// KL(a ‖ b).
    pub kl: Option<f64>,
    /// nm
    pub wasserstein: Option<f64>,
    pub normality_a: Option<NormalityResult>,
    pub normality_b: Option<NormalityResult>,
    pub notes: Vec<String>,
}

/// One line of the flat comparison sheet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub statistic: String,
    pub value: Option<f64>,
    pub p: Option<f64>,
    pub method: String,
}

impl DistComparison {
    pub fn rows(&self) -> Vec<ComparisonRow> {
        let row = |statistic: &str, value: Option<f64>, p: Option<f64>, method: &str| ComparisonRow {
            statistic: statistic.into(),
            value,
            p,
            method: method.into(),
        };
        vec![
            row("KS_D", self.ks.map(|r| r.d), self.ks.map(|r| r.p), "two-sample Kolmogorov-Smirnov, asymptotic p"),
            row("MWU_U", self.mwu.map(|r| r.u), self.mwu.map(|r| r.p), "Mann-Whitney U, normal approximation with tie and continuity correction"),
            row("T", self.welch_t.map(|r| r.t), self.welch_t.map(|r| r.p), "Welch unequal-variance t test"),
            row("T_DF", self.welch_t.map(|r| r.df), None, "Welch-Satterthwaite degrees of freedom"),
            row("OVL", self.ovl, None, "overlap of Gaussian KDEs, Silverman bandwidth"),
            row("KL", self.kl, None, "KL(real || simulated) on the shared KDE grid"),
            row("WASSERSTEIN", self.wasserstein, None, "1-D earth mover's distance, nm"),
            row("SHAPIRO_W_REAL", self.normality_a.map(|r| r.w), self.normality_a.map(|r| r.p), "Shapiro-Wilk on the real sample"),
            row("SHAPIRO_W_SIMULATED", self.normality_b.map(|r| r.w), self.normality_b.map(|r| r.p), "Shapiro-Wilk on the simulated sample"),
        ]
    }
}

/// Runs the whole battery; `a` is the real sample and `b` the simulated one.
pub fn compare_distributions(a: &[f64], b: &[f64]) -> Result<DistComparison> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("samples must be finite".into()));
    }
    let mut notes = Vec::new();
    fn keep<T>(notes: &mut Vec<String>, name: &str, r: Result<T>) -> Option<T> {
        r.map_err(|e| notes.push(format!("{name}: {e}"))).ok()
    }
    let ks = keep(&mut notes, "KS", ks_test(a, b));
    let mwu = keep(&mut notes, "MWU", mann_whitney(a, b));
    let welch_t = keep(&mut notes, "T", welch_t(a, b));
    let ovl = keep(&mut notes, "OVL", overlap_coefficient(a, b));
    let kl = keep(&mut notes, "KL", kl_divergence(a, b));
    let wasserstein = keep(&mut notes, "WASSERSTEIN", wasserstein1(a, b));
    let normality_a = keep(&mut notes, "SHAPIRO real", shapiro_wilk(a));
    let normality_b = keep(&mut notes, "SHAPIRO simulated", shapiro_wilk(b));
    Ok(DistComparison { n_a: a.len(), n_b: b.len(), ks, mwu, welch_t, ovl, kl, wasserstein, normality_a, normality_b, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest};
    use rand_distr::{Distribution, Normal};

    #[test]
    fn zero_pool_gives_point_mass() {
        let d = residual_bootstrap(137.5, &[0.0; 8], 100, Seed(1)).unwrap();
        assert_eq!(d.realisations, vec![137.5; 100]);
        assert_eq!(d.sd(), 0.0);
    }

    #[test]
    fn symmetric_pool_centres_on_prediction() {
        let d = residual_bootstrap(50.0, &[-1.0, 1.0], 10_000, Seed(3)).unwrap();
        assert!((d.mean() - 50.0).abs() < 3.0 / (10_000f64).sqrt());
        assert!(residual_bootstrap(1.0, &[], 10, Seed(1)).is_err());
        assert!(residual_bootstrap(1.0, &[1.0], 0, Seed(1)).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let d = PredictiveDistribution { prediction: 0.0, realisations: vec![4.0, 1.0, 3.0, 2.0], residual_pool: vec![0.0], seed: Seed(0) };
        assert_eq!(d.quantile(0.0), 1.0);
        assert_eq!(d.quantile(1.0), 4.0);
        assert_eq!(d.quantile(0.5), 2.5);
    }

    proptest! {
        #[test]
        fn realisations_are_prediction_plus_pool_member(
            yhat in -500.0f64..500.0,
            pool in prop::collection::vec(-100.0f64..100.0, 1..40),
            m in 1usize..200,
            seed in any::<u64>(),
        ) {
            let d = residual_bootstrap(yhat, &pool, m, Seed(seed)).unwrap();
            prop_assert_eq!(d.realisations.len(), m);
            // recompute the draws and check each realisation bit for bit
            let mut rng = Seed(seed).derive("bootstrap", 0).rng();
            for r in &d.realisations {
                let e = pool[rng.random_range(0..pool.len())];
                prop_assert_eq!(r.to_bits(), (yhat + e).to_bits());
                prop_assert!(pool.iter().any(|p| (yhat + p).to_bits() == r.to_bits()));
            }
            prop_assert_eq!(&d, &residual_bootstrap(yhat, &pool, m, Seed(seed)).unwrap());
        }
    }

    #[test]
    fn identical_samples() {
        let a: Vec<f64> = (0..60).map(|i| 100.0 + (i as f64 * 1.7).sin() * 20.0).collect();
        let c = compare_distributions(&a, &a).unwrap();
        assert_eq!(c.ks.unwrap().d, 0.0);
        assert_eq!(c.ks.unwrap().p, 1.0);
        assert!(c.ovl.unwrap() >= 0.98);
        assert!(c.kl.unwrap() <= 0.02);
        assert_eq!(c.wasserstein, Some(0.0));
        assert_eq!(c.welch_t.unwrap().p, 1.0);
        assert!(c.notes.is_empty());
    }

    #[test]
    fn shifted_samples_are_told_apart() {
        let mut rng = Seed(5).rng();
        let n = Normal::new(120.0, 15.0).unwrap();
        let b: Vec<f64> = (0..80).map(|_| n.sample(&mut rng)).collect();
        let a: Vec<f64> = b.iter().map(|v| v + 1000.0).collect();
        let c = compare_distributions(&a, &b).unwrap();
        assert!(c.ks.unwrap().p < 0.05 && c.mwu.unwrap().p < 0.05 && c.welch_t.unwrap().p < 0.05);
        assert!(c.ovl.unwrap() < 0.01);
        assert!((c.wasserstein.unwrap() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn small_samples_report_missing_statistics() {
        let c = compare_distributions(&[1.0], &[2.0, 3.0, 4.5]).unwrap();
        assert!(c.ks.is_some() && c.wasserstein.is_some() && c.mwu.is_some());
        assert!(c.welch_t.is_none() && c.ovl.is_none() && c.kl.is_none() && c.normality_a.is_none());
        assert!(c.normality_b.is_some());
        assert_eq!(c.notes.len(), 4);
        assert!(compare_distributions(&[], &[]).is_err());
        let rows = c.rows();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.p.is_none_or(|p| (0.0..=1.0).contains(&p))));
    }
}
