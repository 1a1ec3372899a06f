//! Regression learners behind one fit/predict contract.
//!
//! Every [`TrainedModel`] carries the normalization recipe fitted on its
//! training rows, so callers always pass raw feature rows to `predict`.

mod elastic_net;
mod forest;
mod knn;
mod linear;
mod mars;
mod split;
mod svr;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{fit_recipe, NormalizationRecipe};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::Seed;

pub use elastic_net::{fit_elastic_net, fit_elastic_net_path, lambda_max, ElasticNetFit};
pub use forest::{fit_forest, fit_forest_sizes, ForestFit};
pub use knn::{fit_knn, KnnFit};
pub use linear::{fit_linear, LinearFit};
pub use mars::{fit_mars, fit_mars_prunings, gcv, Hinge, MarsFit, Term};
pub use split::{Node, RegressionTree};
pub use svr::{estimate_sigma, fit_svr, fit_svr_standardized, rbf, SvrFit};
pub use tree::{fit_tree, fit_tree_with, TreeControl, TreeFit};

pub const FOREST_TREES: usize = 500;
pub const SVR_EPSILON: f64 = svr::DEFAULT_EPSILON;
const LAMBDA_STEPS: usize = 25;
const LAMBDA_MIN_RATIO: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    Linear,
    ElasticNet,
    Tree,
    Forest,
    SvrRbf,
    Knn,
    Mars,
}

impl ModelKind {
    /// All kinds, in the order they are listed to users.
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Linear,
        ModelKind::ElasticNet,
        ModelKind::Forest,
        ModelKind::SvrRbf,
        ModelKind::Tree,
        ModelKind::Knn,
        ModelKind::Mars,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "LINEAR",
            ModelKind::ElasticNet => "ELASTIC_NET",
            ModelKind::Tree => "TREE",
            ModelKind::Forest => "FOREST",
            ModelKind::SvrRbf => "SVR_RBF",
            ModelKind::Knn => "KNN",
            ModelKind::Mars => "MARS",
        }
    }

    /// Whether predictions are confined to the training target range.
    pub fn is_bounded(self) -> bool {
        matches!(self, ModelKind::Tree | ModelKind::Forest | ModelKind::Knn)
    }

    pub fn has_coefficients(self) -> bool {
        matches!(self, ModelKind::Linear | ModelKind::ElasticNet)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace(['-', ' '], "_");
        Ok(match key.as_str() {
            "LINEAR" | "LM" | "OLS" => ModelKind::Linear,
            "ELASTIC_NET" | "ELASTICNET" | "GLMNET" | "ENET" => ModelKind::ElasticNet,
            "TREE" | "RPART" | "CART" => ModelKind::Tree,
            "FOREST" | "RF" | "RANGER" | "RANDOM_FOREST" => ModelKind::Forest,
            "SVR_RBF" | "SVR" | "SVM" | "SVM_RADIAL" => ModelKind::SvrRbf,
            "KNN" => ModelKind::Knn,
            "MARS" | "EARTH" => ModelKind::Mars,
            _ => return Err(Error::InvalidInput(format!("unknown model kind '{s}'"))),
        })
    }
}

/// Penalty of an elastic-net grid point: either a fraction of the split's
/// own `λ_max` or an absolute value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    FractionOfMax(f64),
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma {
    /// Estimated from the training rows the model is fitted on.
    Estimate,
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HyperParams {
    Linear,
    ElasticNet { alpha: f64, lambda: Lambda },
    Tree { cp: f64 },
    Forest { mtry: usize, min_node_size: usize, n_trees: usize },
    SvrRbf { sigma: Sigma, cost: f64, epsilon: f64 },
    Knn { k: usize },
    Mars { degree: usize, nprune: usize },
}

impl HyperParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            HyperParams::Linear => ModelKind::Linear,
            HyperParams::ElasticNet { .. } => ModelKind::ElasticNet,
            HyperParams::Tree { .. } => ModelKind::Tree,
            HyperParams::Forest { .. } => ModelKind::Forest,
            HyperParams::SvrRbf { .. } => ModelKind::SvrRbf,
            HyperParams::Knn { .. } => ModelKind::Knn,
            HyperParams::Mars { .. } => ModelKind::Mars,
        }
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperParams::Linear => write!(f, "none"),
            HyperParams::ElasticNet { alpha, lambda: Lambda::Value(l) } => write!(f, "alpha={alpha}, lambda={l}"),
            HyperParams::ElasticNet { alpha, lambda: Lambda::FractionOfMax(r) } => {
                write!(f, "alpha={alpha}, lambda={r}*lambda_max")
            }
            HyperParams::Tree { cp } => write!(f, "cp={cp}"),
            HyperParams::Forest { mtry, min_node_size, n_trees } => {
                write!(f, "mtry={mtry}, min_node_size={min_node_size}, trees={n_trees}")
            }
            HyperParams::SvrRbf { sigma: Sigma::Value(s), cost, epsilon } => write!(f, "sigma={s}, C={cost}, epsilon={epsilon}"),
            HyperParams::SvrRbf { sigma: Sigma::Estimate, cost, epsilon } => write!(f, "sigma=estimated, C={cost}, epsilon={epsilon}"),
            HyperParams::Knn { k } => write!(f, "k={k}"),
            HyperParams::Mars { degree, nprune } => write!(f, "degree={degree}, nprune={nprune}"),
        }
    }
}

fn log_spaced(lo_exp: f64, hi_exp: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|k| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / (steps - 1) as f64)).collect()
}

/// Tuning grid for `kind` over `p` candidate features, in tie-break order.
pub fn default_grid(kind: ModelKind, p: usize) -> Vec<HyperParams> {
    let p = p.max(1);
    match kind {
        ModelKind::Linear => vec![HyperParams::Linear],
        ModelKind::ElasticNet => {
            let ratios = log_spaced(0.0, LAMBDA_MIN_RATIO.log10(), LAMBDA_STEPS);
            [0.0, 0.25, 0.5, 0.75, 1.0]
                .into_iter()
                .flat_map(|alpha| ratios.iter().map(move |&r| HyperParams::ElasticNet { alpha, lambda: Lambda::FractionOfMax(r) }))
                .collect()
        }
        ModelKind::Tree => log_spaced(-4.0, -1.0, 10).into_iter().map(|cp| HyperParams::Tree { cp }).collect(),
        ModelKind::Forest => (1..=p)
            .flat_map(|mtry| [1, 5, 10].map(|min_node_size| HyperParams::Forest { mtry, min_node_size, n_trees: FOREST_TREES }))
            .collect(),
        ModelKind::SvrRbf => [0.25, 0.5, 1.0, 2.0, 4.0]
            .into_iter()
            .map(|cost| HyperParams::SvrRbf { sigma: Sigma::Estimate, cost, epsilon: SVR_EPSILON })
            .collect(),
        ModelKind::Knn => [3, 5, 7, 9, 11].into_iter().map(|k| HyperParams::Knn { k }).collect(),
        ModelKind::Mars => [1, 2]
            .into_iter()
            .flat_map(|degree| [5, 10, 15, 20, 25].map(|nprune| HyperParams::Mars { degree, nprune }))
            .collect(),
    }
}

/// Fitted state of one learner, in recipe space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "fit", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelState {
    Linear(LinearFit),
    ElasticNet(ElasticNetFit),
    Tree(TreeFit),
    Forest(ForestFit),
    SvrRbf(SvrFit),
    Knn(KnnFit),
    Mars(MarsFit),
}

impl ModelState {
    #[inline]
    fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            ModelState::Linear(m) => m.predict_row(row),
            ModelState::ElasticNet(m) => m.predict_row(row),
            ModelState::Tree(m) => m.predict_row(row),
            ModelState::Forest(m) => m.predict_row(row),
            ModelState::SvrRbf(m) => m.predict_row(row),
            ModelState::Knn(m) => m.predict_row(row),
            ModelState::Mars(m) => m.predict_row(row),
        }
    }

    fn predict(&self, z: &Matrix) -> Vec<f64> {
        match self {
            ModelState::Forest(m) => m.predict(z),
            _ => z.rows().map(|r| self.predict_row(r)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    /// Concrete hyperparameters (penalties and kernel widths resolved).
    pub params: HyperParams,
    /// Raw feature layout expected by [`TrainedModel::predict`].
    pub feature_names: Vec<String>,
    pub recipe: NormalizationRecipe,
    pub state: ModelState,
    pub y_min: f64,
    pub y_max: f64,
    pub seed: Seed,
}

impl TrainedModel {
    /// Predictions for raw rows laid out as `feature_names`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.ncols() != self.feature_names.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} feature columns, got {}",
                self.feature_names.len(),
                x.ncols()
            )));
        }
        Ok(self.state.predict(&self.recipe.transform(x)?))
    }

    /// Predictions for raw rows in an arbitrary named layout containing
    /// every feature the model kept.
    pub fn predict_named(&self, names: &[String], x: &Matrix) -> Result<Vec<f64>> {
        let z = crate::dataset::apply_recipe(&self.recipe, names, x)?;
        Ok(self.state.predict(&z))
    }

    #[inline]
    pub fn predict_row(&self, raw: &[f64]) -> f64 {
        self.state.predict_row(&self.recipe.transform_row(raw))
    }

    /// Names of the features the model actually uses.
    pub fn kept_features(&self) -> &[String] {
        &self.recipe.kept
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

struct Prepared<'a> {
    recipe: NormalizationRecipe,
    z: Matrix,
    names: &'a [String],
    y: &'a [f64],
    y_min: f64,
    y_max: f64,
    seed: Seed,
}

impl Prepared<'_> {
    fn model(&self, params: HyperParams, state: ModelState) -> TrainedModel {
        TrainedModel {
            kind: params.kind(),
            params,
            feature_names: self.names.to_vec(),
            recipe: self.recipe.clone(),
            state,
            y_min: self.y_min,
            y_max: self.y_max,
            seed: self.seed,
        }
    }
}

fn prepare<'a>(x: &Matrix, names: &'a [String], y: &'a [f64], seed: Seed) -> Result<Prepared<'a>> {
    if y.len() != x.nrows() {
        return Err(Error::InvalidInput(format!("{} targets for {} rows", y.len(), x.nrows())));
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite target {bad}")));
    }
    let recipe = fit_recipe(x, names)?;
    let z = recipe.transform(x)?;
    let (y_min, y_max) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Ok(Prepared { recipe, z, names, y, y_min, y_max, seed })
}

/// Fits one learner on raw rows: the recipe is estimated on these rows only.
pub fn fit(params: &HyperParams, x: &Matrix, names: &[String], y: &[f64], seed: Seed) -> Result<TrainedModel> {
    fit_many(std::slice::from_ref(params), x, names, y, seed)
        .pop()
        .expect("one result per grid point")
}

/// Fits every grid point on the same rows, sharing work where the learners
/// allow it (regularization paths, kernel matrices, forward passes). The
/// result is aligned with `params` and identical to fitting each point alone.
pub fn fit_many(params: &[HyperParams], x: &Matrix, names: &[String], y: &[f64], seed: Seed) -> Vec<Result<TrainedModel>> {
    let prep = match prepare(x, names, y, seed) {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            let code = e.code();
            let mut out = vec![Err(e)];
            out.extend((1..params.len()).map(|_| Err(clone_error(code, &msg))));
            out.truncate(params.len());
            return out;
        }
    };
    let mut out: Vec<Option<Result<TrainedModel>>> = (0..params.len()).map(|_| None).collect();

    // elastic net: one warm-started path per alpha, penalties in descending order
    let mut by_alpha: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    // svr: one kernel matrix per (sigma, epsilon)
    let mut by_kernel: BTreeMap<(Option<u64>, u64), Vec<usize>> = BTreeMap::new();
    // mars: one forward pass per degree
    let mut by_degree: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    // forest: one set of trees per (mtry, n_trees), truncated per node size
    let mut by_forest: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, p) in params.iter().enumerate() {
        match *p {
            HyperParams::ElasticNet { alpha, .. } => by_alpha.entry(alpha.to_bits()).or_default().push(i),
            HyperParams::SvrRbf { sigma, epsilon, .. } => {
                let s = match sigma {
                    Sigma::Estimate => None,
                    Sigma::Value(v) => Some(v.to_bits()),
                };
                by_kernel.entry((s, epsilon.to_bits())).or_default().push(i);
            }
            HyperParams::Mars { degree, .. } => by_degree.entry(degree).or_default().push(i),
            HyperParams::Forest { mtry, n_trees, .. } => by_forest.entry((mtry.min(prep.z.ncols()), n_trees)).or_default().push(i),
            _ => out[i] = Some(fit_single(&prep, p)),
        }
    }
    for (alpha_bits, idx) in by_alpha {
        for (i, r) in fit_enet_group(&prep, f64::from_bits(alpha_bits), &idx, params) {
            out[i] = Some(r);
        }
    }
    for ((sigma_bits, eps_bits), idx) in by_kernel {
        for (i, r) in fit_svr_group(&prep, sigma_bits.map(f64::from_bits), f64::from_bits(eps_bits), &idx, params) {
            out[i] = Some(r);
        }
    }
    for (degree, idx) in by_degree {
        let nprunes: Vec<usize> = idx
            .iter()
            .map(|&i| match params[i] {
                HyperParams::Mars { nprune, .. } => nprune,
                _ => unreachable!("grouped by kind"),
            })
            .collect();
        match fit_mars_prunings(&prep.z, prep.y, degree, &nprunes) {
            Ok(fits) => {
                for (&i, f) in idx.iter().zip(fits) {
                    out[i] = Some(Ok(prep.model(params[i], ModelState::Mars(f))));
                }
            }
            Err(e) => {
                let (code, msg) = (e.code(), e.to_string());
                for &i in &idx {
                    out[i] = Some(Err(clone_error(code, &msg)));
                }
            }
        }
    }
    for ((mtry, n_trees), idx) in by_forest {
        let sizes: Vec<usize> = idx
            .iter()
            .map(|&i| match params[i] {
                HyperParams::Forest { min_node_size, .. } => min_node_size,
                _ => unreachable!("grouped by kind"),
            })
            .collect();
        match fit_forest_sizes(&prep.z, prep.y, mtry, &sizes, n_trees, prep.seed.derive("forest", 0)) {
            Ok(fits) => {
                for ((&i, f), min_node_size) in idx.iter().zip(fits).zip(sizes) {
                    out[i] = Some(Ok(prep.model(HyperParams::Forest { mtry, min_node_size, n_trees }, ModelState::Forest(f))));
                }
            }
            Err(e) => {
                let (code, msg) = (e.code(), e.to_string());
                for &i in &idx {
                    out[i] = Some(Err(clone_error(code, &msg)));
                }
            }
        }
    }
    out.into_iter().map(|r| r.expect("every grid point fitted")).collect()
}

fn clone_error(code: &str, msg: &str) -> Error {
    match code {
        "all_zero_variance" => Error::AllZeroVariance,
        _ => Error::InvalidInput(msg.to_string()),
    }
}

fn fit_single(prep: &Prepared, params: &HyperParams) -> Result<TrainedModel> {
    let (z, y) = (&prep.z, prep.y);
    let state = match *params {
        HyperParams::Linear => ModelState::Linear(fit_linear(z, y)?),
        HyperParams::Tree { cp } => ModelState::Tree(fit_tree(z, y, cp)?),
        HyperParams::Knn { k } => ModelState::Knn(fit_knn(z, y, k.min(z.nrows()))?),
        _ => unreachable!("grouped learners are fitted elsewhere"),
    };
    let params = match (*params, &state) {
        (HyperParams::Knn { .. }, ModelState::Knn(f)) => HyperParams::Knn { k: f.k },
        (p, _) => p,
    };
    Ok(prep.model(params, state))
}

fn fit_enet_group(prep: &Prepared, alpha: f64, idx: &[usize], params: &[HyperParams]) -> Vec<(usize, Result<TrainedModel>)> {
    let lmax = match lambda_max(&prep.z, prep.y, alpha) {
        Ok(v) => v,
        Err(e) => {
            let (code, msg) = (e.code(), e.to_string());
            return idx.iter().map(|&i| (i, Err(clone_error(code, &msg)))).collect();
        }
    };
    let mut lambdas: Vec<(usize, f64)> = idx
        .iter()
        .map(|&i| match params[i] {
            HyperParams::ElasticNet { lambda: Lambda::FractionOfMax(r), .. } => (i, r * lmax),
            HyperParams::ElasticNet { lambda: Lambda::Value(v), .. } => (i, v),
            _ => unreachable!("grouped by kind"),
        })
        .collect();
    lambdas.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let path: Vec<f64> = lambdas.iter().map(|l| l.1).collect();
    match fit_elastic_net_path(&prep.z, prep.y, alpha, &path) {
        Ok(fits) => lambdas
            .iter()
            .zip(fits)
            .map(|(&(i, lambda), f)| (i, Ok(prep.model(HyperParams::ElasticNet { alpha, lambda: Lambda::Value(lambda) }, ModelState::ElasticNet(f)))))
            .collect(),
        Err(e) => {
            let (code, msg) = (e.code(), e.to_string());
            idx.iter().map(|&i| (i, Err(clone_error(code, &msg)))).collect()
        }
    }
}

fn fit_svr_group(prep: &Prepared, sigma: Option<f64>, epsilon: f64, idx: &[usize], params: &[HyperParams]) -> Vec<(usize, Result<TrainedModel>)> {
    let sigma = match sigma {
        Some(s) => Ok(s),
        None => estimate_sigma(&prep.z, prep.seed.derive("sigma", 0)),
    };
    let costs: Vec<f64> = idx
        .iter()
        .map(|&i| match params[i] {
            HyperParams::SvrRbf { cost, .. } => cost,
            _ => unreachable!("grouped by kind"),
        })
        .collect();
    let fits = sigma.and_then(|s| fit_svr_standardized(&prep.z, prep.y, s, &costs, epsilon));
    match fits {
        Ok(fits) => idx
            .iter()
            .zip(fits)
            .map(|(&i, f)| {
                let p = HyperParams::SvrRbf { sigma: Sigma::Value(f.sigma), cost: f.cost, epsilon };
                (i, Ok(prep.model(p, ModelState::SvrRbf(f))))
            })
            .collect(),
        Err(e) => {
            let (code, msg) = (e.code(), e.to_string());
            idx.iter().map(|&i| (i, Err(clone_error(code, &msg)))).collect()
        }
    }
}
