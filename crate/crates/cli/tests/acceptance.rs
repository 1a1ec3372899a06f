//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Run with `cargo test -p spindle-cli --test acceptance -- --nocapture` to
//! see the lines as they are produced.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use spindle_core::dataset::{generate_synthetic, polymer_subset, StudyRecord, SynthConfig, SYNTHETIC_POLYMER};
use spindle_core::distribution::{
    kl_divergence, ks_test, overlap_coefficient, residual_bootstrap, shapiro_wilk, wasserstein1,
};
use spindle_core::interpret::{shap_for_table, shap_values, SHAP_SIMULATIONS};
use spindle_core::learners::{
    default_grid, fit, fit_elastic_net, fit_knn, fit_linear, fit_mars, fit_svr, fit_tree, lambda_max, rbf, ElasticNetFit,
    HyperParams, Lambda,
};
use spindle_core::recommend::recommend_solvents;
use spindle_core::report::read_bundle;
use spindle_core::validation::{metrics, nested_cv_with, BenchmarkTable, CvOptions, OuterScheme};
use spindle_core::{Matrix, ModelKind, ProcessInputs, Seed};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn check(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = start.elapsed().as_secs_f64();
    let line = match &outcome {
        Ok(detail) => format!("PASS  {name}: {detail} [{secs:.1} s]\n"),
        Err(why) => format!("FAIL  {name}: {why} [{secs:.1} s]\n"),
    };
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(line.as_bytes()).and_then(|_| stdout.flush());
    outcome.is_ok()
}

fn spindle() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spindle"));
    c.env_remove("SPINDLE_DATA").env_remove("SPINDLE_SEED").env_remove("SOURCE_DATE_EPOCH");
    c
}

fn uniform_rows<const P: usize>(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<[f64; P]> {
    let mut rng = Seed(seed).rng();
    (0..n).map(|_| std::array::from_fn(|_| rng.random_range(lo..hi))).collect()
}

// ---------------------------------------------------------------- oracles

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        x[r] = (b[r] - (r + 1..n).map(|k| a[r][k] * x[k]).sum::<f64>()) / a[r][r];
    }
    x
}

fn linear_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for trial in 0..5u64 {
        let rows = uniform_rows::<4>(100 + trial, 50, -3.0, 3.0);
        let mut rng = Seed(200 + trial).rng();
        let y: Vec<f64> = rows.iter().map(|r| 1.0 + 2.0 * r[0] - r[1] + 0.5 * r[2] + 0.1 * r[3] + rng.random_range(-0.5..0.5)).collect();
        let design: Vec<Vec<f64>> = rows.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
        let gram = (0..5).map(|i| (0..5).map(|j| design.iter().map(|d| d[i] * d[j]).sum()).collect()).collect();
        let rhs = (0..5).map(|i| design.iter().zip(&y).map(|(d, v)| d[i] * v).sum()).collect();
        let beta = solve(gram, rhs);
        let f = fit_linear(&Matrix::from_rows(&rows).unwrap(), &y).map_err(|e| e.to_string())?;
        worst = worst.max((f.intercept - beta[0]).abs());
        for j in 0..4 {
            worst = worst.max((f.coefficients[j] - beta[j + 1]).abs());
        }
    }
    ensure!(worst < 1e-8, "LINEAR max |Δβ| = {worst:e}");
    Ok(format!("LINEAR max |Δβ| {worst:.1e}"))
}

/// Largest violation of the elastic-net subgradient conditions for
/// `(1/2n)‖y − b0 − Xβ‖² + λ(α‖β‖₁ + (1−α)‖β‖²/2)`.
fn kkt_residual(x: &Matrix, y: &[f64], f: &ElasticNetFit) -> f64 {
    let n = y.len() as f64;
    let resid: Vec<f64> = (0..x.nrows()).map(|i| y[i] - f.predict_row(x.row(i))).collect();
    let mut worst = resid.iter().sum::<f64>().abs() / n;
    for j in 0..x.ncols() {
        let g = (0..x.nrows()).map(|i| x.get(i, j) * resid[i]).sum::<f64>() / n - f.lambda * (1.0 - f.alpha) * f.coefficients[j];
        let l1 = f.lambda * f.alpha;
        let b = f.coefficients[j];
        worst = worst.max(if b != 0.0 { (g - l1 * b.signum()).abs() } else { (g.abs() - l1).max(0.0) });
    }
    worst
}

fn elastic_net_oracle() -> Outcome {
    let rows = uniform_rows::<3>(11, 10, -2.0, 2.0);
    let mut rng = Seed(12).rng();
    let y: Vec<f64> = rows.iter().map(|r| 2.0 + 1.5 * r[0] - 0.4 * r[1] + 0.05 * r[2] + rng.random_range(-0.3..0.3)).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let grid = default_grid(ModelKind::ElasticNet, 3);
    let mut worst = 0.0f64;
    for p in &grid {
        let HyperParams::ElasticNet { alpha, lambda: Lambda::FractionOfMax(r) } = *p else {
            return Err(format!("unexpected grid point {p}"));
        };
        let lambda = r * lambda_max(&x, &y, alpha).map_err(|e| e.to_string())?;
        let f = fit_elastic_net(&x, &y, alpha, lambda).map_err(|e| e.to_string())?;
        worst = worst.max(kkt_residual(&x, &y, &f));
    }
    ensure!(worst < 1e-6, "ELASTIC_NET worst KKT residual {worst:e}");
    Ok(format!("ELASTIC_NET max KKT {worst:.1e} over {} grid points", grid.len()))
}

fn knn_oracle() -> Outcome {
    let train = uniform_rows::<3>(21, 80, 0.0, 10.0);
    let queries = uniform_rows::<3>(22, 200, -1.0, 11.0);
    let y: Vec<f64> = (0..80).map(|i| (i as f64 * 1.3).sin() * 50.0 + 100.0).collect();
    let x = Matrix::from_rows(&train).unwrap();
    for k in [1, 5, 9] {
        let f = fit_knn(&x, &y, k).map_err(|e| e.to_string())?;
        for q in &queries {
            let d: Vec<f64> = train.iter().map(|r| r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()).collect();
            let mut idx: Vec<usize> = (0..80).collect();
            idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
            let oracle = idx[..k].iter().map(|&i| y[i]).sum::<f64>() / k as f64;
            let ours = f.predict_row(q);
            ensure!((ours - oracle).abs() <= 1e-12 * oracle.abs(), "KNN k={k} query {q:?}: {ours} vs {oracle}");
        }
    }
    Ok("KNN 600/600 queries".into())
}

/// Best root split over every feature, minimum leaf size 7, midpoint thresholds.
fn best_split(rows: &[[f64; 3]], y: &[f64]) -> (usize, f64, f64) {
    let sse = |idx: &[usize]| {
        let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>()
    };
    let all: Vec<usize> = (0..y.len()).collect();
    let root = sse(&all);
    let mut best = (usize::MAX, f64::NAN, f64::NEG_INFINITY);
    for j in 0..3 {
        let mut v: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        for w in v.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| rows[i][j] < t);
            if l.len() < 7 || r.len() < 7 {
                continue;
            }
            let gain = root - sse(&l) - sse(&r);
            if gain > best.2 {
                best = (j, t, gain);
            }
        }
    }
    best
}

fn tree_oracle() -> Outcome {
    for trial in 0..20u64 {
        let rows: Vec<[f64; 3]> = uniform_rows::<3>(300 + trial, 60, 0.0, 10.0).into_iter().map(|r| r.map(|v| (v * 4.0).round() / 4.0)).collect();
        let mut rng = Seed(400 + trial).rng();
        let y: Vec<f64> = rows.iter().map(|r| (r[0] * 0.8).sin() * 5.0 + 0.3 * r[1] + rng.random_range(-1.0..1.0)).collect();
        let f = fit_tree(&Matrix::from_rows(&rows).unwrap(), &y, 1e-4).map_err(|e| e.to_string())?;
        let (j, t, _) = best_split(&rows, &y);
        let root = f.tree.nodes[0];
        ensure!(root.feature as usize == j && root.threshold == t, "TREE trial {trial}: x{}<{} vs x{j}<{t}", root.feature, root.threshold);
    }
    Ok("TREE 20/20 root splits".into())
}

fn least_squares_rss(cols: &[Vec<f64>], y: &[f64]) -> f64 {
    let m = cols.len();
    let gram = (0..m).map(|i| (0..m).map(|j| cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum()).collect()).collect();
    let rhs = (0..m).map(|i| cols[i].iter().zip(y).map(|(a, b)| a * b).sum()).collect();
    let beta = solve(gram, rhs);
    (0..y.len()).map(|i| (y[i] - (0..m).map(|j| cols[j][i] * beta[j]).sum::<f64>()).powi(2)).sum()
}

fn mars_oracle() -> Outcome {
    for trial in 0..10u64 {
        let mut rng = Seed(500 + trial).rng();
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5 + rng.random_range(0.0..0.2)).collect();
        let kink = 3.0 + trial as f64 * 0.4;
        let y: Vec<f64> = xs.iter().map(|&v| 1.0 + 0.2 * v + 3.0 * (v - kink).max(0.0) + rng.random_range(-0.2..0.2)).collect();
        let mut grid = xs.clone();
        grid.sort_by(f64::total_cmp);
        let mut oracle = (f64::NAN, f64::INFINITY);
        for &t in &grid[..grid.len() - 1] {
            let cols = vec![vec![1.0; 20], xs.iter().map(|v| (v - t).max(0.0)).collect(), xs.iter().map(|v| (t - v).max(0.0)).collect()];
            let rss = least_squares_rss(&cols, &y);
            if rss < oracle.1 - 1e-9 {
                oracle = (t, rss);
            }
        }
        let x = Matrix::from_rows(&xs.iter().map(|v| [*v]).collect::<Vec<_>>()).unwrap();
        let f = fit_mars(&x, &y, 1, 3).map_err(|e| e.to_string())?;
        let pos = |t: f64| grid.iter().position(|&g| g == t).map(|p| p as i64);
        let knots: Vec<f64> = f.terms.iter().flat_map(|t| t.hinges.iter().map(|h| h.knot)).collect();
        ensure!(!knots.is_empty(), "MARS trial {trial}: no hinge kept");
        for k in knots {
            let (Some(a), Some(b)) = (pos(k), pos(oracle.0)) else {
                return Err(format!("MARS trial {trial}: knot {k} is not a data value"));
            };
            ensure!((a - b).abs() <= 1, "MARS trial {trial}: knot {k} vs oracle {}", oracle.0);
        }
    }
    Ok("MARS 10/10 knots within one grid position".into())
}

fn dual_objective(k: &[Vec<f64>], z: &[f64], eps: f64, beta: &[f64]) -> f64 {
    let n = z.len();
    let q: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| beta[i] * beta[j] * k[i][j]).sum();
    0.5 * q - z.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + eps * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Accelerated projected gradient on the 2n-variable ε-SVR dual; the
/// projection onto the box-and-hyperplane set is found by bisection.
fn svr_qp_oracle(k: &[Vec<f64>], z: &[f64], c: f64, eps: f64) -> f64 {
    let n = z.len();
    let l = 2 * n;
    let sgn = |t: usize| if t < n { 1.0 } else { -1.0 };
    let project = |u: &[f64]| -> Vec<f64> {
        let at = |tau: f64| -> Vec<f64> { (0..l).map(|t| (u[t] - tau * sgn(t)).clamp(0.0, c)).collect() };
        let g = |v: &[f64]| v[..n].iter().sum::<f64>() - v[n..].iter().sum::<f64>();
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(&at(mid)) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        at(0.5 * (lo + hi))
    };
    let grad = |v: &[f64]| -> Vec<f64> {
        (0..l)
            .map(|t| {
                let q: f64 = (0..l).map(|s| sgn(t) * sgn(s) * k[t % n][s % n] * v[s]).sum();
                q + if t < n { eps - z[t] } else { eps + z[t - n] }
            })
            .collect()
    };
    let step = 1.0 / l as f64;
    let (mut v, mut w) = (vec![0.0; l], vec![0.0; l]);
    let mut theta: f64 = 1.0;
    for _ in 0..20_000 {
        let g = grad(&w);
        let next = project(&w.iter().zip(&g).map(|(a, b)| a - step * b).collect::<Vec<_>>());
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        w = next.iter().zip(&v).map(|(a, b)| a + (theta - 1.0) / theta_next * (a - b)).collect();
        v = next;
        theta = theta_next;
    }
    let beta: Vec<f64> = (0..n).map(|i| v[i] - v[i + n]).collect();
    dual_objective(k, z, eps, &beta)
}

fn svr_oracle() -> Outcome {
    let xs: [f64; 8] = [-1.6, -1.1, -0.5, -0.1, 0.3, 0.8, 1.2, 1.9];
    let rows: Vec<[f64; 2]> = xs.iter().map(|&v| [v, (v * 1.7).cos()]).collect();
    let y: Vec<f64> = xs.iter().map(|&v| (2.0 * v).sin() + 0.3 * v).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let k: Vec<Vec<f64>> = (0..8).map(|i| (0..8).map(|j| rbf(0.7, x.row(i), x.row(j))).collect()).collect();
    let mut worst = 0.0f64;
    for c in [0.25, 1.0, 4.0] {
        let f = fit_svr(&x, &y, 0.7, c, 0.1).map_err(|e| e.to_string())?;
        let mut beta = vec![0.0; 8];
        for (s, b) in f.support.rows().zip(&f.coefficients) {
            let i = (0..8).find(|&i| x.row(i) == s).ok_or("support vector is not a training row")?;
            beta[i] = *b;
        }
        let ours = dual_objective(&k, &y, 0.1, &beta);
        ensure!((ours - f.objective).abs() < 1e-9, "SVR C={c}: reported objective {} vs recomputed {ours}", f.objective);
        let oracle = svr_qp_oracle(&k, &y, c, 0.1);
        worst = worst.max((ours - oracle).abs());
        ensure!((ours - oracle).abs() < 1e-3, "SVR C={c}: objective {ours} vs QP oracle {oracle}");
    }
    Ok(format!("SVR max |Δobjective| {worst:.1e}"))
}

fn learner_oracles() -> Outcome {
    let start = Instant::now();
    let parts = [linear_oracle(), elastic_net_oracle(), knn_oracle(), tree_oracle(), mars_oracle(), svr_oracle()];
    let elapsed = start.elapsed();
    let mut details = Vec::new();
    for p in parts {
        details.push(p?);
    }
    ensure!(elapsed < Duration::from_secs(30), "suite took {:.1} s (limit 30 s)", elapsed.as_secs_f64());
    Ok(format!("{}; {:.1} s", details.join("; "), elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------- metrics

fn metric_identities() -> Outcome {
    let m = metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).map_err(|e| e.to_string())?;
    ensure!((m.mae - 1.0 / 3.0).abs() < 1e-12, "MAE {}", m.mae);
    ensure!((m.rmse - (1.0f64 / 3.0).sqrt()).abs() < 1e-12, "RMSE {}", m.rmse);
    ensure!(m.r2.is_some_and(|r| (r - 0.5).abs() < 1e-12), "R2 {:?}", m.r2);
    let perfect = metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    ensure!(perfect.mae == 0.0 && perfect.rmse == 0.0 && perfect.r2 == Some(1.0), "perfect prediction {perfect:?}");
    let mean = metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).map_err(|e| e.to_string())?;
    ensure!(mean.r2 == Some(0.0), "mean prediction R2 {:?}", mean.r2);
    Ok("MAE 1/3, RMSE sqrt(1/3), R2 0.5; perfect and mean-prediction limits exact".into())
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkRun {
    table: BenchmarkTable,
    elapsed: Duration,
}

fn run_benchmark_command() -> Result<BenchmarkRun, String> {
    let start = Instant::now();
    let out = spindle().args(["benchmark", "--format", "json"]).output().map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(out.status.success(), "benchmark exited {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    let table: BenchmarkTable = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    Ok(BenchmarkRun { table, elapsed })
}

fn r2_of(table: &BenchmarkTable, kind: ModelKind) -> Result<f64, String> {
    table
        .cells
        .iter()
        .find(|c| c.kind == kind)
        .and_then(|c| c.summary.map(|s| s.r2.mean))
        .ok_or_else(|| format!("no R2 for {kind}"))
}

fn nonlinear_learners_win(run: &Result<BenchmarkRun, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let linear = r2_of(&run.table, ModelKind::Linear)?;
    let mut parts = vec![format!("LINEAR {linear:.3}")];
    for kind in [ModelKind::Forest, ModelKind::Knn, ModelKind::SvrRbf] {
        let r2 = r2_of(&run.table, kind)?;
        ensure!(r2 - linear >= 0.15, "{kind} R2 {r2:.3} is not 0.15 above LINEAR {linear:.3}");
        parts.push(format!("{kind} {r2:.3}"));
    }
    let secs = run.elapsed.as_secs_f64();
    ensure!(run.elapsed < Duration::from_secs(300), "7 learners took {secs:.1} s (limit 300 s)");
    Ok(format!("nested-CV R2 {}; 7 learners in {secs:.1} s", parts.join(", ")))
}

fn benchmark_matrix(run: &Result<BenchmarkRun, String>) -> Outcome {
    let run = run.as_ref().map_err(Clone::clone)?;
    let t = &run.table;
    ensure!(t.cells.len() == 7, "{} cells, expected 7", t.cells.len());
    for kind in ModelKind::ALL {
        ensure!(t.cells.iter().any(|c| c.kind == kind), "{kind} missing");
    }
    for c in &t.cells {
        ensure!(c.error.is_none(), "{} / {}: {}", c.polymer, c.kind, c.error.clone().unwrap_or_default());
        let s = c.summary.ok_or_else(|| format!("{} has no summary", c.kind))?;
        for stat in [s.rmse, s.mae, s.r2] {
            ensure!(stat.mean.is_finite() && stat.sd.is_finite(), "{}: non-finite mean/SD", c.kind);
        }
    }
    let rows = t.rows();
    ensure!(rows.iter().all(|r| r[2..].iter().all(|cell| cell.contains(" ± "))), "cells are not mean ± SD");
    let rendered = t.render();
    ensure!(rendered.contains("RMSE") && rendered.contains("MAE") && rendered.contains("R2"), "rendered header missing");
    let polymers: std::collections::BTreeSet<&str> = t.cells.iter().map(|c| c.polymer.as_str()).collect();
    Ok(format!("{} polymer(s) × 7 models, e.g. {} {} RMSE {}", polymers.len(), rows[0][0], rows[0][1], rows[0][2]))
}

// ---------------------------------------------------------------- leakage

fn leakage_guard() -> Outcome {
    let config = SynthConfig { n_studies: 12, rows_per_study: 20, noise_sd: 20.0, study_offset_sd: 100.0, seed: 7, polymer: SYNTHETIC_POLYMER.into() };
    ensure!(config.study_offset_sd >= 3.0 * config.noise_sd, "offsets below 3× noise");
    let synth = generate_synthetic(&config).map_err(|e| e.to_string())?;
    let table = polymer_subset(&synth.records, SYNTHETIC_POLYMER, false).map_err(|e| e.to_string())?;
    let r2 = |scheme| -> Result<f64, String> {
        let (_, s) = nested_cv_with(&table, ModelKind::Forest, &CvOptions { scheme, grid: None }, Seed(42)).map_err(|e| e.to_string())?;
        Ok(s.r2.mean)
    };
    let loso = r2(OuterScheme::LeaveOneStudyOut)?;
    let shuffled = r2(OuterScheme::ShuffledKFold { k: 5 })?;
    ensure!(loso < shuffled - 0.1, "FOREST LOSO R2 {loso:.3} vs shuffled 5-fold {shuffled:.3}");
    Ok(format!("FOREST LOSO R2 {loso:.3} < shuffled 5-fold R2 {shuffled:.3} − 0.1 (offset SD 100 nm, noise SD 20 nm)"))
}

// ---------------------------------------------------------------- SHAP

fn shap_checks() -> Outcome {
    let synth = generate_synthetic(&SynthConfig::default()).map_err(|e| e.to_string())?;
    let t = polymer_subset(&synth.records, SYNTHETIC_POLYMER, false).map_err(|e| e.to_string())?;
    let (lo, hi) = t.target_range();

    let linear = fit(&HyperParams::Linear, &t.x, &t.feature_names, &t.y, Seed(1)).map_err(|e| e.to_string())?;
    // 200 background rows and 200 other rows to explain
    let background_rows: Vec<usize> = (0..t.n()).step_by(3).take(200).collect();
    let instance_rows: Vec<usize> = (1..t.n()).step_by(3).take(200).collect();
    let background = t.x.select_rows(&background_rows);
    let s = shap_values(&linear, &t.x.select_rows(&instance_rows), &background, SHAP_SIMULATIONS, Seed(11)).map_err(|e| e.to_string())?;
    ensure!(s.phi.nrows() == 200 && s.background_rows == 200 && s.simulations == SHAP_SIMULATIONS, "{} instances, {} background rows", s.phi.nrows(), s.background_rows);
    let p = t.p();
    let origin = vec![0.0; p];
    let f0 = linear.predict_row(&origin);
    let beta: Vec<f64> = (0..p)
        .map(|j| {
            let mut e = origin.clone();
            e[j] = 1.0;
            linear.predict_row(&e) - f0
        })
        .collect();
    let bg_mean: Vec<f64> = (0..p).map(|j| background.column(j).iter().sum::<f64>() / background.nrows() as f64).collect();
    // every φⱼ of each of the first 20 instances, then the exceedance rate
    // over all 200 against the nominal two-sided 3-SE rate of t(49), 0.42%
    const STRICT: usize = 20;
    let mut outside = Vec::new();
    let mut worst_z = 0.0f64;
    for (i, &row) in instance_rows.iter().enumerate() {
        for j in 0..p {
            let exact = beta[j] * (t.x.get(row, j) - bg_mean[j]);
            let (phi, se) = (s.phi.get(i, j), s.std_errors.get(i, j));
            let err = (phi - exact).abs();
            if err > 1e-9 {
                worst_z = worst_z.max(err / se);
            }
            if err > 3.0 * se + 1e-9 {
                outside.push((i, j));
            }
        }
    }
    let total = instance_rows.len() * p;
    let strict: Vec<&(usize, usize)> = outside.iter().filter(|(i, _)| *i < STRICT).collect();
    ensure!(strict.is_empty(), "LINEAR: φ outside 3 SE at (instance, feature) {strict:?}");
    let rate = outside.len() as f64 / total as f64;
    ensure!(rate <= 0.01, "LINEAR: {}/{total} φ outside 3 SE", outside.len());

    let forest = fit(&HyperParams::Forest { mtry: 2, min_node_size: 5, n_trees: 500 }, &t.x, &t.feature_names, &t.y, Seed(2))
        .map_err(|e| e.to_string())?;
    let s = shap_for_table(&forest, &t, SHAP_SIMULATIONS, Seed(12)).map_err(|e| e.to_string())?;
    let gap = (0..s.phi.nrows()).map(|i| (s.phi.row(i).iter().sum::<f64>() - (s.predictions[i] - s.baseline)).abs()).sum::<f64>()
        / s.phi.nrows() as f64;
    ensure!(gap <= 0.05 * (hi - lo), "FOREST efficiency gap {gap:.3} nm > 5% of range {:.1} nm", hi - lo);
    Ok(format!(
        "LINEAR all {} φ of {STRICT} instances within 3 SE, {}/{total} beyond 3 SE over 200 instances (max |z| {worst_z:.2}); FOREST mean efficiency gap {gap:.3} nm = {:.3}% of range",
        STRICT * p,
        outside.len(),
        100.0 * gap / (hi - lo)
    ))
}

// ---------------------------------------------------------------- bootstrap

fn bootstrap_identity() -> Outcome {
    // dyadic values: ŷ + ε and its difference with ŷ are exact in binary
    let pool: Vec<f64> = (0..64).map(|i| (i as f64 - 31.5) * 0.25).collect();
    let yhat = 137.625;
    let d = residual_bootstrap(yhat, &pool, 1000, Seed(5)).map_err(|e| e.to_string())?;
    ensure!(d.realisations.iter().all(|r| pool.contains(&(r - yhat))), "ỹ − ŷ outside the pool");

    let mut rng = Seed(6).rng();
    let pool: Vec<f64> = (0..150).map(|_| rng.random_range(-80.0..120.0)).collect();
    let yhat = 137.651;
    let d = residual_bootstrap(yhat, &pool, 100, Seed(42)).map_err(|e| e.to_string())?;
    for r in &d.realisations {
        ensure!(pool.iter().any(|e| (yhat + e).to_bits() == r.to_bits()), "realisation {r} is not ŷ + ε for any pool member");
    }

    let point = residual_bootstrap(yhat, &[0.0; 25], 100, Seed(1)).map_err(|e| e.to_string())?;
    ensure!(point.realisations.len() == 100 && point.realisations.iter().all(|&r| r == yhat), "zero pool is not a point mass");
    Ok("1100 realisations are ŷ + pool member; zero pool gives a point mass".into())
}

// ---------------------------------------------------------------- distributions

fn normal_draws(seed: u64, n: usize, mean: f64) -> Vec<f64> {
    let mut rng = Seed(seed).rng();
    (0..n).map(|_| mean + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect()
}

fn distribution_battery() -> Outcome {
    let ks = |a: &[f64], b: &[f64]| ks_test(a, b).map(|r| r.d).map_err(|e| e.to_string());
    ensure!(ks(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])? == 0.0, "KS D of identical samples");
    ensure!(ks(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0])? == 1.0, "KS D of separated samples");
    ensure!(ks(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0])? == 0.5, "KS D of half-overlapping samples");

    let w = |a: &[f64], b: &[f64]| wasserstein1(a, b).map_err(|e| e.to_string());
    let mut rng = Seed(31).rng();
    let mut sample = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-5.0..5.0)).collect() };
    for _ in 0..100 {
        let (a, b, c) = (sample(15), sample(22), sample(9));
        let shift = 3.75;
        let shifted = |v: &[f64]| v.iter().map(|x| x + shift).collect::<Vec<f64>>();
        ensure!((w(&shifted(&a), &shifted(&b))? - w(&a, &b)?).abs() < 1e-12, "translation property");
        ensure!((w(&a, &shifted(&a))? - shift).abs() < 1e-12, "W(a, a + c) != c");
        let (ab, bc, ac) = (w(&a, &b)?, w(&b, &c)?, w(&a, &c)?);
        ensure!(w(&a, &a)?.abs() < 1e-9 && ab >= 0.0, "identity / non-negativity");
        ensure!((ab - w(&b, &a)?).abs() < 1e-9, "symmetry");
        ensure!(ac <= ab + bc + 1e-9, "triangle inequality");
    }

    let (a, b) = (normal_draws(41, 10_000, 0.0), normal_draws(42, 10_000, 1.0));
    let ovl = overlap_coefficient(&a, &b).map_err(|e| e.to_string())?;
    let kl = kl_divergence(&a, &b).map_err(|e| e.to_string())?;
    ensure!((ovl - 0.617).abs() <= 0.05, "OVL {ovl:.4}");
    ensure!((kl - 0.5).abs() <= 0.1, "KL {kl:.4}");

    let i15: Vec<f64> = (1..=30).map(|i| (i as f64).powf(1.5)).collect();
    let cases: [(&[f64], f64, f64); 4] = [
        (&[148.0, 154.0, 158.0, 160.0, 161.0, 162.0, 166.0, 170.0, 182.0, 195.0, 236.0], 0.788814694863, 0.006703814062),
        (&[2.1, 3.4, 1.9, 5.6, 4.4], 0.932084939195, 0.610655902260),
        (&[1.0, 2.0, 4.0], 0.964285714286, 0.636886845029),
        (&i15, 0.934561545743, 0.064977324018),
    ];
    let mut worst = 0.0f64;
    for (x, w_ref, p_ref) in cases {
        let r = shapiro_wilk(x).map_err(|e| e.to_string())?;
        worst = worst.max((r.w - w_ref).abs()).max((r.p - p_ref).abs());
        ensure!((r.w - w_ref).abs() < 1e-3 && (r.p - p_ref).abs() < 1e-3, "Shapiro-Wilk n={}: W {} p {} vs {w_ref} {p_ref}", x.len(), r.w, r.p);
    }
    Ok(format!("KS hand cases exact; W1 translation and axioms on 100 triples; OVL {ovl:.3}; KL {kl:.3}; Shapiro-Wilk max |Δ| {worst:.1e}"))
}

// ---------------------------------------------------------------- recommendation

fn record(i: usize, v: [f64; 6], solvents: [Option<&str>; 3], ratios: [Option<f64>; 3], diameter: f64) -> StudyRecord {
    StudyRecord {
        doi: format!("10.1000/s{}", i % 5),
        polymer: "PVA".into(),
        solvents: solvents.map(|s| s.map(String::from)),
        solvent_ratios: ratios,
        concentration: v[0],
        needle_diameter: v[1],
        collector_type: "flat".into(),
        rotation_speed: v[2],
        voltage: v[3],
        flow_rate: v[4],
        distance: v[5],
        temperature: None,
        humidity: None,
        fibre_diameter: diameter,
    }
}

fn random_point(rng: &mut impl Rng) -> [f64; 6] {
    [rng.random_range(5.0..15.0), rng.random_range(18.0..25.0), rng.random_range(0.0..2000.0), rng.random_range(8.0..30.0), rng.random_range(0.1..3.0), rng.random_range(8.0..25.0)]
}

fn recommendation() -> Outcome {
    let mut rng = Seed(51).rng();
    let water: Vec<StudyRecord> = (0..40)
        .map(|i| record(i, random_point(&mut rng), [Some("WATER"), None, None], [Some(100.0), None, None], rng.random_range(80.0..300.0)))
        .collect();
    let refs: Vec<&StudyRecord> = water.iter().collect();
    let inputs = ProcessInputs::from_values(random_point(&mut rng), "flat");
    let rec = recommend_solvents(&refs, &inputs, 137.651, 10, 0.7).map_err(|e| e.to_string())?;
    let expected = "Recommended solvents & ratios (from 10 closest rows): WATER + NONE + NONE. Median ratios: 100% / 0% / 0%.";
    ensure!(rec.sentence() == expected, "sentence {:?}", rec.sentence());

    let triplets = [
        [Some("DMF"), Some("THF"), None],
        [Some("WATER"), None, None],
        [Some("DCM"), Some("DMF"), None],
        [Some("HFIP"), None, None],
    ];
    let mixed: Vec<StudyRecord> = (0..80)
        .map(|i| record(i, random_point(&mut rng), triplets[i % 4], [Some(60.0), Some(40.0), None], rng.random_range(80.0..300.0)))
        .collect();
    let query = random_point(&mut rng);
    let base = recommend_solvents(&mixed.iter().collect::<Vec<_>>(), &ProcessInputs::from_values(query, ""), 150.0, 10, 0.7)
        .map_err(|e| e.to_string())?;
    for j in 0..6 {
        let scaled: Vec<StudyRecord> = mixed
            .iter()
            .map(|r| {
                let mut v = r.process_values();
                v[j] *= 1000.0;
                StudyRecord {
                    concentration: v[0],
                    needle_diameter: v[1],
                    rotation_speed: v[2],
                    voltage: v[3],
                    flow_rate: v[4],
                    distance: v[5],
                    ..r.clone()
                }
            })
            .collect();
        let mut q = query;
        q[j] *= 1000.0;
        let rec = recommend_solvents(&scaled.iter().collect::<Vec<_>>(), &ProcessInputs::from_values(q, ""), 150.0, 10, 0.7)
            .map_err(|e| e.to_string())?;
        ensure!(rec.candidates == base.candidates, "column {j} ×1000 changed the top-k rows");
        ensure!(rec.triplet == base.triplet, "column {j} ×1000 changed the triplet");
    }
    Ok("Fig 8 sentence reproduced; top-10 unchanged under ×1000 of each of 6 columns".into())
}

// ---------------------------------------------------------------- determinism

fn end_to_end_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str, epoch: Option<&str>| -> Result<Vec<u8>, String> {
        let path = dir.path().join(name);
        let mut cmd = spindle();
        cmd.args(["run", "--model", "KNN", "--seed", "42", "--out", path.to_str().unwrap()]).args([
            "--concentration", "10", "--needle-diameter", "21", "--rotation-speed", "500", "--voltage", "18", "--flow-rate", "1",
            "--distance", "15",
        ]);
        if let Some(e) = epoch {
            cmd.env("SOURCE_DATE_EPOCH", e);
        }
        let out = cmd.output().map_err(|e| e.to_string())?;
        ensure!(out.status.success(), "run failed: {}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(&path).map_err(|e| e.to_string())
    };
    let first = read_bundle(&run("a.zip", None)?).map_err(|e| e.to_string())?;
    std::thread::sleep(Duration::from_millis(1100));
    let second = read_bundle(&run("b.zip", None)?).map_err(|e| e.to_string())?;
    ensure!(first.members == second.members, "bundle members differ");
    let strip = |m: &spindle_core::report::Manifest| {
        let mut m = m.clone();
        m.started_at = 0;
        m.finished_at = 0;
        m
    };
    ensure!(strip(&first.manifest) == strip(&second.manifest), "manifests differ beyond timestamps");

    let a = run("c.zip", Some("1700000000"))?;
    let b = run("d.zip", Some("1700000000"))?;
    ensure!(a == b, "archives differ with a pinned SOURCE_DATE_EPOCH");
    Ok(format!("{} members identical across runs; archives byte-identical with pinned timestamps ({} bytes)", first.members.len() + 1, a.len()))
}

#[test]
fn primary_criteria() {
    let mut failed = Vec::new();
    let mut record_outcome = |name: &'static str, ok: bool| {
        if !ok {
            failed.push(name);
        }
    };
    record_outcome("learner oracles", check("learner oracles", learner_oracles));
    record_outcome("metric identities", check("metric identities", metric_identities));
    let bench = run_benchmark_command();
    record_outcome("non-linear learners beat LINEAR", check("non-linear learners beat LINEAR", || nonlinear_learners_win(&bench)));
    record_outcome("leakage guard", check("leakage guard", leakage_guard));
    record_outcome("SHAP closed form and efficiency", check("SHAP closed form and efficiency", shap_checks));
    record_outcome("bootstrap identity", check("bootstrap identity", bootstrap_identity));
    record_outcome("distribution battery", check("distribution battery", distribution_battery));
    record_outcome("solvent recommendation", check("solvent recommendation", recommendation));
    record_outcome("end-to-end determinism", check("end-to-end determinism", end_to_end_determinism));
    record_outcome("benchmark matrix", check("benchmark matrix", || benchmark_matrix(&bench)));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
