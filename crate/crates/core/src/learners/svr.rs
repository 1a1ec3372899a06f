//! ε-insensitive support vector regression with a Gaussian kernel.
//!
//! The dual is solved in the 2n-variable form used by libsvm: variables
//! `a_i` (i < n) carry label +1 and `a_{i+n}` label −1, the regression
//! coefficient of training row `i` is `β_i = a_i − a_{i+n}`, and pairs are
//! chosen by second-order working-set selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::Seed;

/// Stopping tolerance on the maximal KKT violation.
pub const KKT_TOL: f64 = 1e-3;
pub const DEFAULT_EPSILON: f64 = 0.1;
const TAU: f64 = 1e-12;
const MAX_SIGMA_PAIRS: usize = 1000;
const DENSE_KERNEL_LIMIT: usize = 4000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrFit {
    pub sigma: f64,
    pub cost: f64,
    pub epsilon: f64,
    /// Training rows with a nonzero coefficient.
    pub support: Matrix,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    /// Predictions are `y_center + y_scale · f(x)`; identity for [`fit_svr`].
    pub y_center: f64,
    pub y_scale: f64,
    pub iterations: usize,
    /// Dual objective `½βᵀKβ − zᵀβ + ε‖β‖₁` on the (possibly scaled) targets.
    pub objective: f64,
}

impl SvrFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let f: f64 = self
            .support
            .rows()
            .zip(&self.coefficients)
            .map(|(s, b)| b * rbf(self.sigma, s, row))
            .sum::<f64>()
            + self.bias;
        self.y_center + self.y_scale * f
    }
}

#[inline]
pub fn rbf(sigma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (-sigma * d).exp()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

/// Kernel width from the median inverse squared distance between row pairs.
/// All pairs are used when there are at most 1000 of them, otherwise 1000
/// seeded random pairs of distinct rows. Zero distances are ignored.
pub fn estimate_sigma(x: &Matrix, seed: Seed) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!("sigma estimation needs at least 2 rows, got {n}")));
    }
    let total_pairs = n * (n - 1) / 2;
    let mut inv: Vec<f64> = Vec::new();
    if total_pairs > MAX_SIGMA_PAIRS {
        let mut rng = seed.rng();
        for _ in 0..MAX_SIGMA_PAIRS {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let d = sq_dist(x.row(i), x.row(j));
            if d > 0.0 {
                inv.push(1.0 / d);
            }
        }
    }
    if inv.is_empty() {
        for i in 0..n {
            for j in i + 1..n {
                let d = sq_dist(x.row(i), x.row(j));
                if d > 0.0 {
                    inv.push(1.0 / d);
                }
            }
        }
    }
    if inv.is_empty() {
        return Err(Error::InvalidInput("all rows are identical; kernel width is undefined".into()));
    }
    Ok(median(&mut inv))
}

enum Kernel<'a> {
    Dense { n: usize, k: Vec<f64> },
    OnDemand { x: &'a Matrix, sigma: f64 },
}

impl<'a> Kernel<'a> {
    fn new(x: &'a Matrix, sigma: f64) -> Self {
        let n = x.nrows();
        if n > DENSE_KERNEL_LIMIT {
            return Kernel::OnDemand { x, sigma };
        }
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = 1.0;
            for j in 0..i {
                let v = rbf(sigma, x.row(i), x.row(j));
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        Kernel::Dense { n, k }
    }

    fn row_into(&self, i: usize, out: &mut Vec<f64>) {
        out.clear();
        match self {
            Kernel::Dense { n, k } => out.extend_from_slice(&k[i * n..(i + 1) * n]),
            Kernel::OnDemand { x, sigma } => out.extend(x.rows().map(|r| rbf(*sigma, x.row(i), r))),
        }
    }
}

struct Dual {
    beta: Vec<f64>,
    rho: f64,
    iterations: usize,
    objective: f64,
}

/// Dual variables split by label: `up[t]` is `a_t`, `down[t]` is `a_{t+n}`,
/// with their gradients.
#[derive(Clone)]
struct State {
    up: Vec<f64>,
    down: Vec<f64>,
    g_up: Vec<f64>,
    g_down: Vec<f64>,
}

impl State {
    fn cold(z: &[f64], epsilon: f64) -> State {
        let n = z.len();
        State {
            up: vec![0.0; n],
            down: vec![0.0; n],
            g_up: z.iter().map(|v| epsilon - v).collect(),
            g_down: z.iter().map(|v| epsilon + v).collect(),
        }
    }

    /// Multiplies every dual variable by `ratio`; the gradients are affine in
    /// the duals, so they follow without a kernel pass.
    fn rescale(&mut self, z: &[f64], epsilon: f64, ratio: f64) {
        for t in 0..z.len() {
            self.up[t] *= ratio;
            self.down[t] *= ratio;
            let (p_up, p_down) = (epsilon - z[t], epsilon + z[t]);
            self.g_up[t] = p_up + ratio * (self.g_up[t] - p_up);
            self.g_down[t] = p_down + ratio * (self.g_down[t] - p_down);
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Var {
    Up(usize),
    Down(usize),
}

fn solve(kernel: &Kernel, z: &[f64], cost: f64, epsilon: f64, state: &mut State) -> Result<Dual> {
    let n = z.len();
    let max_iter = 100_000usize.max(200 * n);
    let (mut ki, mut kj) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut u = vec![0.0; n];
    let mut iterations = 0;
    loop {
        let State { up, down, g_up, g_down } = &*state;
        // first index: maximal violation among variables that can move up
        let mut g_max = f64::NEG_INFINITY;
        let mut first = None;
        for t in 0..n {
            if up[t] < cost && -g_up[t] >= g_max {
                g_max = -g_up[t];
                first = Some(Var::Up(t));
            }
        }
        for t in 0..n {
            if down[t] > 0.0 && g_down[t] >= g_max {
                g_max = g_down[t];
                first = Some(Var::Down(t));
            }
        }
        let Some(vi) = first else { break };
        let ri = match vi {
            Var::Up(t) | Var::Down(t) => t,
        };
        kernel.row_into(ri, &mut ki);
        // second index: largest objective decrease among variables that can move down
        let mut g_max2 = f64::NEG_INFINITY;
        let mut second = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if up[t] > 0.0 {
                g_max2 = g_max2.max(g_up[t]);
                let diff = g_max + g_up[t];
                if diff > 0.0 {
                    let quad = 2.0 - 2.0 * ki[t];
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best {
                        best = obj;
                        second = Some(Var::Up(t));
                    }
                }
            }
        }
        for t in 0..n {
            if down[t] < cost {
                g_max2 = g_max2.max(-g_down[t]);
                let diff = g_max - g_down[t];
                if diff > 0.0 {
                    let quad = 2.0 - 2.0 * ki[t];
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best {
                        best = obj;
                        second = Some(Var::Down(t));
                    }
                }
            }
        }
        let Some(vj) = second else { break };
        if g_max + g_max2 < KKT_TOL {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::NonConvergence { learner: "svr", iterations: max_iter });
        }
        iterations += 1;

        let rj = match vj {
            Var::Up(t) | Var::Down(t) => t,
        };
        kernel.row_into(rj, &mut kj);
        let kij = ki[rj];
        let get = |s: &State, v: Var| match v {
            Var::Up(t) => (s.up[t], s.g_up[t], 1.0),
            Var::Down(t) => (s.down[t], s.g_down[t], -1.0),
        };
        let (old_i, grad_i, yi) = get(state, vi);
        let (old_j, grad_j, yj) = get(state, vj);
        let (mut ai, mut aj) = (old_i, old_j);
        if yi != yj {
            let quad = 2.0 + 2.0 * kij;
            let delta = (-grad_i - grad_j) / if quad > 0.0 { quad } else { TAU };
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > cost {
                    ai = cost;
                    aj = cost - diff;
                }
            } else if aj > cost {
                aj = cost;
                ai = cost + diff;
            }
        } else {
            let quad = 2.0 - 2.0 * kij;
            let delta = (grad_i - grad_j) / if quad > 0.0 { quad } else { TAU };
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > cost {
                if ai > cost {
                    ai = cost;
                    aj = sum - cost;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cost {
                if aj > cost {
                    aj = cost;
                    ai = sum - cost;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        for (v, a) in [(vi, ai), (vj, aj)] {
            match v {
                Var::Up(t) => state.up[t] = a,
                Var::Down(t) => state.down[t] = a,
            }
        }
        let (ci, cj) = (yi * (ai - old_i), yj * (aj - old_j));
        for t in 0..n {
            u[t] = ci * ki[t] + cj * kj[t];
        }
        for t in 0..n {
            state.g_up[t] += u[t];
            state.g_down[t] -= u[t];
        }
    }

    let State { up, down, g_up, g_down } = &*state;
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    // y·G for label +1 is g_up, for label −1 it is −g_down
    for t in 0..n {
        let yg = g_up[t];
        if up[t] >= cost {
            lb = lb.max(yg);
        } else if up[t] <= 0.0 {
            ub = ub.min(yg);
        } else {
            free += 1;
            sum_free += yg;
        }
        let yg = -g_down[t];
        if down[t] >= cost {
            ub = ub.min(yg);
        } else if down[t] <= 0.0 {
            lb = lb.max(yg);
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { 0.5 * (ub + lb) };
    let objective = 0.5
        * (0..n)
            .map(|t| up[t] * (g_up[t] + epsilon - z[t]) + down[t] * (g_down[t] + epsilon + z[t]))
            .sum::<f64>();
    let beta = (0..n).map(|t| up[t] - down[t]).collect();
    Ok(Dual { beta, rho, iterations, objective })
}

fn check(x: &Matrix, y: &[f64], sigma: f64, cost: f64, epsilon: f64) -> Result<()> {
    if x.nrows() == 0 || y.len() != x.nrows() {
        return Err(Error::InvalidInput("svr needs matching non-empty inputs".into()));
    }
    if !(sigma > 0.0 && cost > 0.0 && epsilon >= 0.0) || !sigma.is_finite() || !cost.is_finite() {
        return Err(Error::InvalidInput(format!("svr needs sigma > 0, C > 0, epsilon >= 0 (got {sigma}, {cost}, {epsilon})")));
    }
    Ok(())
}

fn assemble(x: &Matrix, sigma: f64, cost: f64, epsilon: f64, dual: Dual, y_center: f64, y_scale: f64) -> SvrFit {
    let idx: Vec<usize> = (0..dual.beta.len()).filter(|&i| dual.beta[i] != 0.0).collect();
    SvrFit {
        sigma,
        cost,
        epsilon,
        support: x.select_rows(&idx),
        coefficients: idx.iter().map(|&i| dual.beta[i]).collect(),
        bias: -dual.rho,
        y_center,
        y_scale,
        iterations: dual.iterations,
        objective: dual.objective,
    }
}

/// Fits on the targets as given.
pub fn fit_svr(x: &Matrix, y: &[f64], sigma: f64, cost: f64, epsilon: f64) -> Result<SvrFit> {
    check(x, y, sigma, cost, epsilon)?;
    let kernel = Kernel::new(x, sigma);
    let dual = solve(&kernel, y, cost, epsilon, &mut State::cold(y, epsilon))?;
    Ok(assemble(x, sigma, cost, epsilon, dual, 0.0, 1.0))
}

/// Fits one model per cost on z-scored targets, sharing the kernel matrix.
/// `epsilon` is then measured in target standard deviations.
pub fn fit_svr_standardized(x: &Matrix, y: &[f64], sigma: f64, costs: &[f64], epsilon: f64) -> Result<Vec<SvrFit>> {
    for &c in costs {
        check(x, y, sigma, c, epsilon)?;
    }
    let n = y.len();
    let center = y.iter().sum::<f64>() / n as f64;
    let scale = if n > 1 {
        (y.iter().map(|v| (v - center).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let z: Vec<f64> = y.iter().map(|v| (v - center) / scale).collect();
    let kernel = Kernel::new(x, sigma);
    // ascending costs, each warm-started from the previous solution scaled
    // up to the new box, which keeps the equality constraint satisfied
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    let mut fits: Vec<Option<SvrFit>> = vec![None; costs.len()];
    let mut state = State::cold(&z, epsilon);
    let mut prev_cost: Option<f64> = None;
    for i in order {
        let c = costs[i];
        if let Some(pc) = prev_cost {
            state.rescale(&z, epsilon, c / pc);
        }
        let dual = solve(&kernel, &z, c, epsilon, &mut state)?;
        fits[i] = Some(assemble(x, sigma, c, epsilon, dual, center, scale));
        prev_cost = Some(c);
    }
    Ok(fits.into_iter().map(|f| f.expect("every cost solved")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dual_objective(k: &[Vec<f64>], z: &[f64], eps: f64, beta: &[f64]) -> f64 {
        let n = z.len();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += beta[i] * beta[j] * k[i][j];
            }
        }
        0.5 * q - z.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + eps * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Projection of `u` onto `{v ∈ [0, c]^2n : Σ v_i − Σ v_{i+n} = 0}` by
    /// bisection on the multiplier of the equality constraint.
    fn project(u: &[f64], c: f64) -> Vec<f64> {
        let n = u.len() / 2;
        let at = |tau: f64| -> Vec<f64> {
            (0..2 * n)
                .map(|t| {
                    let s = if t < n { 1.0 } else { -1.0 };
                    (u[t] - tau * s).clamp(0.0, c)
                })
                .collect()
        };
        let g = |v: &[f64]| v[..n].iter().sum::<f64>() - v[n..].iter().sum::<f64>();
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(&at(mid)) > 0.0 { lo = mid } else { hi = mid }
        }
        at(0.5 * (lo + hi))
    }

    /// Dense QP oracle: accelerated projected gradient on the 2n-variable dual.
    fn qp_oracle(k: &[Vec<f64>], z: &[f64], c: f64, eps: f64) -> f64 {
        let n = z.len();
        let l = 2 * n;
        let sgn = |t: usize| if t < n { 1.0 } else { -1.0 };
        let grad = |v: &[f64]| -> Vec<f64> {
            (0..l)
                .map(|t| {
                    let q: f64 = (0..l).map(|s| sgn(t) * sgn(s) * k[t % n][s % n] * v[s]).sum();
                    q + if t < n { eps - z[t] } else { eps + z[t - n] }
                })
                .collect()
        };
        let step = 1.0 / (2.0 * n as f64);
        let mut v = vec![0.0; l];
        let mut w = v.clone();
        let mut theta: f64 = 1.0;
        for _ in 0..20_000 {
            let g = grad(&w);
            let u: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let next = project(&u, c);
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            w = next.iter().zip(&v).map(|(a, b)| a + (theta - 1.0) / theta_next * (a - b)).collect();
            v = next;
            theta = theta_next;
        }
        let beta: Vec<f64> = (0..n).map(|i| v[i] - v[i + n]).collect();
        dual_objective(k, z, eps, &beta)
    }

    fn eight_points() -> (Matrix, Vec<f64>) {
        let xs: [f64; 8] = [-1.6, -1.1, -0.5, -0.1, 0.3, 0.8, 1.2, 1.9];
        let rows: Vec<[f64; 2]> = xs.iter().map(|&v| [v, (v * 1.7).cos()]).collect();
        let y: Vec<f64> = xs.iter().map(|&v| (2.0 * v).sin() + 0.3 * v).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn objective_matches_dense_qp_oracle() {
        let (x, y) = eight_points();
        let k: Vec<Vec<f64>> = (0..8).map(|i| (0..8).map(|j| rbf(0.7, x.row(i), x.row(j))).collect()).collect();
        for c in [0.25, 1.0, 4.0] {
            let fit = fit_svr(&x, &y, 0.7, c, 0.1).unwrap();
            let mut beta = vec![0.0; 8];
            for (s, b) in fit.support.rows().zip(&fit.coefficients) {
                let i = (0..8).find(|&i| x.row(i) == s).unwrap();
                beta[i] = *b;
            }
            let ours = dual_objective(&k, &y, 0.1, &beta);
            assert!((ours - fit.objective).abs() < 1e-9);
            let oracle = qp_oracle(&k, &y, c, 0.1);
            assert!((ours - oracle).abs() < 1e-3, "C {c}: {ours} vs {oracle}");
            assert!(beta.iter().all(|b| b.abs() <= c + 1e-12));
            assert!(beta.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn single_row_predicts_its_target() {
        let x = Matrix::from_rows(&[[0.3, 0.2]]).unwrap();
        let f = fit_svr(&x, &[7.5], 1.0, 1.0, 0.1).unwrap();
        assert!((f.predict_row(&[5.0, -5.0]) - 7.5).abs() < 1e-12);
        assert!((f.predict_row(&[0.3, 0.2]) - 7.5).abs() < 1e-12);
    }

    #[test]
    fn targets_inside_tube_give_flat_fit() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let y = [5.0, 5.02, 4.98, 5.0];
        let f = fit_svr(&x, &y, 1.0, 1.0, 0.1).unwrap();
        assert!(f.coefficients.is_empty());
        // the bias lies anywhere in the feasible band; the midpoint is the mean here
        assert!((f.bias - 5.0).abs() < 0.03);
        assert!(y.iter().all(|v| (f.bias - v).abs() <= 0.1));
    }

    #[test]
    fn standardized_fit_tracks_a_smooth_curve() {
        let rows: Vec<[f64; 1]> = (0..40).map(|i| [i as f64 / 10.0 - 2.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 300.0 + 100.0 * r[0].sin()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let fits = fit_svr_standardized(&x, &y, 1.0, &[1.0, 4.0], 0.1).unwrap();
        for f in &fits {
            let rmse = (rows.iter().zip(&y).map(|(r, t)| (f.predict_row(r) - t).powi(2)).sum::<f64>() / 40.0).sqrt();
            assert!(rmse < 10.0, "rmse {rmse}");
        }
    }

    #[test]
    fn sigma_from_single_pair() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(estimate_sigma(&x, Seed(1)).unwrap(), 1.0);
    }

    #[test]
    fn sigma_ignores_duplicates_and_matches_all_pairs() {
        let rows: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 * 0.3, ((i * 7) % 5) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let doubled = Matrix::from_rows(&rows.iter().chain(rows.iter()).copied().collect::<Vec<_>>()).unwrap();
        assert_eq!(estimate_sigma(&x, Seed(1)).unwrap(), estimate_sigma(&doubled, Seed(2)).unwrap());

        let mut all = Vec::new();
        for i in 0..10 {
            for j in i + 1..10 {
                all.push(1.0 / sq_dist(&rows[i], &rows[j]));
            }
        }
        assert_eq!(estimate_sigma(&x, Seed(1)).unwrap(), median(&mut all));
    }

    #[test]
    fn sampled_sigma_is_near_the_all_pairs_median() {
        let mut rng = Seed(4).rng();
        let rows: Vec<[f64; 3]> = (0..80).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let mut all = Vec::new();
        for i in 0..80 {
            for j in i + 1..80 {
                all.push(1.0 / sq_dist(&rows[i], &rows[j]));
            }
        }
        all.sort_by(f64::total_cmp);
        // a 1000-pair sample median sits between the 45th and 55th percentiles
        let lo = all[all.len() * 45 / 100];
        let hi = all[all.len() * 55 / 100];
        let s = estimate_sigma(&x, Seed(9)).unwrap();
        assert!(s > lo && s < hi);
    }

    #[test]
    fn identical_rows_are_rejected() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        assert!(estimate_sigma(&x, Seed(1)).is_err());
    }
}
