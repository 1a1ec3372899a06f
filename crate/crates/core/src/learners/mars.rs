//! Multivariate adaptive regression splines.
//!
//! The forward pass keeps an orthonormal basis of the current terms so that
//! every candidate knot of a (parent, variable) pair can be scored from
//! prefix and suffix sums over the rows sorted by that variable. The
//! backward pass deletes one term at a time, each time the one whose removal
//! raises the residual sum of squares least, and keeps the subset with the
//! lowest generalized cross-validation score.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAX_TERMS: usize = 30;
/// Forward pass stops when a step explains less than this share of the
/// total sum of squares.
pub const MIN_IMPROVEMENT: f64 = 1e-4;
const DEPENDENCE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hinge {
    pub var: usize,
    pub knot: f64,
    /// `+1` for `max(0, x − knot)`, `−1` for `max(0, knot − x)`.
    pub sign: i8,
}

impl Hinge {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let d = if self.sign > 0 { x - self.knot } else { self.knot - x };
        d.max(0.0)
    }
}

/// A product of hinges; the empty product is the intercept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub hinges: Vec<Hinge>,
}

impl Term {
    #[inline]
    pub fn eval(&self, row: &[f64]) -> f64 {
        self.hinges.iter().map(|h| h.eval(row[h.var])).product()
    }

    pub fn degree(&self) -> usize {
        self.hinges.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarsFit {
    pub degree: usize,
    pub nprune: usize,
    pub terms: Vec<Term>,
    pub coefficients: Vec<f64>,
    #[serde(with = "crate::serde_float::scalar")]
    pub gcv: f64,
    pub rss: f64,
}

impl MarsFit {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.terms.iter().zip(&self.coefficients).map(|(t, c)| c * t.eval(row)).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// GCV penalty per knot.
pub fn gcv_penalty(degree: usize) -> f64 {
    if degree == 1 { 2.0 } else { 3.0 }
}

pub fn gcv(rss: f64, n: usize, n_terms: usize, penalty: f64) -> f64 {
    let c = n_terms as f64 + penalty * (n_terms as f64 - 1.0) / 2.0;
    let denom = 1.0 - c / n as f64;
    if denom <= 0.0 { f64::INFINITY } else { (rss / n as f64) / (denom * denom) }
}

/// Result of the forward pass: all terms with their design columns.
pub(crate) struct Forward {
    pub terms: Vec<Term>,
    pub columns: Vec<Vec<f64>>,
}

struct Best {
    reduction: f64,
    parent: usize,
    var: usize,
    knot: f64,
    use_plus: bool,
    use_minus: bool,
}

/// Adds the column to the orthonormal set, returning false when it is
/// numerically dependent on what is already there.
fn orthonormalize(q: &mut Vec<Vec<f64>>, col: &[f64]) -> bool {
    let norm0 = dot(col, col).sqrt();
    if norm0 == 0.0 {
        return false;
    }
    let mut v = col.to_vec();
    for _ in 0..2 {
        for qk in q.iter() {
            let c = dot(qk, &v);
            for (a, b) in v.iter_mut().zip(qk) {
                *a -= c * b;
            }
        }
    }
    let norm = dot(&v, &v).sqrt();
    if norm <= DEPENDENCE_TOL * norm0 {
        return false;
    }
    v.iter_mut().for_each(|a| *a /= norm);
    q.push(v);
    true
}

pub(crate) fn forward_pass(x: &Matrix, y: &[f64], degree: usize) -> Forward {
    let (n, p) = (x.nrows(), x.ncols());
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let mut terms = vec![Term { hinges: Vec::new() }];
    let mut columns = vec![vec![1.0; n]];
    let mut q: Vec<Vec<f64>> = Vec::new();
    orthonormalize(&mut q, &columns[0]);
    let mut resid: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let max_terms = MAX_TERMS.min(n.saturating_sub(1)).max(1);

    let sorted: Vec<Vec<usize>> = cols
        .iter()
        .map(|c| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
            idx
        })
        .collect();

    while terms.len() < max_terms && ss_total > 0.0 {
        let mut best: Option<Best> = None;
        for (parent, term) in terms.iter().enumerate() {
            if term.degree() >= degree {
                continue;
            }
            let pcol = &columns[parent];
            for var in 0..p {
                if term.hinges.iter().any(|h| h.var == var) {
                    continue;
                }
                if let Some(c) = scan_knots(&q, &resid, pcol, &cols[var], &sorted[var], parent, var) {
                    if best.as_ref().is_none_or(|b| c.reduction > b.reduction) {
                        best = Some(c);
                    }
                }
            }
        }
        let Some(b) = best else { break };
        if b.reduction < MIN_IMPROVEMENT * ss_total {
            break;
        }
        let mut added = false;
        for (sign, used) in [(1i8, b.use_plus), (-1i8, b.use_minus)] {
            if !used || terms.len() >= max_terms {
                continue;
            }
            let h = Hinge { var: b.var, knot: b.knot, sign };
            let col: Vec<f64> = (0..n).map(|i| columns[b.parent][i] * h.eval(cols[b.var][i])).collect();
            if orthonormalize(&mut q, &col) {
                let qk = q.last().expect("just pushed");
                let c = dot(qk, &resid);
                for (r, v) in resid.iter_mut().zip(qk) {
                    *r -= c * v;
                }
                let mut hinges = terms[b.parent].hinges.clone();
                hinges.push(h);
                terms.push(Term { hinges });
                columns.push(col);
                added = true;
            }
        }
        if !added {
            break;
        }
    }
    Forward { terms, columns }
}

/// Scores every knot for one (parent, variable) pair in one sweep.
fn scan_knots(q: &[Vec<f64>], resid: &[f64], pcol: &[f64], xcol: &[f64], order: &[usize], parent: usize, var: usize) -> Option<Best> {
    let m = q.len();
    let rows: Vec<usize> = order.iter().copied().filter(|&i| pcol[i] != 0.0).collect();
    if rows.len() < 2 {
        return None;
    }
    // For the rows of one side of the knot, c(t) = Σ p·(x − t) pieces expand
    // into sums of p·x and p weighted by q_k, p, r and p.
    let k = rows.len();
    // suffix sums over rows[s..]: (Σ q p x, Σ q p) per k, Σ p²x², Σ p²x, Σ p², Σ p x r, Σ p r
    let mut sq_px = vec![0.0; (k + 1) * m];
    let mut sq_p = vec![0.0; (k + 1) * m];
    let mut s_p2x2 = vec![0.0; k + 1];
    let mut s_p2x = vec![0.0; k + 1];
    let mut s_p2 = vec![0.0; k + 1];
    let mut s_pxr = vec![0.0; k + 1];
    let mut s_pr = vec![0.0; k + 1];
    for s in (0..k).rev() {
        let i = rows[s];
        let (pv, xv) = (pcol[i], xcol[i]);
        for kk in 0..m {
            sq_px[s * m + kk] = sq_px[(s + 1) * m + kk] + q[kk][i] * pv * xv;
            sq_p[s * m + kk] = sq_p[(s + 1) * m + kk] + q[kk][i] * pv;
        }
        s_p2x2[s] = s_p2x2[s + 1] + pv * pv * xv * xv;
        s_p2x[s] = s_p2x[s + 1] + pv * pv * xv;
        s_p2[s] = s_p2[s + 1] + pv * pv;
        s_pxr[s] = s_pxr[s + 1] + pv * xv * resid[i];
        s_pr[s] = s_pr[s + 1] + pv * resid[i];
    }
    let total = |v: &[f64], s: usize| v[0] - v[s];
    let mut best: Option<Best> = None;
    let mut qplus = vec![0.0; m];
    let mut qminus = vec![0.0; m];
    let mut s = 0;
    while s < k {
        let t = xcol[rows[s]];
        // first index of the rows strictly greater than t
        let mut e = s;
        while e < k && xcol[rows[e]] == t {
            e += 1;
        }
        if e == k {
            break;
        }
        // plus side: rows e.. (x > t); minus side: rows ..e (x ≤ t, zero at x = t)
        for kk in 0..m {
            qplus[kk] = sq_px[e * m + kk] - t * sq_p[e * m + kk];
            qminus[kk] = t * (sq_p[kk] - sq_p[e * m + kk]) - (sq_px[kk] - sq_px[e * m + kk]);
        }
        let cpp = s_p2x2[e] - 2.0 * t * s_p2x[e] + t * t * s_p2[e];
        let cmm = t * t * total(&s_p2, e) - 2.0 * t * total(&s_p2x, e) + total(&s_p2x2, e);
        let bp = s_pxr[e] - t * s_pr[e];
        let bm = t * total(&s_pr, e) - total(&s_pxr, e);
        let a11 = cpp - dot(&qplus, &qplus);
        let a22 = cmm - dot(&qminus, &qminus);
        let a12 = -dot(&qplus, &qminus);
        let ok1 = a11 > DEPENDENCE_TOL * DEPENDENCE_TOL * cpp.max(f64::MIN_POSITIVE) && a11 > 0.0;
        let ok2 = a22 > DEPENDENCE_TOL * DEPENDENCE_TOL * cmm.max(f64::MIN_POSITIVE) && a22 > 0.0;
        let single1 = if ok1 { bp * bp / a11 } else { 0.0 };
        let single2 = if ok2 { bm * bm / a22 } else { 0.0 };
        let det = a11 * a22 - a12 * a12;
        let (reduction, use_plus, use_minus) = if ok1 && ok2 && det > 1e-12 * a11 * a22 {
            ((a22 * bp * bp - 2.0 * a12 * bp * bm + a11 * bm * bm) / det, true, true)
        } else if single1 >= single2 {
            (single1, ok1, false)
        } else {
            (single2, false, ok2)
        };
        if (use_plus || use_minus) && best.as_ref().is_none_or(|b| reduction > b.reduction) {
            best = Some(Best { reduction, parent, var, knot: t, use_plus, use_minus });
        }
        s = e;
    }
    best
}

fn gram(columns: &[Vec<f64>], y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let m = columns.len();
    let g = DMatrix::from_fn(m, m, |a, b| dot(&columns[a], &columns[b]));
    let by = DVector::from_fn(m, |a, _| dot(&columns[a], y));
    (g, by)
}

fn inverse(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = g.clone().cholesky() {
        return Some(ch.inverse());
    }
    let m = g.nrows();
    let jitter = 1e-10 * (0..m).map(|i| g[(i, i)]).sum::<f64>() / m as f64;
    (g + DMatrix::identity(m, m) * jitter).cholesky().map(|c| c.inverse())
}

/// Backward elimination; returns the indices of the kept terms.
pub(crate) fn backward_pass(columns: &[Vec<f64>], y: &[f64], nprune: usize, penalty: f64) -> Vec<usize> {
    let n = y.len();
    let yy = dot(y, y);
    let (g_all, by_all) = gram(columns, y);
    let mut active: Vec<usize> = (0..columns.len()).collect();
    let rss_of = |act: &[usize]| -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let g = g_all.select_rows(act).select_columns(act);
        let by = DVector::from_iterator(act.len(), act.iter().map(|&a| by_all[a]));
        let inv = inverse(&g)?;
        let beta = &inv * &by;
        Some(((yy - beta.dot(&by)).max(0.0), beta, inv))
    };
    let mut best_subset = vec![0usize];
    let mut best_gcv = f64::INFINITY;
    loop {
        let Some((rss, beta, inv)) = rss_of(&active) else {
            // drop the newest term until the Gram matrix is usable
            active.pop();
            if active.is_empty() {
                break;
            }
            continue;
        };
        if active.len() <= nprune {
            let score = gcv(rss, n, active.len(), penalty);
            if score <= best_gcv {
                best_gcv = score;
                best_subset = active.clone();
            }
        }
        if active.len() == 1 {
            break;
        }
        // the intercept (position 0) is never removed
        let mut drop = 1;
        let mut drop_cost = f64::INFINITY;
        for k in 1..active.len() {
            let cost = beta[k] * beta[k] / inv[(k, k)];
            if cost < drop_cost {
                drop_cost = cost;
                drop = k;
            }
        }
        active.remove(drop);
    }
    best_subset
}

/// Least-squares coefficients on the given columns.
fn least_squares(columns: &[&Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let m = columns.len();
    let b = DMatrix::from_fn(n, m, |i, j| columns[j][i]);
    let svd = b.svd(true, true);
    let yv = DVector::from_column_slice(y);
    let tol = svd.singular_values.iter().cloned().fold(0.0, f64::max) * (n.max(m) as f64) * f64::EPSILON;
    svd.solve(&yv, tol).map(|v| v.iter().copied().collect()).unwrap_or_else(|_| vec![0.0; m])
}

pub fn fit_mars(x: &Matrix, y: &[f64], degree: usize, nprune: usize) -> Result<MarsFit> {
    let fwd = check_and_forward(x, y, degree, nprune)?;
    Ok(prune(&fwd, y, degree, nprune))
}

/// Fits several `nprune` values sharing one forward pass.
pub fn fit_mars_prunings(x: &Matrix, y: &[f64], degree: usize, nprunes: &[usize]) -> Result<Vec<MarsFit>> {
    let min = nprunes.iter().copied().min().unwrap_or(2);
    let fwd = check_and_forward(x, y, degree, min)?;
    Ok(nprunes.iter().map(|&np| prune(&fwd, y, degree, np)).collect())
}

fn check_and_forward(x: &Matrix, y: &[f64], degree: usize, nprune: usize) -> Result<Forward> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::InvalidInput("mars needs one target per row".into()));
    }
    if n < 4 {
        return Err(Error::InvalidInput(format!("mars needs at least 4 rows, got {n}")));
    }
    if !(1..=2).contains(&degree) || nprune < 2 {
        return Err(Error::InvalidInput(format!("mars needs degree in {{1, 2}} and nprune >= 2 (got {degree}, {nprune})")));
    }
    Ok(forward_pass(x, y, degree))
}

fn prune(fwd: &Forward, y: &[f64], degree: usize, nprune: usize) -> MarsFit {
    let keep = backward_pass(&fwd.columns, y, nprune, gcv_penalty(degree));
    let cols: Vec<&Vec<f64>> = keep.iter().map(|&k| &fwd.columns[k]).collect();
    let coefficients = least_squares(&cols, y);
    let rss: f64 = (0..y.len())
        .map(|i| {
            let f: f64 = cols.iter().zip(&coefficients).map(|(c, b)| c[i] * b).sum();
            (y[i] - f).powi(2)
        })
        .sum();
    MarsFit {
        degree,
        nprune,
        terms: keep.iter().map(|&k| fwd.terms[k].clone()).collect(),
        coefficients,
        gcv: gcv(rss, y.len(), keep.len(), gcv_penalty(degree)),
        rss,
    }
}
