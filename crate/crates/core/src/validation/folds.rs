use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Seed;

pub const INNER_FOLDS: usize = 5;
pub const INNER_REPEATS: usize = 2;
/// Below this many training rows the inner loop falls back to leave-one-out.
pub const MIN_INNER_ROWS: usize = 10;

/// How outer test folds are formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterScheme {
    /// One fold per study: every row of a study is held out together.
    #[default]
    LeaveOneStudyOut,
    /// Rows shuffled into `k` folds, ignoring study membership.
    ShuffledKFold { k: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterFold {
    pub index: usize,
    /// Held-out study id, or `fold-<k>` for shuffled folds.
    pub label: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub inner: Vec<InnerSplit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub scheme: OuterScheme,
    pub seed: Seed,
    pub outer: Vec<OuterFold>,
}

/// Leave-one-study-out outer folds with 5 × 2 inner folds on each outer-train.
pub fn make_folds(study_ids: &[String], seed: Seed) -> Result<FoldPlan> {
    make_folds_with(study_ids, OuterScheme::LeaveOneStudyOut, seed)
}

pub fn make_folds_with(study_ids: &[String], scheme: OuterScheme, seed: Seed) -> Result<FoldPlan> {
    let n = study_ids.len();
    let tests: Vec<(String, Vec<usize>)> = match scheme {
        OuterScheme::LeaveOneStudyOut => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, s) in study_ids.iter().enumerate() {
                groups.entry(s.as_str()).or_default().push(i);
            }
            if groups.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "leave-one-study-out needs at least 2 studies, found {}",
                    groups.len()
                )));
            }
            groups.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
        }
        OuterScheme::ShuffledKFold { k } => {
            if k < 2 || k > n {
                return Err(Error::InvalidInput(format!("shuffled k-fold needs 2 <= k <= {n}, got {k}")));
            }
            partition(&(0..n).collect::<Vec<_>>(), k, seed.derive("outer-shuffle", 0))
                .into_iter()
                .enumerate()
                .map(|(f, mut rows)| {
                    rows.sort_unstable();
                    (format!("fold-{}", f + 1), rows)
                })
                .collect()
        }
    };
    let outer = tests
        .into_iter()
        .enumerate()
        .map(|(index, (label, test))| {
            let mut held = vec![false; n];
            test.iter().for_each(|&i| held[i] = true);
            let train: Vec<usize> = (0..n).filter(|&i| !held[i]).collect();
            let inner = inner_splits(&train, seed.derive("inner-folds", index as u64));
            OuterFold { index, label, train, test, inner }
        })
        .collect();
    Ok(FoldPlan { scheme, seed, outer })
}

/// Seeded random partition of `rows` into `k` folds of near-equal size.
fn partition(rows: &[usize], k: usize, seed: Seed) -> Vec<Vec<usize>> {
    let mut shuffled = rows.to_vec();
    shuffled.shuffle(&mut seed.rng());
    let mut folds = vec![Vec::new(); k];
    for (pos, r) in shuffled.into_iter().enumerate() {
        folds[pos % k].push(r);
    }
    folds
}

/// Repeated k-fold splits of `rows` (5 folds, 2 repeats); leave-one-out
/// when there are fewer than ten rows.
pub fn inner_splits(rows: &[usize], seed: Seed) -> Vec<InnerSplit> {
    if rows.len() < MIN_INNER_ROWS {
        log::warn!("only {} training rows; inner tuning uses leave-one-out", rows.len());
        return (0..rows.len())
            .map(|v| InnerSplit {
                train: rows.iter().enumerate().filter(|&(i, _)| i != v).map(|(_, &r)| r).collect(),
                validation: vec![rows[v]],
            })
            .collect();
    }
    let mut splits = Vec::with_capacity(INNER_FOLDS * INNER_REPEATS);
    for repeat in 0..INNER_REPEATS {
        let folds = partition(rows, INNER_FOLDS, seed.derive("repeat", repeat as u64));
        for (f, fold) in folds.iter().enumerate() {
            let mut validation = fold.clone();
            validation.sort_unstable();
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, rows)| rows.iter().copied())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            splits.push(InnerSplit { train, validation });
        }
    }
    splits
}
