use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{DqiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum KnnTarget<'a> {
    Classes(&'a [usize], usize),
    Values(&'a [f64]),
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Indices of the `k` training rows nearest to `query`, ordered by
/// (distance, index).
pub fn nearest(train: &[Vec<f64>], query: &[f64], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = train.iter().enumerate().map(|(i, row)| (squared_distance(row, query), i)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d.into_iter().map(|(_, i)| i).collect()
}

/// Majority vote (ties to the smallest class id, returned as `f64`) or
/// neighbour mean.
pub fn predict_knn(train: &[Vec<f64>], target: KnnTarget, query: &[f64], k: usize) -> Result<f64> {
    if k < 1 {
        return Err(DqiError::InvalidConfig("knn needs k >= 1".into()));
    }
    if k > train.len() {
        return Err(DqiError::InsufficientData(format!("knn with k = {k} needs at least {k} training rows, found {}", train.len())));
    }
    let nb = nearest(train, query, k);
    Ok(match target {
        KnnTarget::Classes(y, n_classes) => {
            let mut votes = vec![0usize; n_classes];
            for &i in &nb {
                votes[y[i]] += 1;
            }
            let mut best = 0;
            for (c, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = c;
                }
            }
            best as f64
        }
        KnnTarget::Values(y) => nb.iter().map(|&i| y[i]).sum::<f64>() / k as f64,
    })
}
