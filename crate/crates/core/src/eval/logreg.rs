//! L2-regularized logistic regression fit by full-batch gradient descent.
//! More than two classes are handled one-vs-rest.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::check_finite;
use crate::error::{DqiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

/// One binary model per class; a two-class problem keeps a single model
/// scoring class 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LogReg {
    pub n_classes: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Mean logistic loss plus `l2 / 2 * |w|^2`; the bias is not penalized.
/// `y` holds 0/1 targets.
pub fn logistic_loss(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.len() as f64;
    let data: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &t)| {
            let z = dot(w, row) + b;
            // log(1 + e^z) - t z, written to stay finite for large |z|.
            z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z
        })
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of [`logistic_loss`] with respect to `(w, b)`.
pub fn logistic_gradient(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, l2: f64) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut gw: Vec<f64> = w.iter().map(|v| l2 * v).collect();
    let mut gb = 0.0;
    for (row, &t) in x.iter().zip(y) {
        let r = (sigmoid(dot(w, row) + b) - t) / n;
        for (g, xi) in gw.iter_mut().zip(row) {
            *g += r * xi;
        }
        gb += r;
    }
    (gw, gb)
}

fn fit_binary(x: &[Vec<f64>], y: &[f64], params: &LogRegParams) -> (Vec<f64>, f64) {
    let d = x.first().map_or(0, Vec::len);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..params.epochs {
        let (gw, gb) = logistic_gradient(x, y, &w, b, params.l2);
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= params.learning_rate * gi;
        }
        b -= params.learning_rate * gb;
    }
    (w, b)
}

/// `y` holds class ids; at least two distinct ids must occur.
pub fn train_logreg(x: &[Vec<f64>], y: &[usize], params: &LogRegParams) -> Result<LogReg> {
    if x.is_empty() {
        return Err(DqiError::InsufficientData("logistic regression needs at least one row".into()));
    }
    check_finite(x)?;
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; n_classes];
    for &c in y {
        present[c] = true;
    }
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(DqiError::InsufficientData("logistic regression needs at least two classes".into()));
    }
    let one_vs = |c: usize| -> Vec<f64> { y.iter().map(|&t| f64::from(u8::from(t == c))).collect() };
    let (weights, biases) = if n_classes == 2 {
        let (w, b) = fit_binary(x, &one_vs(1), params);
        (vec![w], vec![b])
    } else {
        (0..n_classes).map(|c| fit_binary(x, &one_vs(c), params)).unzip()
    };
    Ok(LogReg { n_classes, weights, biases })
}

impl LogReg {
    /// Probability of class 1 (two classes) or of each class against the rest.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        self.weights.iter().zip(&self.biases).map(|(w, b)| sigmoid(dot(w, row) + b)).collect()
    }

    /// Highest score wins; ties go to the smallest class id.
    pub fn predict(&self, row: &[f64]) -> usize {
        let s = self.scores(row);
        if self.n_classes == 2 {
            return usize::from(s[0] > 0.5);
        }
        let mut best = 0;
        for (c, v) in s.iter().enumerate() {
            if *v > s[best] {
                best = c;
            }
        }
        best
    }
}
