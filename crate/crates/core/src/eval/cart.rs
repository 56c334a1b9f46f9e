//! Binary decision trees (CART) with Gini or mean-squared-error splits.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::check_finite;
use crate::error::{DqiError, Result};

/// Improvements smaller than this are treated as ties.
const IMPURITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_split: usize,
    /// Defaults to Gini for classification and MSE for regression.
    pub criterion: Option<Criterion>,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            max_depth: 8,
            min_split: 2,
            criterion: None,
        }
    }
}

/// Training targets: class ids with the class count, or real values.
#[derive(Debug, Clone, Copy)]
pub enum CartTarget<'a> {
    Classes(&'a [usize], usize),
    Values(&'a [f64]),
}

impl CartTarget<'_> {
    fn len(&self) -> usize {
        match self {
            CartTarget::Classes(y, _) => y.len(),
            CartTarget::Values(y) => y.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    /// Rows with `x <= threshold` go left.
    pub threshold: f64,
    /// Size-weighted impurity of the two children.
    pub impurity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub root: Node,
}

/// Running sufficient statistics of a node's targets.
#[derive(Clone)]
enum Acc {
    Counts(Vec<usize>, usize),
    Moments { n: usize, sum: f64, sumsq: f64 },
}

impl Acc {
    fn empty(target: &CartTarget) -> Acc {
        match target {
            CartTarget::Classes(_, k) => Acc::Counts(vec![0; *k], 0),
            CartTarget::Values(_) => Acc::Moments { n: 0, sum: 0.0, sumsq: 0.0 },
        }
    }

    fn of(target: &CartTarget, rows: &[usize]) -> Acc {
        let mut a = Acc::empty(target);
        for &r in rows {
            a.add(target, r, 1);
        }
        a
    }

    fn add(&mut self, target: &CartTarget, row: usize, sign: i8) {
        match (self, target) {
            (Acc::Counts(c, n), CartTarget::Classes(y, _)) => {
                if sign > 0 {
                    c[y[row]] += 1;
                    *n += 1;
                } else {
                    c[y[row]] -= 1;
                    *n -= 1;
                }
            }
            (Acc::Moments { n, sum, sumsq }, CartTarget::Values(y)) => {
                let v = y[row];
                if sign > 0 {
                    *n += 1;
                    *sum += v;
                    *sumsq += v * v;
                } else {
                    *n -= 1;
                    *sum -= v;
                    *sumsq -= v * v;
                }
            }
            _ => unreachable!("accumulator matches target kind"),
        }
    }

    fn n(&self) -> usize {
        match self {
            Acc::Counts(_, n) | Acc::Moments { n, .. } => *n,
        }
    }

    fn impurity(&self) -> f64 {
        match self {
            Acc::Counts(c, n) => {
                if *n == 0 {
                    return 0.0;
                }
                let n = *n as f64;
                1.0 - c.iter().map(|&k| (k as f64 / n).powi(2)).sum::<f64>()
            }
            Acc::Moments { n, sum, sumsq } => {
                if *n == 0 {
                    return 0.0;
                }
                let n = *n as f64;
                (sumsq / n - (sum / n).powi(2)).max(0.0)
            }
        }
    }

    /// Majority class (ties to the smallest id) or mean.
    fn leaf(&self) -> f64 {
        match self {
            Acc::Counts(c, _) => {
                let mut best = 0;
                for (i, &k) in c.iter().enumerate() {
                    if k > c[best] {
                        best = i;
                    }
                }
                best as f64
            }
            Acc::Moments { n, sum, .. } => sum / *n as f64,
        }
    }
}

/// Best split of `rows` over every feature and every midpoint between
/// consecutive distinct values. Ties keep the lowest feature, then the
/// lowest threshold. `None` when no split separates the rows.
pub fn best_split(x: &[Vec<f64>], target: CartTarget, rows: &[usize]) -> Option<Split> {
    let d = x.first().map_or(0, Vec::len);
    let total = Acc::of(&target, rows);
    let n = rows.len() as f64;
    let mut best: Option<Split> = None;
    let mut order = rows.to_vec();
    for f in 0..d {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left = Acc::empty(&target);
        let mut right = total.clone();
        for i in 0..order.len() - 1 {
            left.add(&target, order[i], 1);
            right.add(&target, order[i], -1);
            let (lo, hi) = (x[order[i]][f], x[order[i + 1]][f]);
            if lo == hi {
                continue;
            }
            let impurity = (left.n() as f64 * left.impurity() + right.n() as f64 * right.impurity()) / n;
            if best.is_none_or(|b| impurity < b.impurity - IMPURITY_EPS) {
                best = Some(Split {
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                    impurity,
                });
            }
        }
    }
    best
}

fn build(x: &[Vec<f64>], target: CartTarget, rows: &[usize], depth: usize, params: &CartParams) -> Node {
    let acc = Acc::of(&target, rows);
    let parent = acc.impurity();
    if depth >= params.max_depth || rows.len() < params.min_split.max(2) || parent <= IMPURITY_EPS {
        return Node::Leaf(acc.leaf());
    }
    match best_split(x, target, rows) {
        Some(s) if s.impurity < parent - IMPURITY_EPS => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][s.feature] <= s.threshold);
            Node::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: Box::new(build(x, target, &l, depth + 1, params)),
                right: Box::new(build(x, target, &r, depth + 1, params)),
            }
        }
        _ => Node::Leaf(acc.leaf()),
    }
}

pub fn train_cart(x: &[Vec<f64>], target: CartTarget, params: &CartParams) -> Result<Tree> {
    if x.is_empty() || target.len() != x.len() {
        return Err(DqiError::InsufficientData("decision tree needs at least one labelled row".into()));
    }
    check_finite(x)?;
    let rows: Vec<usize> = (0..x.len()).collect();
    Ok(Tree {
        root: build(x, target, &rows, 0, params),
    })
}

impl Tree {
    /// Class id (as `f64`) or regression value.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}
