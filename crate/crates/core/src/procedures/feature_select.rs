use std::collections::HashMap;

use indexmap::IndexMap;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{resolve_columns, Diagnostics, ProcedureResult, ProcedureSpec, Target};
use crate::error::{DqiError, Result};
use crate::tabular::{mean_and_stddev, quantile_r7, CellValue, DType, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FeatureSelectMethod {
    /// Drop numeric features whose sample variance is below `t`.
    VarianceThreshold { t: f64 },
    CorrelationFilter { r_max: f64 },
    MutualInfoTopK { k: usize, bins: usize },
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Assigns each value to one of `bins` equal-frequency bins. The inner
/// edges are the quantiles `i / bins`, and a value's bin is the number of
/// edges strictly below it.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    if values.is_empty() || bins < 2 {
        return vec![0; values.len()];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..bins).map(|i| quantile_r7(&sorted, i as f64 / bins as f64)).collect();
    values.iter().map(|&v| edges.iter().filter(|&&e| e < v).count()).collect()
}

/// Plug-in mutual information of two discrete samples, in bits.
pub fn mutual_information_bits(x: &[usize], y: &[usize]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut px: HashMap<usize, usize> = HashMap::new();
    let mut py: HashMap<usize, usize> = HashMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_default() += 1;
        *px.entry(a).or_default() += 1;
        *py.entry(b).or_default() += 1;
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(a, b), &c)| {
            let pxy = c as f64 / n;
            pxy * (pxy * n * n / (px[&a] as f64 * py[&b] as f64)).log2()
        })
        .sum();
    mi.max(0.0)
}

/// Codes categorical cells in first-seen order.
fn codes<'a>(cells: impl Iterator<Item = &'a CellValue>) -> Vec<Option<usize>> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    cells
        .map(|c| {
            c.render().map(|s| {
                let next = seen.len();
                *seen.entry(s.into_owned()).or_insert(next)
            })
        })
        .collect()
}

/// Numeric encoding of the label used for correlations.
fn label_numeric(ds: &Dataset, idx: usize) -> Vec<Option<f64>> {
    match ds.columns()[idx].dtype {
        DType::Numeric | DType::Boolean | DType::Timestamp => ds.column(idx).map(CellValue::as_f64).collect(),
        _ => codes(ds.column(idx)).into_iter().map(|c| c.map(|v| v as f64)).collect(),
    }
}

fn discrete(ds: &Dataset, idx: usize, bins: usize) -> Vec<Option<usize>> {
    if ds.columns()[idx].dtype == DType::Numeric {
        let observed = ds.numeric_values(idx);
        let values: Vec<f64> = observed.iter().map(|&(_, v)| v).collect();
        let mut out = vec![None; ds.row_count()];
        for (&(r, _), b) in observed.iter().zip(equal_frequency_bins(&values, bins)) {
            out[r] = Some(b);
        }
        out
    } else {
        codes(ds.column(idx))
    }
}

fn paired<A: Copy, B: Copy>(a: &[Option<A>], b: &[Option<B>]) -> (Vec<A>, Vec<B>) {
    a.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip()
}

pub(super) fn run(
    ds: &Dataset,
    target: &Target,
    method: &FeatureSelectMethod,
    label: Option<&str>,
    spec: ProcedureSpec,
) -> Result<ProcedureResult> {
    let label = label
        .or(ds.label_column())
        .ok_or_else(|| DqiError::spec("feature selection needs a label column"))?;
    let label_idx = ds.column_index(label)?;
    let applicable = |c: usize| match method {
        FeatureSelectMethod::MutualInfoTopK { .. } => matches!(ds.columns()[c].dtype, DType::Numeric | DType::Categorical | DType::Boolean),
        _ => ds.columns()[c].dtype == DType::Numeric,
    };
    let candidates = resolve_columns(ds, target, |c| c != label_idx && applicable(c))?;
    for &c in &candidates {
        if c == label_idx {
            return Err(DqiError::LabelProtected(label.to_string()));
        }
        if !applicable(c) {
            let col = &ds.columns()[c];
            return Err(DqiError::incompatible(&col.name, format!("feature selection does not apply to {} columns", col.dtype.as_str())));
        }
    }
    let name = |c: usize| ds.columns()[c].name.clone();
    let mut scores = IndexMap::new();
    let mut dropped_idx: Vec<usize> = Vec::new();

    match *method {
        FeatureSelectMethod::VarianceThreshold { t } => {
            for &c in &candidates {
                let values: Vec<f64> = ds.numeric_values(c).into_iter().map(|(_, v)| v).collect();
                let var = if values.is_empty() { 0.0 } else { mean_and_stddev(&values).1.powi(2) };
                scores.insert(name(c), var);
                if var < t {
                    dropped_idx.push(c);
                }
            }
        }
        FeatureSelectMethod::CorrelationFilter { r_max } => {
            let y = label_numeric(ds, label_idx);
            let cols: Vec<Vec<Option<f64>>> = candidates.iter().map(|&c| ds.column(c).map(CellValue::as_f64).collect()).collect();
            let to_label: Vec<f64> = cols
                .iter()
                .map(|x| {
                    let (a, b) = paired(x, &y);
                    pearson(&a, &b).abs()
                })
                .collect();
            for (&c, &r) in candidates.iter().zip(&to_label) {
                scores.insert(name(c), r);
            }
            let mut gone = vec![false; candidates.len()];
            for i in 0..candidates.len() {
                for j in i + 1..candidates.len() {
                    if gone[i] || gone[j] {
                        continue;
                    }
                    let (a, b) = paired(&cols[i], &cols[j]);
                    if pearson(&a, &b).abs() > r_max {
                        let loser = if to_label[i] < to_label[j] { i } else { j };
                        gone[loser] = true;
                    }
                }
            }
            dropped_idx = candidates.iter().zip(&gone).filter(|(_, g)| **g).map(|(&c, _)| c).collect();
        }
        FeatureSelectMethod::MutualInfoTopK { k, bins } => {
            if k == 0 || k > candidates.len() {
                return Err(DqiError::spec(format!("k = {k} must be between 1 and the {} candidate features", candidates.len())));
            }
            if bins < 2 {
                return Err(DqiError::spec("mutual information needs at least 2 bins"));
            }
            let y = discrete(ds, label_idx, bins);
            let mut ranked: Vec<(usize, f64)> = candidates
                .iter()
                .map(|&c| {
                    let (a, b) = paired(&discrete(ds, c, bins), &y);
                    (c, mutual_information_bits(&a, &b))
                })
                .collect();
            for &(c, mi) in &ranked {
                scores.insert(name(c), mi);
            }
            // Stable sort keeps column order among equal scores.
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
            dropped_idx = ranked[k..].iter().map(|&(c, _)| c).collect();
            dropped_idx.sort_unstable();
        }
    }

    let kept_cols: Vec<usize> = (0..ds.column_count()).filter(|c| !dropped_idx.contains(c)).collect();
    let columns = kept_cols.iter().map(|&c| ds.columns()[c].clone()).collect();
    let rows = ds
        .rows()
        .iter()
        .map(|row| kept_cols.iter().map(|&c| row[c].clone()).collect())
        .collect();
    let output = ds.derive(columns, rows, ds.label_column().map(str::to_string))?;
    let kept_rows: Vec<usize> = (0..ds.row_count()).collect();
    let diagnostics = Diagnostics::FeatureSelect {
        dropped: dropped_idx.iter().map(|&c| name(c)).collect(),
        kept: candidates.iter().filter(|c| !dropped_idx.contains(c)).map(|&c| name(c)).collect(),
        scores,
    };
    Ok(ProcedureResult::build(spec, ds, output, &kept_rows, &kept_cols, diagnostics))
}
