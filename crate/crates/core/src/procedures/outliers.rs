//! Outlier detection (read-only) and treatment (a procedure).

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{require_numeric, Diagnostics, Procedure, ProcedureResult, ProcedureSpec};
use crate::error::{DqiError, Result};
use crate::tabular::{mean_and_stddev, quantile_r7, CellValue, Dataset, SnapshotId};

/// Added to mean reachability distances so duplicate points keep a finite
/// local reachability density.
const LRD_EPSILON: f64 = 1e-10;

/// Fence multiplier used for clipping when detection was not IQR-based.
const DEFAULT_FENCE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum OutlierMethod {
    Zscore {
        #[serde(default = "default_t")]
        t: f64,
    },
    Iqr {
        #[serde(default = "default_f")]
        f: f64,
    },
    Lof {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_f")]
        threshold: f64,
    },
}

fn default_t() -> f64 {
    3.0
}
fn default_f() -> f64 {
    1.5
}
fn default_k() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum OutlierAction {
    ToMissing,
    ClipToFence,
    RemoveRows,
}

impl OutlierAction {
    pub fn as_str(self) -> &'static str {
        match self {
            OutlierAction::ToMissing => "to_missing",
            OutlierAction::ClipToFence => "clip_to_fence",
            OutlierAction::RemoveRows => "remove_rows",
        }
    }
}

/// Rows flagged on one column of one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OutlierFlags {
    pub snapshot_id: SnapshotId,
    pub column: String,
    pub method: OutlierMethod,
    /// Ascending row indices.
    pub rows: Vec<usize>,
    /// Rows with an observed value (the denominator for outlier freedom).
    pub eligible: usize,
    /// Lower and upper IQR fences of the flagged distribution.
    pub fences: [f64; 2],
    pub warnings: Vec<String>,
}

pub fn detect_outliers(ds: &Dataset, column: &str, method: &OutlierMethod) -> Result<OutlierFlags> {
    let idx = ds.column_index(column)?;
    require_numeric(ds, idx)?;
    let observed = ds.numeric_values(idx);
    if observed.len() < 3 {
        return Err(DqiError::InsufficientData(format!(
            "outlier detection on `{column}` needs at least 3 observed values, found {}",
            observed.len()
        )));
    }
    let values: Vec<f64> = observed.iter().map(|&(_, v)| v).collect();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_r7(&sorted, 0.25);
    let q3 = quantile_r7(&sorted, 0.75);
    let fence_factor = match method {
        OutlierMethod::Iqr { f } => *f,
        _ => DEFAULT_FENCE,
    };
    let fences = [q1 - fence_factor * (q3 - q1), q3 + fence_factor * (q3 - q1)];

    let mut warnings = Vec::new();
    let flagged: Vec<bool> = match *method {
        OutlierMethod::Zscore { t } => {
            let (mean, sd) = mean_and_stddev(&values);
            if sd == 0.0 {
                warnings.push(format!("`{column}` has zero standard deviation; z-scores are undefined"));
                vec![false; values.len()]
            } else {
                values.iter().map(|v| (v - mean).abs() / sd > t).collect()
            }
        }
        OutlierMethod::Iqr { .. } => values.iter().map(|&v| v < fences[0] || v > fences[1]).collect(),
        OutlierMethod::Lof { k, threshold } => {
            if k == 0 {
                return Err(DqiError::spec("lof needs k >= 1"));
            }
            if values.len() < k + 1 {
                return Err(DqiError::InsufficientData(format!(
                    "lof with k = {k} needs at least {} observed values, found {}",
                    k + 1,
                    values.len()
                )));
            }
            lof_scores(&values, k).into_iter().map(|s| s > threshold).collect()
        }
    };
    let rows = observed
        .iter()
        .zip(flagged)
        .filter(|(_, f)| *f)
        .map(|(&(r, _), _)| r)
        .collect();
    Ok(OutlierFlags {
        snapshot_id: ds.snapshot_id().clone(),
        column: column.to_string(),
        method: *method,
        rows,
        eligible: values.len(),
        fences,
        warnings,
    })
}

/// Local outlier factor of every point of a one-dimensional sample.
///
/// The neighbourhood of a point is exactly its `k` nearest other points,
/// ordered by (distance, position in `values`).
pub fn lof_scores(values: &[f64], k: usize) -> Vec<f64> {
    let n = values.len();
    assert!(k >= 1 && n > k, "lof needs n > k >= 1");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut pos = vec![0; n];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    // Sorted positions where each run of equal values starts and ends.
    let mut run_start = vec![0; n];
    let mut run_end = vec![0; n];
    for p in 1..n {
        run_start[p] = if values[order[p]] == values[order[p - 1]] { run_start[p - 1] } else { p };
    }
    run_end[n - 1] = n - 1;
    for p in (0..n - 1).rev() {
        run_end[p] = if values[order[p]] == values[order[p + 1]] { run_end[p + 1] } else { p };
    }

    let mut neighbours: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut kdist = vec![0.0; n];
    for i in 0..n {
        let (nb, dk) = k_nearest(values, &order, &run_start, &run_end, pos[i], k);
        neighbours.push(nb);
        kdist[i] = dk;
    }
    let lrd: Vec<f64> = (0..n)
        .map(|i| {
            let reach: f64 = neighbours[i]
                .iter()
                .map(|&o| kdist[o].max((values[i] - values[o]).abs()))
                .sum::<f64>()
                / k as f64;
            1.0 / reach.max(LRD_EPSILON)
        })
        .collect();
    (0..n)
        .map(|i| neighbours[i].iter().map(|&o| lrd[o]).sum::<f64>() / k as f64 / lrd[i])
        .collect()
}

fn k_nearest(values: &[f64], order: &[usize], run_start: &[usize], run_end: &[usize], p: usize, k: usize) -> (Vec<usize>, f64) {
    let n = order.len();
    let v = values[order[p]];
    let dist = |q: usize| (values[order[q]] - v).abs();
    // Two-pointer sweep to find the k-th smallest distance.
    let (mut l, mut r) = (p as isize - 1, p + 1);
    let mut dk = 0.0;
    for _ in 0..k {
        let take_left = match (l >= 0, r < n) {
            (true, true) => dist(l as usize) <= dist(r),
            (true, false) => true,
            (false, _) => false,
        };
        if take_left {
            dk = dist(l as usize);
            l -= 1;
        } else {
            dk = dist(r);
            r += 1;
        }
    }
    // Points strictly closer than dk are always neighbours; the remainder is
    // drawn from the points at exactly dk, lowest original index first.
    let mut strict = Vec::with_capacity(k);
    let mut lo = p as isize - 1;
    while lo >= 0 && dist(lo as usize) < dk {
        strict.push(order[lo as usize]);
        lo -= 1;
    }
    let mut hi = p + 1;
    while hi < n && dist(hi) < dk {
        strict.push(order[hi]);
        hi += 1;
    }
    let need = k - strict.len();
    let mut ties: Vec<usize> = Vec::new();
    if dk == 0.0 {
        ties.extend((run_start[p]..=run_end[p]).filter(|&q| q != p).take(need + 1).map(|q| order[q]));
    } else {
        if lo >= 0 && dist(lo as usize) == dk {
            let lo = lo as usize;
            ties.extend((run_start[lo]..=lo).take(need).map(|q| order[q]));
        }
        if hi < n && dist(hi) == dk {
            ties.extend((hi..=run_end[hi]).take(need).map(|q| order[q]));
        }
    }
    ties.sort_unstable();
    strict.extend(ties.into_iter().take(need));
    (strict, dk)
}

/// Applies a treatment to previously detected flags.
pub fn treat_outliers(ds: &Dataset, flags: &OutlierFlags, action: OutlierAction) -> Result<ProcedureResult> {
    let spec = Procedure::Outlier {
        column: flags.column.clone(),
        method: flags.method,
        action,
    }
    .to_spec();
    treat(ds, flags, action, spec)
}

pub(super) fn treat(ds: &Dataset, flags: &OutlierFlags, action: OutlierAction, spec: ProcedureSpec) -> Result<ProcedureResult> {
    if &flags.snapshot_id != ds.snapshot_id() {
        return Err(DqiError::StaleFlags {
            flagged: flags.snapshot_id.to_string(),
            current: ds.snapshot_id().to_string(),
        });
    }
    let idx = ds.column_index(&flags.column)?;
    let all_cols: Vec<usize> = (0..ds.column_count()).collect();
    let label = ds.label_column().map(str::to_string);
    let diagnostics = Diagnostics::Outlier {
        column: flags.column.clone(),
        flagged_rows: flags.rows.clone(),
        fences: flags.fences,
        warnings: flags.warnings.clone(),
    };
    match action {
        OutlierAction::RemoveRows => {
            let kept: Vec<usize> = (0..ds.row_count()).filter(|r| flags.rows.binary_search(r).is_err()).collect();
            if kept.is_empty() {
                return Err(DqiError::EmptyResult);
            }
            let rows = kept.iter().map(|&r| ds.rows()[r].clone()).collect();
            let output = ds.derive(ds.columns().to_vec(), rows, label)?;
            Ok(ProcedureResult::build(spec, ds, output, &kept, &all_cols, diagnostics))
        }
        OutlierAction::ToMissing | OutlierAction::ClipToFence => {
            let mut rows = ds.rows().to_vec();
            for &r in &flags.rows {
                let cell = &mut rows[r][idx];
                *cell = match action {
                    OutlierAction::ToMissing => CellValue::Missing,
                    _ => {
                        let v = cell.as_f64().expect("flagged cells are observed");
                        CellValue::Number(v.clamp(flags.fences[0], flags.fences[1]))
                    }
                };
            }
            let output = ds.derive(ds.columns().to_vec(), rows, label)?;
            let all_rows: Vec<usize> = (0..ds.row_count()).collect();
            Ok(ProcedureResult::build(spec, ds, output, &all_rows, &all_cols, diagnostics))
        }
    }
}
