//! Distribution drift between two snapshots: two-sample Kolmogorov-Smirnov
//! tests on ordered columns and total-variation distance on categories.

use std::collections::HashMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{DqiError, Result};
use crate::tabular::{DType, Dataset, SnapshotId};

pub const DEFAULT_ALPHA: f64 = 0.05;
/// Advisory total-variation distance above which a categorical column is
/// flagged.
pub const TV_THRESHOLD: f64 = 0.1;

const SERIES_TOLERANCE: f64 = 1e-12;
const SERIES_MAX_TERMS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct KsResult {
    pub column: String,
    pub n1: usize,
    pub n2: usize,
    pub d_stat: f64,
    pub p_value: f64,
    pub drifted: bool,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CategoricalDrift {
    pub column: String,
    pub tv_distance: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Added,
    Removed,
    DtypeChanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StructuralChange {
    pub column: String,
    pub change: ChangeKind,
    pub before: Option<DType>,
    pub after: Option<DType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SkippedColumn {
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DriftReport {
    pub before: SnapshotId,
    pub after: SnapshotId,
    pub alpha: f64,
    pub ks: Vec<KsResult>,
    pub categorical: Vec<CategoricalDrift>,
    pub structural: Vec<StructuralChange>,
    pub skipped: Vec<SkippedColumn>,
    /// Share of tested columns flagged as drifted (0 when none were tested).
    pub drift_penalty: f64,
}

impl DriftReport {
    pub fn drifted_columns(&self) -> Vec<&str> {
        self.ks.iter().filter(|r| r.drifted).map(|r| r.column.as_str()).collect()
    }
}

/// Largest absolute gap between the two empirical CDFs.
pub fn ks_statistic(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(DqiError::EmptySample);
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] == t {
            i += 1;
        }
        while j < b.len() && b[j] == t {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    Ok(d.min(1.0))
}

/// Asymptotic two-sided p-value with the Stephens small-sample correction.
///
/// The alternating series is summed until a term drops below 1e-12, for at
/// most 100 terms. It only fails to settle for very small `lambda`, where the
/// true value is indistinguishable from 1, so 1 is returned.
pub fn ks_pvalue(d: f64, n1: usize, n2: usize) -> f64 {
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=SERIES_MAX_TERMS {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < SERIES_TOLERANCE {
            return (2.0 * sum).clamp(0.0, 1.0);
        }
        sign = -sign;
    }
    1.0
}

pub fn ks_test(column: &str, x: &[f64], y: &[f64], alpha: f64) -> Result<KsResult> {
    let d_stat = ks_statistic(x, y)?;
    let p_value = ks_pvalue(d_stat, x.len(), y.len());
    Ok(KsResult {
        column: column.to_string(),
        n1: x.len(),
        n2: y.len(),
        d_stat,
        p_value,
        drifted: p_value < alpha,
        alpha,
    })
}

/// Half the L1 distance between the category frequency vectors of two
/// samples of rendered values.
pub fn total_variation(x: &[String], y: &[String]) -> f64 {
    if x.is_empty() && y.is_empty() {
        return 0.0;
    }
    let mut freq: HashMap<&str, (f64, f64)> = HashMap::new();
    for v in x {
        freq.entry(v).or_default().0 += 1.0 / x.len() as f64;
    }
    for v in y {
        freq.entry(v).or_default().1 += 1.0 / y.len() as f64;
    }
    if x.is_empty() || y.is_empty() {
        return 1.0;
    }
    (freq.values().map(|(p, q)| (p - q).abs()).sum::<f64>() / 2.0).min(1.0)
}

fn ordered(dtype: DType) -> bool {
    matches!(dtype, DType::Numeric | DType::Timestamp)
}

pub fn drift_report(before: &Dataset, after: &Dataset, alpha: f64) -> Result<DriftReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DqiError::InvalidConfig(format!("alpha {alpha} outside (0, 1)")));
    }
    let mut ks = Vec::new();
    let mut categorical = Vec::new();
    let mut structural = Vec::new();
    let mut skipped = Vec::new();
    let mut shared = 0;

    for (bi, bcol) in before.columns().iter().enumerate() {
        let Ok(ai) = after.column_index(&bcol.name) else {
            structural.push(StructuralChange {
                column: bcol.name.clone(),
                change: ChangeKind::Removed,
                before: Some(bcol.dtype),
                after: None,
            });
            continue;
        };
        shared += 1;
        let acol = &after.columns()[ai];
        if acol.dtype != bcol.dtype {
            structural.push(StructuralChange {
                column: bcol.name.clone(),
                change: ChangeKind::DtypeChanged,
                before: Some(bcol.dtype),
                after: Some(acol.dtype),
            });
            continue;
        }
        if ordered(bcol.dtype) {
            let x: Vec<f64> = before.column(bi).filter_map(|c| c.as_f64()).collect();
            let y: Vec<f64> = after.column(ai).filter_map(|c| c.as_f64()).collect();
            match ks_test(&bcol.name, &x, &y, alpha) {
                Ok(r) => ks.push(r),
                Err(DqiError::EmptySample) => skipped.push(SkippedColumn {
                    column: bcol.name.clone(),
                    reason: "no observed values in one snapshot".into(),
                }),
                Err(e) => return Err(e),
            }
        } else {
            let x: Vec<String> = before.column(bi).filter_map(|c| c.render().map(|s| s.into_owned())).collect();
            let y: Vec<String> = after.column(ai).filter_map(|c| c.render().map(|s| s.into_owned())).collect();
            let tv = total_variation(&x, &y);
            categorical.push(CategoricalDrift {
                column: bcol.name.clone(),
                tv_distance: tv,
                flagged: tv > TV_THRESHOLD,
            });
        }
    }
    for acol in after.columns() {
        if before.column_index(&acol.name).is_err() {
            structural.push(StructuralChange {
                column: acol.name.clone(),
                change: ChangeKind::Added,
                before: None,
                after: Some(acol.dtype),
            });
        }
    }
    if shared == 0 {
        return Err(DqiError::NoSharedColumns);
    }
    let drifted = ks.iter().filter(|r| r.drifted).count();
    let drift_penalty = if ks.is_empty() { 0.0 } else { drifted as f64 / ks.len() as f64 };
    Ok(DriftReport {
        before: before.snapshot_id().clone(),
        after: after.snapshot_id().clone(),
        alpha,
        ks,
        categorical,
        structural,
        skipped,
        drift_penalty,
    })
}
