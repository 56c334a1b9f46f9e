//! Default candidate list offered when the user supplies no specs.

use serde_json::Value;

use crate::procedures::{Family, ProcedureSpec};
use crate::tabular::{CellValue, DType, Dataset};

/// Plausible procedures for the current issues of `ds`: imputation and
/// listwise deletion for incomplete columns, outlier treatment for numeric
/// columns, deduplication, whitespace trimming and removal of constant
/// features.
pub fn default_candidates(ds: &Dataset) -> Vec<ProcedureSpec> {
    let mut out = Vec::new();
    let label = ds.label_column();
    let numeric_features = ds
        .columns()
        .iter()
        .filter(|c| c.dtype == DType::Numeric && Some(c.name.as_str()) != label)
        .count();

    for (idx, col) in ds.columns().iter().enumerate() {
        let name = col.name.as_str();
        let missing = ds.column(idx).filter(|c| c.is_missing()).count();
        if missing > 0 && missing < ds.row_count() {
            match col.dtype {
                DType::Numeric => {
                    out.push(ProcedureSpec::new(Family::Impute, "mean").on(&[name]));
                    out.push(ProcedureSpec::new(Family::Impute, "median").on(&[name]));
                    if numeric_features > 1 {
                        out.push(ProcedureSpec::new(Family::Impute, "knn").on(&[name]).param("k", 5));
                    }
                }
                _ => out.push(ProcedureSpec::new(Family::Impute, "mode").on(&[name])),
            }
            out.push(ProcedureSpec::new(Family::Delete, "rows_with_missing").on(&[name]));
        }
        if col.dtype == DType::Numeric && Some(name) != label && ds.numeric_values(idx).len() >= 3 {
            for action in ["to_missing", "clip_to_fence"] {
                out.push(ProcedureSpec::new(Family::Outlier, "iqr").on(&[name]).param("action", action));
            }
        }
        if col.dtype.is_textual() && ds.column(idx).any(|c| matches!(c, CellValue::Text(s) if s.trim() != s)) {
            out.push(ProcedureSpec::new(Family::Standardize, "trim_whitespace").on(&[name]));
        }
    }
    out.push(ProcedureSpec::new(Family::Dedup, "exact"));
    if label.is_some() && numeric_features > 0 {
        out.push(ProcedureSpec::new(Family::FeatureSelect, "variance_threshold").param("t", Value::from(1e-9)));
    }
    out
}
