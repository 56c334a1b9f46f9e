use std::collections::BTreeSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{resolve_columns, Diagnostics, ProcedureResult, ProcedureSpec, Target};
use crate::error::{DqiError, Result};
use crate::tabular::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DeleteMode {
    /// Drop rows with a missing value in any of the target columns.
    RowsWithMissing { target: Target },
    RowsByIndex { indices: Vec<usize> },
    Column { column: String },
}

pub(super) fn run(ds: &Dataset, mode: &DeleteMode, spec: ProcedureSpec) -> Result<ProcedureResult> {
    let label = ds.label_column().map(str::to_string);
    let all_cols: Vec<usize> = (0..ds.column_count()).collect();
    match mode {
        DeleteMode::Column { column } => {
            let idx = ds.column_index(column)?;
            if label.as_deref() == Some(column.as_str()) {
                return Err(DqiError::LabelProtected(column.clone()));
            }
            if ds.column_count() == 1 {
                return Err(DqiError::EmptyResult);
            }
            let kept_cols: Vec<usize> = all_cols.into_iter().filter(|&c| c != idx).collect();
            let columns = kept_cols.iter().map(|&c| ds.columns()[c].clone()).collect();
            let rows = ds
                .rows()
                .iter()
                .map(|row| kept_cols.iter().map(|&c| row[c].clone()).collect())
                .collect();
            let output = ds.derive(columns, rows, label)?;
            let kept_rows: Vec<usize> = (0..ds.row_count()).collect();
            let diagnostics = Diagnostics::Delete {
                removed_rows: vec![],
                removed_columns: vec![column.clone()],
            };
            Ok(ProcedureResult::build(spec, ds, output, &kept_rows, &kept_cols, diagnostics))
        }
        DeleteMode::RowsWithMissing { target } => {
            let cols = resolve_columns(ds, target, |_| true)?;
            let removed: Vec<usize> = (0..ds.row_count())
                .filter(|&r| cols.iter().any(|&c| ds.rows()[r][c].is_missing()))
                .collect();
            drop_rows(ds, removed, spec)
        }
        DeleteMode::RowsByIndex { indices } => {
            let removed: BTreeSet<usize> = indices.iter().copied().collect();
            if let Some(&bad) = removed.iter().find(|&&r| r >= ds.row_count()) {
                return Err(DqiError::spec(format!("row index {bad} out of range (dataset has {} rows)", ds.row_count())));
            }
            drop_rows(ds, removed.into_iter().collect(), spec)
        }
    }
}

/// `removed` must be ascending.
fn drop_rows(ds: &Dataset, removed: Vec<usize>, spec: ProcedureSpec) -> Result<ProcedureResult> {
    let kept: Vec<usize> = (0..ds.row_count()).filter(|r| removed.binary_search(r).is_err()).collect();
    if kept.is_empty() && ds.row_count() > 0 {
        return Err(DqiError::EmptyResult);
    }
    let rows = kept.iter().map(|&r| ds.rows()[r].clone()).collect();
    let output = ds.derive(ds.columns().to_vec(), rows, ds.label_column().map(str::to_string))?;
    let all_cols: Vec<usize> = (0..ds.column_count()).collect();
    let diagnostics = Diagnostics::Delete {
        removed_rows: removed,
        removed_columns: vec![],
    };
    Ok(ProcedureResult::build(spec, ds, output, &kept, &all_cols, diagnostics))
}
