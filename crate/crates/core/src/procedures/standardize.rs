use indexmap::IndexMap;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{resolve_columns, Diagnostics, ProcedureResult, ProcedureSpec, Target};
use crate::error::{DqiError, Result};
use crate::tabular::parse::{parse_grouped_number, render_timestamp};
use crate::tabular::{format_number, CellValue, DType, Dataset, DomainRule, TimestampPattern};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StandardizeRule {
    TrimWhitespace,
    CaseFold {
        upper: bool,
    },
    /// Parses dates with `pattern` and rewrites them in ISO 8601.
    DateToIso {
        pattern: TimestampPattern,
    },
    /// Removes digit-group separators and normalizes the decimal mark.
    NumericUnseparate {
        group_char: char,
        decimal_char: char,
    },
    /// Exact replacement of rendered values. Mapping to `""` makes the cell
    /// missing.
    MapValues {
        dictionary: IndexMap<String, String>,
    },
}

enum Outcome {
    Unchanged,
    Changed(CellValue),
    Failed,
}

pub(super) fn run(ds: &Dataset, target: &Target, rule: &StandardizeRule, spec: ProcedureSpec) -> Result<ProcedureResult> {
    let targets = resolve_columns(ds, target, |c| ds.columns()[c].dtype.is_textual())?;
    for &c in &targets {
        let col = &ds.columns()[c];
        if !col.dtype.is_textual() {
            return Err(DqiError::incompatible(
                &col.name,
                format!("standardization applies to text columns, not {}", col.dtype.as_str()),
            ));
        }
    }
    let mut columns = ds.columns().to_vec();
    let mut rows = ds.rows().to_vec();
    let mut converted = IndexMap::new();
    let mut unconverted = IndexMap::new();
    let mut retyped = Vec::new();

    for &c in &targets {
        let name = columns[c].name.clone();
        let mut changed = 0;
        let mut failed = Vec::new();
        let mut parsed: Vec<Option<CellValue>> = vec![None; rows.len()];
        for (r, row) in rows.iter_mut().enumerate() {
            let Some(text) = row[c].as_text() else { continue };
            match convert(text, rule) {
                Outcome::Unchanged => {}
                Outcome::Failed => failed.push(r),
                Outcome::Changed(cell) => {
                    changed += 1;
                    parsed[r] = Some(cell);
                }
            }
        }
        let new_dtype = match rule {
            StandardizeRule::DateToIso { .. } => Some(DType::Timestamp),
            StandardizeRule::NumericUnseparate { .. } => Some(DType::Numeric),
            _ => None,
        };
        // Retyping needs every observed cell to convert; otherwise the
        // converted cells are written back as canonical text.
        let retype = new_dtype.filter(|_| failed.is_empty() && rows.iter().any(|row| !row[c].is_missing()));
        for (r, cell) in parsed.into_iter().enumerate() {
            if let Some(cell) = cell {
                rows[r][c] = match (retype, cell) {
                    (None, CellValue::Timestamp(t)) => CellValue::Text(render_timestamp(t)),
                    (None, CellValue::Number(v)) => CellValue::Text(format_number(v)),
                    (_, cell) => cell,
                };
            }
        }
        if let Some(dtype) = retype {
            columns[c].dtype = dtype;
            if matches!(columns[c].domain_rule, Some(DomainRule::ValueSet { .. })) {
                columns[c].domain_rule = None;
            }
            retyped.push(name.clone());
        }
        converted.insert(name.clone(), changed);
        if !failed.is_empty() {
            unconverted.insert(name, failed);
        }
    }

    let output = ds.derive(columns, rows, ds.label_column().map(str::to_string))?;
    let kept_rows: Vec<usize> = (0..ds.row_count()).collect();
    let kept_cols: Vec<usize> = (0..ds.column_count()).collect();
    let diagnostics = Diagnostics::Standardize {
        converted,
        unconverted,
        retyped,
    };
    Ok(ProcedureResult::build(spec, ds, output, &kept_rows, &kept_cols, diagnostics))
}

fn convert(text: &str, rule: &StandardizeRule) -> Outcome {
    let changed_text = |s: String| {
        if s == text {
            Outcome::Unchanged
        } else {
            Outcome::Changed(CellValue::Text(s))
        }
    };
    match rule {
        StandardizeRule::TrimWhitespace => {
            let t = text.trim();
            if t.is_empty() {
                Outcome::Failed
            } else {
                changed_text(t.to_string())
            }
        }
        StandardizeRule::CaseFold { upper } => changed_text(if *upper { text.to_uppercase() } else { text.to_lowercase() }),
        StandardizeRule::DateToIso { pattern } => match pattern.parse(text) {
            Some(t) => Outcome::Changed(CellValue::Timestamp(t)),
            None => Outcome::Failed,
        },
        StandardizeRule::NumericUnseparate { group_char, decimal_char } => {
            match parse_grouped_number(text, *group_char, *decimal_char) {
                Some(v) => Outcome::Changed(CellValue::Number(v)),
                None => Outcome::Failed,
            }
        }
        StandardizeRule::MapValues { dictionary } => match dictionary.get(text) {
            None => Outcome::Unchanged,
            Some(v) if v.is_empty() => Outcome::Changed(CellValue::Missing),
            Some(v) => changed_text(v.clone()),
        },
    }
}
