//! Typed, immutable tabular datasets.
//!
//! A [`Dataset`] is a value object: every cleaning procedure produces a new
//! one, and its [`SnapshotId`] is a SHA-256 digest over a canonical
//! serialization of schema and cells, so identical content always hashes to
//! the same id no matter how it was produced.

mod canonical;
mod ingest;
pub mod parse;
mod stats;

use std::borrow::Cow;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use regex::Regex;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{DqiError, Result};

pub use canonical::{cell_from_json, DatasetJson};
pub use ingest::{ingest_csv, IngestOptions, IngestWarning, Ingested, TypeHint, DEFAULT_NA_TOKENS};
pub use parse::TimestampPattern;
pub use stats::{column_stats, mean_and_stddev, quantile_r7, ColumnStats, Histogram, ValueCount};

/// A single cell.
#[derive(Debug, Clone)]
pub enum CellValue {
    Missing,
    /// Always finite.
    Number(f64),
    /// Never empty.
    Text(String),
    Boolean(bool),
    /// Seconds since the Unix epoch, UTC.
    Timestamp(i64),
}

impl CellValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, CellValue::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            CellValue::Number(v) => Some(*v),
            CellValue::Timestamp(t) => Some(*t as f64),
            CellValue::Boolean(b) => Some(f64::from(u8::from(*b))),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            CellValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Canonical string form; `None` for missing cells.
    pub fn render(&self) -> Option<Cow<'_, str>> {
        match self {
            CellValue::Missing => None,
            CellValue::Number(v) => Some(Cow::Owned(format_number(*v))),
            CellValue::Text(s) => Some(Cow::Borrowed(s)),
            CellValue::Boolean(true) => Some(Cow::Borrowed("true")),
            CellValue::Boolean(false) => Some(Cow::Borrowed("false")),
            CellValue::Timestamp(t) => Some(Cow::Owned(parse::render_timestamp(*t))),
        }
    }

    fn fits(&self, dtype: DType) -> bool {
        matches!(
            (self, dtype),
            (CellValue::Missing, _)
                | (CellValue::Number(_), DType::Numeric)
                | (CellValue::Text(_), DType::Categorical | DType::Text)
                | (CellValue::Boolean(_), DType::Boolean)
                | (CellValue::Timestamp(_), DType::Timestamp)
        )
    }
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

// Numbers compare by bit pattern so that equality, hashing and the canonical
// rendering agree (`-0.0` and `0.0` are distinct cells).
impl PartialEq for CellValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (CellValue::Missing, CellValue::Missing) => true,
            (CellValue::Number(a), CellValue::Number(b)) => a.to_bits() == b.to_bits(),
            (CellValue::Text(a), CellValue::Text(b)) => a == b,
            (CellValue::Boolean(a), CellValue::Boolean(b)) => a == b,
            (CellValue::Timestamp(a), CellValue::Timestamp(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for CellValue {}

impl Hash for CellValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            CellValue::Missing => {}
            CellValue::Number(v) => v.to_bits().hash(state),
            CellValue::Text(s) => s.hash(state),
            CellValue::Boolean(b) => b.hash(state),
            CellValue::Timestamp(t) => t.hash(state),
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.render() {
            Some(s) => f.write_str(&s),
            None => f.write_str("<missing>"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum DType {
    Numeric,
    Categorical,
    Boolean,
    Timestamp,
    Text,
}

impl DType {
    pub fn as_str(self) -> &'static str {
        match self {
            DType::Numeric => "numeric",
            DType::Categorical => "categorical",
            DType::Boolean => "boolean",
            DType::Timestamp => "timestamp",
            DType::Text => "text",
        }
    }

    pub fn is_textual(self) -> bool {
        matches!(self, DType::Categorical | DType::Text)
    }
}

/// Value-set or range constraint attached to a column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainRule {
    /// Inclusive bounds. Timestamps compare in epoch seconds.
    Range { min: f64, max: f64 },
    ValueSet { values: Vec<String> },
}

impl DomainRule {
    pub fn admits(&self, cell: &CellValue) -> bool {
        match self {
            DomainRule::Range { min, max } => cell.as_f64().is_some_and(|v| v >= *min && v <= *max),
            DomainRule::ValueSet { values } => cell
                .render()
                .is_some_and(|s| values.iter().any(|v| v.as_str() == s.as_ref())),
        }
    }
}

/// A named or regex format check applied to the rendered cell value.
///
/// Known ids: `iso_date`, `iso_datetime`, `integer`, `email`,
/// `alphanumeric`; anything of the form `regex:<pattern>` is an anchored
/// regular expression.
#[derive(Debug, Clone)]
pub struct FormatRule {
    id: String,
    regex: Regex,
}

impl FormatRule {
    pub fn parse(id: &str) -> Result<Self> {
        let pattern = match id {
            "iso_date" => r"\d{4}-\d{2}-\d{2}".to_string(),
            "iso_datetime" => r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z?".to_string(),
            "integer" => r"[+-]?\d+".to_string(),
            "email" => r"[^@\s]+@[^@\s]+\.[^@\s]+".to_string(),
            "alphanumeric" => r"[A-Za-z0-9]+".to_string(),
            other => match other.strip_prefix("regex:") {
                Some(p) => p.to_string(),
                None => return Err(DqiError::InvalidSchema(format!("unknown format rule `{other}`"))),
            },
        };
        let regex = Regex::new(&format!("^(?:{pattern})$"))
            .map_err(|e| DqiError::InvalidSchema(format!("format rule `{id}`: {e}")))?;
        Ok(FormatRule { id: id.to_string(), regex })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn admits(&self, cell: &CellValue) -> bool {
        cell.render().is_some_and(|s| self.regex.is_match(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ColumnSchema {
    pub name: String,
    pub dtype: DType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_rule: Option<DomainRule>,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, dtype: DType) -> Self {
        ColumnSchema {
            name: name.into(),
            dtype,
            declared_format: None,
            domain_rule: None,
        }
    }

    pub fn has_rules(&self) -> bool {
        self.declared_format.is_some() || self.domain_rule.is_some()
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(DqiError::InvalidSchema("column name is empty".into()));
        }
        if let Some(id) = &self.declared_format {
            FormatRule::parse(id)?;
        }
        match (&self.domain_rule, self.dtype) {
            (None, _) => Ok(()),
            (Some(DomainRule::Range { min, max }), DType::Numeric | DType::Timestamp) => {
                if min.is_nan() || max.is_nan() || min > max {
                    Err(DqiError::InvalidSchema(format!("column `{}`: empty range", self.name)))
                } else {
                    Ok(())
                }
            }
            (Some(DomainRule::ValueSet { .. }), DType::Categorical | DType::Text | DType::Boolean) => Ok(()),
            (Some(_), dtype) => Err(DqiError::InvalidSchema(format!(
                "column `{}`: domain rule incompatible with {} dtype",
                self.name,
                dtype.as_str()
            ))),
        }
    }
}

/// Lowercase-hex SHA-256 digest of a dataset's canonical serialization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(transparent)]
pub struct SnapshotId(pub String);

impl SnapshotId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SnapshotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An immutable table snapshot.
#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<ColumnSchema>,
    rows: Vec<Vec<CellValue>>,
    label_column: Option<String>,
    parent_id: Option<SnapshotId>,
    snapshot_id: SnapshotId,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.snapshot_id == other.snapshot_id
    }
}

impl Dataset {
    /// Validates the table and computes its snapshot id.
    pub fn new(columns: Vec<ColumnSchema>, rows: Vec<Vec<CellValue>>, label_column: Option<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for col in &columns {
            col.validate()?;
            if !seen.insert(col.name.as_str()) {
                return Err(DqiError::DuplicateColumn(col.name.clone()));
            }
        }
        if let Some(label) = &label_column {
            if !seen.contains(label.as_str()) {
                return Err(DqiError::UnknownColumn(label.clone()));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(DqiError::RaggedRow {
                    row: r,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
            for (cell, col) in row.iter().zip(&columns) {
                if !cell.fits(col.dtype) {
                    return Err(DqiError::InvalidSchema(format!(
                        "row {r}, column `{}`: value {cell} does not fit {} dtype",
                        col.name,
                        col.dtype.as_str()
                    )));
                }
                match cell {
                    CellValue::Number(v) if !v.is_finite() => {
                        return Err(DqiError::InvalidSchema(format!("row {r}, column `{}`: non-finite number", col.name)))
                    }
                    CellValue::Text(s) if s.is_empty() => {
                        return Err(DqiError::InvalidSchema(format!("row {r}, column `{}`: empty text", col.name)))
                    }
                    _ => {}
                }
            }
        }
        let snapshot_id = canonical::digest(&columns, &rows, label_column.as_deref());
        Ok(Dataset {
            columns,
            rows,
            label_column,
            parent_id: None,
            snapshot_id,
        })
    }

    /// Builds a child snapshot of `self`.
    pub fn derive(&self, columns: Vec<ColumnSchema>, rows: Vec<Vec<CellValue>>, label_column: Option<String>) -> Result<Self> {
        let mut ds = Dataset::new(columns, rows, label_column)?;
        ds.parent_id = Some(self.snapshot_id.clone());
        Ok(ds)
    }

    pub fn snapshot_id(&self) -> &SnapshotId {
        &self.snapshot_id
    }

    pub fn parent_id(&self) -> Option<&SnapshotId> {
        self.parent_id.as_ref()
    }

    pub(crate) fn set_parent(&mut self, parent: Option<SnapshotId>) {
        self.parent_id = parent;
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<CellValue>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn label_column(&self) -> Option<&str> {
        self.label_column.as_deref()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| DqiError::UnknownColumn(name.to_string()))
    }

    pub fn schema(&self, name: &str) -> Result<&ColumnSchema> {
        Ok(&self.columns[self.column_index(name)?])
    }

    pub fn column(&self, idx: usize) -> impl ExactSizeIterator<Item = &CellValue> + '_ {
        self.rows.iter().map(move |row| &row[idx])
    }

    /// Observed numeric values of a column with their row indices.
    pub fn numeric_values(&self, idx: usize) -> Vec<(usize, f64)> {
        self.column(idx)
            .enumerate()
            .filter_map(|(r, c)| c.as_f64().map(|v| (r, v)))
            .collect()
    }

    /// Same content with a different label column.
    pub fn with_label(&self, label: Option<String>) -> Result<Self> {
        let mut ds = Dataset::new(self.columns.clone(), self.rows.clone(), label)?;
        ds.parent_id = self.parent_id.clone();
        Ok(ds)
    }

    /// Same content with replacement rules for one column.
    pub fn with_rules(&self, column: &str, declared_format: Option<String>, domain_rule: Option<DomainRule>) -> Result<Self> {
        let idx = self.column_index(column)?;
        let mut columns = self.columns.clone();
        columns[idx].declared_format = declared_format;
        columns[idx].domain_rule = domain_rule;
        let mut ds = Dataset::new(columns, self.rows.clone(), self.label_column.clone())?;
        ds.parent_id = self.parent_id.clone();
        Ok(ds)
    }

    /// Canonical CSV: header row, missing cells as empty fields, numbers in
    /// shortest round-trip form, timestamps as ISO 8601.
    pub fn to_csv(&self) -> Vec<u8> {
        canonical::to_csv(self)
    }

    pub fn to_json(&self) -> DatasetJson {
        DatasetJson::from(self)
    }
}
