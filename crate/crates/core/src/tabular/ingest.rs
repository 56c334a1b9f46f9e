use indexmap::IndexMap;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::parse::{parse_bool, parse_grouped_number, parse_number, TimestampPattern};
use super::{CellValue, ColumnSchema, DType, Dataset, DomainRule};
use crate::error::{DqiError, Result};

pub const DEFAULT_NA_TOKENS: [&str; 5] = ["", "NA", "N/A", "null", "NaN"];

/// Fraction of observed values that must parse as numbers for a column to
/// be inferred numeric.
const NUMERIC_VOTE: f64 = 0.9;

/// Overrides type inference for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TypeHint {
    Numeric,
    /// Numbers written with a group separator, e.g. `1,234.5`.
    GroupedNumeric { group_char: char, decimal_char: char },
    Categorical,
    Text,
    Boolean,
    Timestamp { pattern: TimestampPattern },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ColumnRules {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_rule: Option<DomainRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct IngestOptions {
    pub delimiter: char,
    pub header_row: bool,
    /// Matched case-insensitively after trimming. `None` selects
    /// [`DEFAULT_NA_TOKENS`]. An empty field is always missing.
    pub na_tokens: Option<Vec<String>>,
    pub type_hints: IndexMap<String, TypeHint>,
    pub label_column: Option<String>,
    pub column_rules: IndexMap<String, ColumnRules>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            delimiter: ',',
            header_row: true,
            na_tokens: None,
            type_hints: IndexMap::new(),
            label_column: None,
            column_rules: IndexMap::new(),
        }
    }
}

impl IngestOptions {
    /// Options under which `ingest_csv(ds.to_csv())` reproduces `ds` exactly.
    pub fn canonical_for(ds: &Dataset) -> Self {
        Self::canonical(ds.columns(), ds.label_column())
    }

    /// Options that read back a canonical CSV export with this schema
    /// exactly.
    pub fn canonical(columns: &[ColumnSchema], label_column: Option<&str>) -> Self {
        let type_hints = columns
            .iter()
            .map(|c| {
                let hint = match c.dtype {
                    DType::Numeric => TypeHint::Numeric,
                    DType::Categorical => TypeHint::Categorical,
                    DType::Text => TypeHint::Text,
                    DType::Boolean => TypeHint::Boolean,
                    DType::Timestamp => TypeHint::Timestamp {
                        pattern: TimestampPattern::Iso,
                    },
                };
                (c.name.clone(), hint)
            })
            .collect();
        let column_rules = columns
            .iter()
            .filter(|c| c.has_rules())
            .map(|c| {
                (
                    c.name.clone(),
                    ColumnRules {
                        declared_format: c.declared_format.clone(),
                        domain_rule: c.domain_rule.clone(),
                    },
                )
            })
            .collect();
        IngestOptions {
            delimiter: ',',
            header_row: true,
            na_tokens: Some(Vec::new()),
            type_hints,
            label_column: label_column.map(str::to_string),
            column_rules,
        }
    }

    fn is_na(&self, field: &str) -> bool {
        if field.is_empty() {
            return true;
        }
        let f = field.trim();
        match &self.na_tokens {
            Some(tokens) => tokens.iter().any(|t| t.trim().eq_ignore_ascii_case(f)),
            None => DEFAULT_NA_TOKENS.iter().any(|t| t.eq_ignore_ascii_case(f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct IngestWarning {
    /// Zero-based data row (the header is not counted).
    pub row: usize,
    pub column: String,
    pub value: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub warnings: Vec<IngestWarning>,
}

/// Parses RFC 4180-style CSV into a typed dataset.
///
/// Ragged rows are reported by zero-based data row index.
pub fn ingest_csv(bytes: &[u8], options: &IngestOptions) -> Result<Ingested> {
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(DqiError::EmptyInput);
    }
    if !options.delimiter.is_ascii() {
        return Err(DqiError::InvalidConfig("delimiter must be a single ASCII character".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter as u8)
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);

    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec.map_err(|e| DqiError::Csv(e.to_string()))?);
    }
    let mut records = records.into_iter();
    let (names, data): (Vec<String>, Vec<csv::StringRecord>) = if options.header_row {
        let header = records.next().ok_or(DqiError::EmptyInput)?;
        (header.iter().map(str::to_string).collect(), records.collect())
    } else {
        let data: Vec<_> = records.collect();
        let width = data.first().map_or(0, |r| r.len());
        ((0..width).map(|i| format!("c{i}")).collect(), data)
    };
    if names.is_empty() {
        return Err(DqiError::EmptyInput);
    }
    for (i, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(DqiError::InvalidSchema(format!("header field {i} is empty")));
        }
        if names[..i].contains(name) {
            return Err(DqiError::DuplicateColumn(name.clone()));
        }
    }
    for (r, rec) in data.iter().enumerate() {
        if rec.len() != names.len() {
            return Err(DqiError::RaggedRow {
                row: r,
                expected: names.len(),
                found: rec.len(),
            });
        }
    }
    for name in options.type_hints.keys().chain(options.column_rules.keys()) {
        if !names.contains(name) {
            return Err(DqiError::UnknownColumn(name.clone()));
        }
    }

    let mut warnings = Vec::new();
    let mut columns = Vec::with_capacity(names.len());
    let mut cells: Vec<Vec<CellValue>> = vec![Vec::with_capacity(names.len()); data.len()];
    for (c, name) in names.iter().enumerate() {
        let raw: Vec<Option<&str>> = data
            .iter()
            .map(|rec| {
                let f = &rec[c];
                (!options.is_na(f)).then_some(f)
            })
            .collect();
        let hint = options.type_hints.get(name).cloned().unwrap_or_else(|| infer(&raw));
        let (dtype, parser): (DType, Box<dyn Fn(&str) -> Option<CellValue>>) = match hint {
            TypeHint::Numeric => (DType::Numeric, Box::new(|s| parse_number(s).map(CellValue::Number))),
            TypeHint::GroupedNumeric { group_char, decimal_char } => (
                DType::Numeric,
                Box::new(move |s| parse_grouped_number(s, group_char, decimal_char).map(CellValue::Number)),
            ),
            TypeHint::Boolean => (DType::Boolean, Box::new(|s| parse_bool(s).map(CellValue::Boolean))),
            TypeHint::Timestamp { pattern } => (DType::Timestamp, Box::new(move |s| pattern.parse(s).map(CellValue::Timestamp))),
            TypeHint::Categorical => (DType::Categorical, Box::new(|s| Some(CellValue::Text(s.to_string())))),
            TypeHint::Text => (DType::Text, Box::new(|s| Some(CellValue::Text(s.to_string())))),
        };
        for (r, value) in raw.iter().enumerate() {
            let cell = match value {
                None => CellValue::Missing,
                Some(s) => parser(s).unwrap_or_else(|| {
                    warnings.push(IngestWarning {
                        row: r,
                        column: name.clone(),
                        value: s.to_string(),
                        message: format!("unparseable as {}; stored as missing", dtype.as_str()),
                    });
                    CellValue::Missing
                }),
            };
            cells[r].push(cell);
        }
        let mut schema = ColumnSchema::new(name.clone(), dtype);
        if let Some(rules) = options.column_rules.get(name) {
            schema.declared_format = rules.declared_format.clone();
            schema.domain_rule = rules.domain_rule.clone();
        }
        columns.push(schema);
    }

    let dataset = Dataset::new(columns, cells, options.label_column.clone())?;
    Ok(Ingested { dataset, warnings })
}

fn infer(raw: &[Option<&str>]) -> TypeHint {
    let observed: Vec<&str> = raw.iter().flatten().copied().collect();
    if observed.is_empty() {
        return TypeHint::Categorical;
    }
    if observed.iter().all(|s| parse_bool(s).is_some()) {
        return TypeHint::Boolean;
    }
    let numeric = observed.iter().filter(|s| parse_number(s).is_some()).count();
    if numeric as f64 >= NUMERIC_VOTE * observed.len() as f64 {
        TypeHint::Numeric
    } else {
        TypeHint::Categorical
    }
}
