use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{format_number, CellValue, ColumnSchema, DType, Dataset, SnapshotId};
use crate::error::{DqiError, Result};

const HASH_VERSION: &[u8] = b"dqi-canonical/1\n";

/// Length-prefixed, type-tagged serialization streamed straight into the
/// hasher. Parent ids are lineage metadata and are not part of the content.
pub(super) fn digest(columns: &[ColumnSchema], rows: &[Vec<CellValue>], label: Option<&str>) -> SnapshotId {
    let mut h = Sha256::new();
    let mut put = |tag: u8, bytes: &[u8]| {
        h.update([tag]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    };
    put(b'V', HASH_VERSION);
    put(b'C', &(columns.len() as u64).to_le_bytes());
    for col in columns {
        put(b'n', col.name.as_bytes());
        put(b't', col.dtype.as_str().as_bytes());
        put(b'f', col.declared_format.as_deref().unwrap_or("").as_bytes());
        let rule = col
            .domain_rule
            .as_ref()
            .map(|r| serde_json::to_string(r).expect("domain rule serializes"))
            .unwrap_or_default();
        put(b'd', rule.as_bytes());
    }
    put(b'L', label.unwrap_or("").as_bytes());
    put(b'R', &(rows.len() as u64).to_le_bytes());
    for row in rows {
        for cell in row {
            match cell {
                CellValue::Missing => put(b'M', &[]),
                CellValue::Number(v) => put(b'N', format_number(*v).as_bytes()),
                CellValue::Text(s) => put(b'T', s.as_bytes()),
                CellValue::Boolean(b) => put(b'B', &[u8::from(*b)]),
                CellValue::Timestamp(t) => put(b'S', &t.to_le_bytes()),
            }
        }
    }
    SnapshotId(hex::encode(h.finalize()))
}

pub(super) fn to_csv(ds: &Dataset) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(ds.columns().iter().map(|c| c.name.as_str()))
        .expect("writing to memory");
    for row in ds.rows() {
        w.write_record(row.iter().map(|c| c.render().unwrap_or_default().into_owned()))
            .expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

/// JSON form of a dataset. Cells are `null`, numbers, strings or booleans;
/// timestamp cells are integer epoch seconds.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct DatasetJson {
    pub snapshot_id: SnapshotId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<SnapshotId>,
    pub columns: Vec<ColumnSchema>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    pub rows: Vec<Vec<Value>>,
}

impl From<&Dataset> for DatasetJson {
    fn from(ds: &Dataset) -> Self {
        let rows = ds
            .rows()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| match c {
                        CellValue::Missing => Value::Null,
                        CellValue::Number(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
                        CellValue::Text(s) => Value::String(s.clone()),
                        CellValue::Boolean(b) => Value::Bool(*b),
                        CellValue::Timestamp(t) => Value::from(*t),
                    })
                    .collect()
            })
            .collect();
        DatasetJson {
            snapshot_id: ds.snapshot_id().clone(),
            parent_id: ds.parent_id().cloned(),
            columns: ds.columns().to_vec(),
            label_column: ds.label_column().map(str::to_string),
            rows,
        }
    }
}

impl DatasetJson {
    /// Rebuilds the dataset and checks that it hashes to the recorded id.
    pub fn into_dataset(self) -> Result<Dataset> {
        let rows = self
            .rows
            .into_iter()
            .enumerate()
            .map(|(r, row)| {
                if row.len() != self.columns.len() {
                    return Err(DqiError::RaggedRow {
                        row: r,
                        expected: self.columns.len(),
                        found: row.len(),
                    });
                }
                row.into_iter()
                    .zip(&self.columns)
                    .map(|(v, col)| cell_from_json(v, col.dtype).ok_or_else(|| {
                        DqiError::InvalidSchema(format!("row {r}, column `{}`: value does not fit {}", col.name, col.dtype.as_str()))
                    }))
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ds = Dataset::new(self.columns, rows, self.label_column)?;
        if ds.snapshot_id() != &self.snapshot_id {
            return Err(DqiError::InvalidSchema(format!(
                "content hashes to {}, not the recorded {}",
                ds.snapshot_id(),
                self.snapshot_id
            )));
        }
        ds.parent_id = self.parent_id;
        Ok(ds)
    }
}

/// Converts a JSON scalar into a cell of the given dtype.
pub fn cell_from_json(v: Value, dtype: DType) -> Option<CellValue> {
    Some(match (v, dtype) {
        (Value::Null, _) => CellValue::Missing,
        (Value::Number(n), DType::Numeric) => CellValue::Number(n.as_f64().filter(|x| x.is_finite())?),
        (Value::Number(n), DType::Timestamp) => CellValue::Timestamp(n.as_i64()?),
        (Value::String(s), DType::Categorical | DType::Text) if !s.is_empty() => CellValue::Text(s),
        (Value::Number(n), DType::Categorical | DType::Text) => CellValue::Text(n.to_string()),
        (Value::Bool(b), DType::Boolean) => CellValue::Boolean(b),
        (Value::String(s), DType::Numeric) => CellValue::Number(super::parse::parse_number(&s)?),
        (Value::String(s), DType::Boolean) => CellValue::Boolean(super::parse::parse_bool(&s)?),
        (Value::String(s), DType::Timestamp) => CellValue::Timestamp(super::parse::TimestampPattern::Iso.parse(&s)?),
        _ => return None,
    })
}
