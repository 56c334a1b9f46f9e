//! Versioned JSON session files.
//!
//! Each snapshot is stored as canonical CSV plus its schema, inline when
//! small and otherwise as a file in a sibling `<stem>.snapshots/` directory.
//! Loading re-hashes every snapshot and the session digest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{LineageEntry, Session, SessionConfig};
use crate::error::{DqiError, Result};
use crate::eval::EvalReport;
use crate::tabular::{ingest_csv, ColumnSchema, Dataset, IngestOptions, SnapshotId};

pub const SESSION_FORMAT: &str = "dqi-session";
pub const SESSION_FORMAT_VERSION: u32 = 1;
/// Canonical CSV larger than this many bytes goes to a side file.
pub const INLINE_SNAPSHOT_LIMIT: usize = 10 * 1024 * 1024;

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct SnapshotRecord {
    pub id: SnapshotId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<SnapshotId>,
    pub columns: Vec<ColumnSchema>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    /// Path of the CSV relative to the session file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

/// On-disk session file.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct SessionDocument {
    pub format: String,
    pub version: u32,
    pub session_id: String,
    pub root: SnapshotId,
    pub ingest: IngestOptions,
    pub config: SessionConfig,
    pub lineage: Vec<LineageEntry>,
    pub cursor: usize,
    pub baseline_eval: Option<EvalReport>,
    pub evaluations: Vec<EvalReport>,
    pub snapshots: Vec<SnapshotRecord>,
    pub digest: String,
}

fn corrupt(msg: impl Into<String>) -> DqiError {
    DqiError::SessionFormat(msg.into())
}

fn snapshot_dir(path: &Path) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "session".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.snapshots"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl Session {
    fn document(&self, mut external: impl FnMut(&Dataset, Vec<u8>) -> Result<Option<String>>) -> Result<SessionDocument> {
        let snapshots = self
            .store
            .values()
            .map(|ds| {
                let csv = ds.to_csv();
                let file = external(ds, csv.clone())?;
                Ok(SnapshotRecord {
                    id: ds.snapshot_id().clone(),
                    parent: ds.parent_id().cloned(),
                    columns: ds.columns().to_vec(),
                    label_column: ds.label_column().map(str::to_string),
                    csv: match file {
                        Some(_) => None,
                        None => Some(String::from_utf8(csv).map_err(|e| corrupt(e.to_string()))?),
                    },
                    file,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SessionDocument {
            format: SESSION_FORMAT.into(),
            version: SESSION_FORMAT_VERSION,
            session_id: self.id.clone(),
            root: self.root.clone(),
            ingest: self.ingest.clone(),
            config: self.config.clone(),
            lineage: self.lineage.clone(),
            cursor: self.cursor,
            baseline_eval: self.baseline_eval.clone(),
            evaluations: self.evaluations.clone(),
            snapshots,
            digest: self.digest(),
        })
    }

    /// Document with every snapshot inline.
    pub fn to_document(&self) -> Result<SessionDocument> {
        self.document(|_, _| Ok(None))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.save_with_limit(path, INLINE_SNAPSHOT_LIMIT)
    }

    /// Like [`Session::save`] with a custom inline size limit in bytes.
    pub fn save_with_limit(&self, path: &Path, inline_limit: usize) -> Result<()> {
        let dir = snapshot_dir(path);
        let dir_name = dir.file_name().expect("has a name").to_string_lossy().into_owned();
        let doc = self.document(|ds, csv| {
            if csv.len() <= inline_limit {
                return Ok(None);
            }
            std::fs::create_dir_all(&dir)?;
            let name = format!("{}.csv", ds.snapshot_id());
            let target = dir.join(&name);
            if !target.exists() {
                write_atomic(&target, &csv)?;
            }
            Ok(Some(format!("{dir_name}/{name}")))
        })?;
        write_atomic(path, &serde_json::to_vec_pretty(&doc)?)
    }

    pub fn load(path: &Path) -> Result<Session> {
        let bytes = std::fs::read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Session::from_json(&bytes, Some(base))
    }

    /// Parses a session document; `base` resolves external snapshot files.
    pub fn from_json(bytes: &[u8], base: Option<&Path>) -> Result<Session> {
        let value: Value = serde_json::from_slice(bytes).map_err(|e| corrupt(e.to_string()))?;
        if value.get("format").and_then(Value::as_str) != Some(SESSION_FORMAT) {
            return Err(corrupt("not a session file"));
        }
        let version = value
            .get("version")
            .and_then(Value::as_u64)
            .ok_or_else(|| corrupt("missing version"))?;
        if version != u64::from(SESSION_FORMAT_VERSION) {
            return Err(DqiError::SessionVersion {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: SESSION_FORMAT_VERSION,
            });
        }
        let doc: SessionDocument = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
        Session::from_document(doc, base)
    }

    pub fn from_document(doc: SessionDocument, base: Option<&Path>) -> Result<Session> {
        let mut store = BTreeMap::new();
        for rec in doc.snapshots {
            let csv = match (rec.csv, &rec.file) {
                (Some(csv), _) => csv.into_bytes(),
                (None, Some(file)) => {
                    let base = base.ok_or_else(|| corrupt("external snapshot without a base directory"))?;
                    std::fs::read(base.join(file))?
                }
                (None, None) => return Err(corrupt(format!("snapshot {} has no data", rec.id))),
            };
            let opts = IngestOptions::canonical(&rec.columns, rec.label_column.as_deref());
            let mut ds = ingest_csv(&csv, &opts)
                .map_err(|e| corrupt(format!("snapshot {}: {e}", rec.id)))?
                .dataset;
            if ds.snapshot_id() != &rec.id {
                return Err(corrupt(format!("snapshot {} hashes to {}", rec.id, ds.snapshot_id())));
            }
            ds.set_parent(rec.parent);
            store.insert(rec.id, Arc::new(ds));
        }
        let known = |id: &SnapshotId| {
            if store.contains_key(id) {
                Ok(())
            } else {
                Err(corrupt(format!("missing snapshot {id}")))
            }
        };
        known(&doc.root)?;
        for e in &doc.lineage {
            known(&e.result.input_snapshot)?;
            known(&e.result.output_snapshot)?;
        }
        if doc.cursor > doc.lineage.len() {
            return Err(corrupt("cursor beyond lineage"));
        }
        doc.config.validate()?;
        let session = Session {
            id: doc.session_id,
            store,
            root: doc.root,
            ingest: doc.ingest,
            lineage: doc.lineage,
            cursor: doc.cursor,
            baseline_eval: doc.baseline_eval,
            evaluations: doc.evaluations,
            config: doc.config,
        };
        if session.digest() != doc.digest {
            return Err(corrupt("digest mismatch"));
        }
        Ok(session)
    }
}
