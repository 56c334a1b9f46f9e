use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{DqiError, Result};
use crate::procedures::{run_spec, ProcedureSpec};
use crate::tabular::{ingest_csv, Dataset, IngestOptions, SnapshotId};

pub const SCRIPT_VERSION: u32 = 1;

/// A lineage exported as a reproducible list of steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Script {
    pub version: u32,
    /// How the root CSV is read.
    pub ingest: IngestOptions,
    /// Expected hash of the ingested root; checked when present.
    pub root_snapshot: Option<SnapshotId>,
    pub steps: Vec<ProcedureSpec>,
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub dataset: Dataset,
    /// Root id followed by the output id of every step.
    pub snapshots: Vec<SnapshotId>,
}

/// Re-runs a script from the root CSV.
pub fn replay(csv: &[u8], script: &Script) -> Result<Replay> {
    if script.version != SCRIPT_VERSION {
        return Err(DqiError::InvalidConfig(format!(
            "script version {} is not supported (expected {SCRIPT_VERSION})",
            script.version
        )));
    }
    let mut ds = ingest_csv(csv, &script.ingest)?.dataset;
    if let Some(expected) = &script.root_snapshot {
        if expected != ds.snapshot_id() {
            return Err(DqiError::RootMismatch {
                expected: expected.to_string(),
                found: ds.snapshot_id().to_string(),
            });
        }
    }
    let mut snapshots = vec![ds.snapshot_id().clone()];
    for spec in &script.steps {
        ds = run_spec(&ds, spec)?.output;
        snapshots.push(ds.snapshot_id().clone());
    }
    Ok(Replay { dataset: ds, snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{Session, SessionConfig};
    use crate::procedures::Family;

    #[test]
    fn replay_matches_session() {
        let csv = b"a,b\n1, x\n,y \n3,z\n3,z\n";
        let (mut s, _) = Session::from_csv(csv, IngestOptions::default(), SessionConfig::default()).unwrap();
        s.apply(&ProcedureSpec::new(Family::Standardize, "trim_whitespace").on(&["b"])).unwrap();
        s.apply(&ProcedureSpec::new(Family::Impute, "median").on(&["a"])).unwrap();
        s.apply(&ProcedureSpec::new(Family::Dedup, "exact")).unwrap();
        s.undo();
        let script = s.script();
        assert_eq!(script.steps.len(), 2);
        let text = serde_json::to_string(&script).unwrap();
        let back: Script = serde_json::from_str(&text).unwrap();
        let out = replay(csv, &back).unwrap();
        assert_eq!(out.dataset.snapshot_id(), s.current_id());
        assert_eq!(out.snapshots.len(), 3);

        let other = replay(b"a,b\n9,q\n", &back);
        assert!(matches!(other, Err(DqiError::RootMismatch { .. })));
    }
}
