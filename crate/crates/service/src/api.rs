//! Request and response bodies of the HTTP API.

use dqi_core::dimensions::QualityReport;
use dqi_core::eval::EvalConfig;
use dqi_core::pipeline::{LineageEntry, RankedCandidate, RankingWeights, SessionConfig, SessionState, StepOutcome};
use dqi_core::procedures::{MethodSchema, ProcedureSpec};
use dqi_core::tabular::{IngestOptions, IngestWarning, SnapshotId};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct Health {
    pub status: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct CreateSessionRequest {
    /// The dataset as CSV text.
    pub csv: String,
    #[serde(default)]
    pub ingest: Option<IngestOptions>,
    #[serde(default)]
    pub config: Option<SessionConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct CreateSessionResponse {
    pub session: SessionState,
    /// Quality report of the uploaded snapshot.
    pub report: QualityReport,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct SessionList {
    pub sessions: Vec<SessionState>,
}

/// Mutating and previewing requests name the snapshot they were computed
/// against; a mismatch with the session's current snapshot is a conflict.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct PreviewRequest {
    pub snapshot_id: SnapshotId,
    pub spec: ProcedureSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct CandidatesRequest {
    pub snapshot_id: SnapshotId,
    /// Specs to rank; the default candidate list when empty.
    #[serde(default)]
    pub specs: Vec<ProcedureSpec>,
    /// Ranking weights for this request only; the session's weights
    /// otherwise.
    #[serde(default)]
    pub weights: Option<RankingWeights>,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct CandidatesResponse {
    pub snapshot_id: SnapshotId,
    pub weights: RankingWeights,
    /// Best first; invalid candidates last.
    pub candidates: Vec<RankedCandidate>,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct ApplyRequest {
    pub snapshot_id: SnapshotId,
    pub spec: ProcedureSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct ApplyResponse {
    pub entry: LineageEntry,
    pub session: SessionState,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, JsonSchema)]
pub struct StepRequest {
    /// Checked against the current snapshot when present.
    #[serde(default)]
    pub snapshot_id: Option<SnapshotId>,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct StepResponse {
    pub outcome: StepOutcome,
    pub session: SessionState,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, JsonSchema)]
pub struct EvaluateRequest {
    /// Evaluation settings; the session's settings when absent.
    #[serde(default)]
    pub config: Option<EvalConfig>,
}

#[derive(Debug, Clone, Serialize, JsonSchema)]
pub struct ProcedureCatalog {
    pub methods: Vec<MethodSchema>,
}
