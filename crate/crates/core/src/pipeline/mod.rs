//! Interactive cleaning sessions: a content-addressed snapshot store, the
//! lineage of applied procedures with an undo/redo cursor, candidate
//! preview and ranking, evaluation, and persistence.

mod candidates;
mod persist;
mod script;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dimensions::{quality_report, DimensionScores, QualityConfig, QualityReport};
use crate::drift::{drift_report, DriftReport, DEFAULT_ALPHA};
use crate::error::{DqiError, Result};
use crate::eval::{compare_performance, cross_validate, EvalConfig, EvalReport, PerformanceDelta};
use crate::procedures::{Procedure, ProcedureSpec, ProcedureSummary};
use crate::tabular::{ingest_csv, Dataset, IngestOptions, IngestWarning, SnapshotId};

pub use candidates::default_candidates;
pub use persist::{SessionDocument, SnapshotRecord, INLINE_SNAPSHOT_LIMIT, SESSION_FORMAT_VERSION};
pub use script::{replay, Replay, Script, SCRIPT_VERSION};

/// Weights of the composite candidate score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct RankingWeights {
    pub dq: f64,
    pub perf: f64,
    pub drift: f64,
}

impl Default for RankingWeights {
    fn default() -> Self {
        RankingWeights {
            dq: 1.0,
            perf: 1.0,
            drift: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct SessionConfig {
    pub alpha: f64,
    /// Evaluation settings; by default derived from the label column.
    pub eval: Option<EvalConfig>,
    pub quality: QualityConfig,
    pub ranking: RankingWeights,
    /// Folds used by previews, which trade accuracy for speed.
    pub preview_folds: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            alpha: DEFAULT_ALPHA,
            eval: None,
            quality: QualityConfig::default(),
            ranking: RankingWeights::default(),
            preview_folds: 3,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(DqiError::InvalidConfig(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        let w = &self.ranking;
        if [w.dq, w.perf, w.drift].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DqiError::InvalidConfig("ranking weights must be finite and non-negative".into()));
        }
        if self.preview_folds < 2 {
            return Err(DqiError::InvalidConfig("preview_folds must be at least 2".into()));
        }
        if let Some(e) = &self.eval {
            e.validate()?;
        }
        self.quality.validate()
    }

    pub fn eval_config(&self, ds: &Dataset) -> EvalConfig {
        self.eval.clone().unwrap_or_else(|| EvalConfig::for_dataset(ds))
    }
}

/// One applied procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LineageEntry {
    #[serde(flatten)]
    pub result: ProcedureSummary,
    /// Drift between input and output; absent when they share no columns.
    pub drift: Option<DriftReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CandidateError {
    pub code: String,
    pub message: String,
}

impl From<&DqiError> for CandidateError {
    fn from(e: &DqiError) -> Self {
        CandidateError {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CandidatePreview {
    pub result: ProcedureSummary,
    pub quality_before: DimensionScores,
    pub quality_after: DimensionScores,
    pub drift: DriftReport,
    /// Primary metric before and after (absent without a label).
    pub metric: Option<String>,
    pub metric_before: Option<f64>,
    pub metric_after: Option<f64>,
}

/// A previewed procedure with its composite score
/// `w_dq * dq_delta + w_perf * perf_delta - w_drift * drift_penalty`.
/// An unavailable `perf_delta` contributes 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RankedCandidate {
    pub spec: ProcedureSpec,
    pub input_snapshot: SnapshotId,
    pub valid: bool,
    pub score: Option<f64>,
    pub dq_delta: Option<f64>,
    /// Primary-metric change signed so that positive is better.
    pub perf_delta: Option<f64>,
    pub drift_penalty: Option<f64>,
    pub weights: RankingWeights,
    pub preview: Option<CandidatePreview>,
    pub error: Option<CandidateError>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl RankedCandidate {
    fn invalid(spec: ProcedureSpec, input: &SnapshotId, weights: RankingWeights, e: &DqiError) -> Self {
        RankedCandidate {
            spec,
            input_snapshot: input.clone(),
            valid: false,
            score: None,
            dq_delta: None,
            perf_delta: None,
            drift_penalty: None,
            weights,
            preview: None,
            error: Some(e.into()),
            notes: Vec::new(),
        }
    }
}

pub fn composite_score(w: &RankingWeights, dq_delta: f64, perf_delta: Option<f64>, drift_penalty: f64) -> f64 {
    w.dq * dq_delta + w.perf * perf_delta.unwrap_or(0.0) - w.drift * drift_penalty
}

/// Ranking order: valid before invalid, then higher score, higher
/// perf_delta, lower drift_penalty, and finally the procedure spec's JSON text.
pub fn candidate_order(a: &RankedCandidate, b: &RankedCandidate) -> std::cmp::Ordering {
    b.valid
        .cmp(&a.valid)
        .then_with(|| b.score.unwrap_or(0.0).total_cmp(&a.score.unwrap_or(0.0)))
        .then_with(|| b.perf_delta.unwrap_or(0.0).total_cmp(&a.perf_delta.unwrap_or(0.0)))
        .then_with(|| a.drift_penalty.unwrap_or(0.0).total_cmp(&b.drift_penalty.unwrap_or(0.0)))
        .then_with(|| a.spec.canonical_json().cmp(&b.spec.canonical_json()))
}

/// Result of an undo or redo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StepOutcome {
    pub moved: bool,
    pub notice: Option<String>,
    pub cursor: usize,
    pub current_snapshot: SnapshotId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Evaluation {
    pub report: EvalReport,
    /// Evaluation of the root snapshot with the same settings.
    pub baseline: EvalReport,
    pub delta: PerformanceDelta,
}

/// Serializable overview of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SessionState {
    pub session_id: String,
    pub root_snapshot: SnapshotId,
    pub current_snapshot: SnapshotId,
    pub cursor: usize,
    pub lineage: Vec<LineageEntry>,
    pub can_undo: bool,
    pub can_redo: bool,
    pub config: SessionConfig,
    pub label_column: Option<String>,
    pub row_count: usize,
    pub column_count: usize,
    pub baseline_eval: Option<EvalReport>,
    pub digest: String,
}

/// Everything computed once per snapshot before previewing candidates.
struct PreviewBase {
    report: QualityReport,
    eval_config: Option<EvalConfig>,
    eval: Option<Result<EvalReport>>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    store: BTreeMap<SnapshotId, Arc<Dataset>>,
    root: SnapshotId,
    ingest: IngestOptions,
    lineage: Vec<LineageEntry>,
    cursor: usize,
    baseline_eval: Option<EvalReport>,
    evaluations: Vec<EvalReport>,
    config: SessionConfig,
}

impl Session {
    /// `ingest` records how the root was read so scripts can replay it.
    pub fn new(root: Dataset, ingest: IngestOptions, config: SessionConfig) -> Result<Session> {
        config.validate()?;
        let id = root.snapshot_id().clone();
        Ok(Session {
            id: uuid::Uuid::new_v4().to_string(),
            store: BTreeMap::from([(id.clone(), Arc::new(root))]),
            root: id,
            ingest,
            lineage: Vec::new(),
            cursor: 0,
            baseline_eval: None,
            evaluations: Vec::new(),
            config,
        })
    }

    pub fn from_csv(bytes: &[u8], ingest: IngestOptions, config: SessionConfig) -> Result<(Session, Vec<IngestWarning>)> {
        let ingested = ingest_csv(bytes, &ingest)?;
        let session = Session::new(ingested.dataset, ingest, config)?;
        Ok((session, ingested.warnings))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: SessionConfig) -> Result<()> {
        config.validate()?;
        self.config = config;
        Ok(())
    }

    pub fn ingest_options(&self) -> &IngestOptions {
        &self.ingest
    }

    pub fn lineage(&self) -> &[LineageEntry] {
        &self.lineage
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn root(&self) -> &Arc<Dataset> {
        &self.store[&self.root]
    }

    pub fn current_id(&self) -> &SnapshotId {
        match self.cursor {
            0 => &self.root,
            c => &self.lineage[c - 1].result.output_snapshot,
        }
    }

    pub fn current(&self) -> &Arc<Dataset> {
        &self.store[self.current_id()]
    }

    pub fn snapshot(&self, id: &SnapshotId) -> Result<&Arc<Dataset>> {
        self.store.get(id).ok_or_else(|| DqiError::UnknownSnapshot(id.to_string()))
    }

    pub fn baseline_eval(&self) -> Option<&EvalReport> {
        self.baseline_eval.as_ref()
    }

    pub fn evaluations(&self) -> &[EvalReport] {
        &self.evaluations
    }

    pub fn report(&self) -> Result<QualityReport> {
        quality_report(self.current(), &self.config.quality)
    }

    pub fn drift(&self, from: &SnapshotId, to: &SnapshotId) -> Result<DriftReport> {
        drift_report(self.snapshot(from)?, self.snapshot(to)?, self.config.alpha)
    }

    fn preview_base(&self, ds: &Dataset) -> Result<PreviewBase> {
        let report = quality_report(ds, &self.config.quality)?;
        let (eval_config, eval) = match ds.label_column() {
            None => (None, None),
            Some(_) => {
                let cfg = EvalConfig {
                    folds: self.config.preview_folds,
                    ..self.config.eval_config(ds)
                };
                let eval = cross_validate(ds, &cfg);
                (Some(cfg), Some(eval))
            }
        };
        Ok(PreviewBase { report, eval_config, eval })
    }

    fn preview_with(&self, base: &PreviewBase, ds: &Dataset, spec: &ProcedureSpec) -> RankedCandidate {
        let weights = self.config.ranking;
        let input = ds.snapshot_id();
        let procedure = match Procedure::from_spec(spec) {
            Ok(p) => p,
            Err(e) => return RankedCandidate::invalid(spec.clone(), input, weights, &e),
        };
        let spec = procedure.to_spec();
        let outcome = (|| -> Result<_> {
            let result = procedure.apply(ds)?;
            let after = quality_report(&result.output, &self.config.quality)?;
            let drift = drift_report(ds, &result.output, self.config.alpha)?;
            Ok((result, after, drift))
        })();
        let (result, after, drift) = match outcome {
            Ok(v) => v,
            Err(e) => return RankedCandidate::invalid(spec, input, weights, &e),
        };
        let mut notes = Vec::new();
        let (mut metric, mut metric_before, mut metric_after, mut perf_delta) = (None, None, None, None);
        match (&base.eval, &base.eval_config) {
            (Some(Ok(before)), Some(cfg)) => match cross_validate(&result.output, cfg) {
                Ok(after_eval) => {
                    let delta = compare_performance(before, &after_eval).expect("same config");
                    metric = Some(before.primary_metric.clone());
                    metric_before = Some(before.primary());
                    metric_after = Some(after_eval.primary());
                    perf_delta = Some(delta.improvement);
                }
                Err(e) => {
                    let e = DqiError::InsufficientData(format!("evaluation after the procedure failed: {e}"));
                    return RankedCandidate::invalid(spec, input, weights, &e);
                }
            },
            (Some(Err(e)), _) => notes.push(format!("performance not evaluated: {e}")),
            _ => notes.push("performance not evaluated: no label column".into()),
        }
        let dq_delta = after.dataset.overall - base.report.dataset.overall;
        let drift_penalty = drift.drift_penalty;
        RankedCandidate {
            score: Some(composite_score(&weights, dq_delta, perf_delta, drift_penalty)),
            spec,
            input_snapshot: input.clone(),
            valid: true,
            dq_delta: Some(dq_delta),
            perf_delta,
            drift_penalty: Some(drift_penalty),
            weights,
            preview: Some(CandidatePreview {
                result: result.summary(),
                quality_before: base.report.dataset,
                quality_after: after.dataset,
                drift,
                metric,
                metric_before,
                metric_after,
            }),
            error: None,
            notes,
        }
    }

    /// Runs `spec` on a scratch copy of the current snapshot.
    pub fn preview(&self, spec: &ProcedureSpec) -> Result<RankedCandidate> {
        let ds = self.current();
        let base = self.preview_base(ds)?;
        Ok(self.preview_with(&base, ds, spec))
    }

    /// Previews every spec (the default candidates when `specs` is empty)
    /// and sorts them best first.
    pub fn rank(&self, specs: &[ProcedureSpec]) -> Result<Vec<RankedCandidate>> {
        let ds = self.current();
        let specs = if specs.is_empty() { default_candidates(ds) } else { specs.to_vec() };
        let base = self.preview_base(ds)?;
        let mut ranked: Vec<RankedCandidate> = specs.par_iter().map(|s| self.preview_with(&base, ds, s)).collect();
        ranked.sort_by(candidate_order);
        Ok(ranked)
    }

    /// Applies `spec` to the current snapshot, discarding any redo history.
    /// On error the session is unchanged.
    pub fn apply(&mut self, spec: &ProcedureSpec) -> Result<&LineageEntry> {
        let input = Arc::clone(self.current());
        let result = Procedure::from_spec(spec)?.apply(&input)?;
        let drift = drift_report(&input, &result.output, self.config.alpha).ok();
        let summary = result.summary();
        let id = result.output.snapshot_id().clone();
        self.store.entry(id).or_insert_with(|| Arc::new(result.output));
        self.lineage.truncate(self.cursor);
        self.lineage.push(LineageEntry { result: summary, drift });
        self.cursor += 1;
        Ok(&self.lineage[self.cursor - 1])
    }

    fn step_outcome(&self, moved: bool, notice: Option<&str>) -> StepOutcome {
        StepOutcome {
            moved,
            notice: notice.map(str::to_string),
            cursor: self.cursor,
            current_snapshot: self.current_id().clone(),
        }
    }

    pub fn undo(&mut self) -> StepOutcome {
        if self.cursor == 0 {
            return self.step_outcome(false, Some("nothing to undo"));
        }
        self.cursor -= 1;
        self.step_outcome(true, None)
    }

    pub fn redo(&mut self) -> StepOutcome {
        if self.cursor == self.lineage.len() {
            return self.step_outcome(false, Some("nothing to redo"));
        }
        self.cursor += 1;
        self.step_outcome(true, None)
    }

    /// Cross-validates the current snapshot and compares it with the root.
    pub fn evaluate(&mut self, config: Option<EvalConfig>) -> Result<Evaluation> {
        let current = Arc::clone(self.current());
        let cfg = match config {
            Some(c) => c,
            None => self.config.eval_config(&current),
        };
        let report = cross_validate(&current, &cfg)?;
        let baseline = match &self.baseline_eval {
            Some(b) if b.config == cfg => b.clone(),
            _ => {
                let b = cross_validate(self.root(), &cfg)?;
                self.baseline_eval = Some(b.clone());
                b
            }
        };
        let delta = compare_performance(&baseline, &report)?;
        self.evaluations.push(report.clone());
        Ok(Evaluation { report, baseline, delta })
    }

    /// Steps up to the cursor as a replayable script.
    pub fn script(&self) -> Script {
        Script {
            version: SCRIPT_VERSION,
            ingest: self.ingest.clone(),
            root_snapshot: Some(self.root.clone()),
            steps: self.lineage[..self.cursor].iter().map(|e| e.result.spec.clone()).collect(),
        }
    }

    /// Hash over the session's logical content: snapshot ids, lineage,
    /// cursor, configuration and evaluations.
    pub fn digest(&self) -> String {
        let doc = serde_json::json!({
            "root": self.root,
            "ingest": self.ingest,
            "lineage": self.lineage,
            "cursor": self.cursor,
            "config": self.config,
            "baseline_eval": self.baseline_eval,
            "evaluations": self.evaluations,
        });
        hex::encode(Sha256::digest(doc.to_string().as_bytes()))
    }

    pub fn state(&self) -> SessionState {
        let current = self.current();
        SessionState {
            session_id: self.id.clone(),
            root_snapshot: self.root.clone(),
            current_snapshot: self.current_id().clone(),
            cursor: self.cursor,
            lineage: self.lineage.clone(),
            can_undo: self.cursor > 0,
            can_redo: self.cursor < self.lineage.len(),
            config: self.config.clone(),
            label_column: current.label_column().map(str::to_string),
            row_count: current.row_count(),
            column_count: current.column_count(),
            baseline_eval: self.baseline_eval.clone(),
            digest: self.digest(),
        }
    }
}
