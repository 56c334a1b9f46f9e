//! HTTP router and session registry.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dqi_core::dimensions::{quality_report, QualityReport};
use dqi_core::drift::DriftReport;
use dqi_core::pipeline::{Evaluation, Script, Session, SessionConfig, SessionState};
use dqi_core::procedures::method_schemas;
use dqi_core::tabular::{column_stats, ColumnStats, Dataset, IngestOptions, SnapshotId};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::api::*;
use crate::error::ApiError;
use crate::openapi;

pub const DEFAULT_UPLOAD_LIMIT: usize = 50 * 1024 * 1024;

type SessionRef = Arc<RwLock<Session>>;

/// Live sessions, optionally mirrored to `<data_dir>/<session id>.json`.
pub struct AppState {
    sessions: RwLock<HashMap<String, SessionRef>>,
    data_dir: Option<PathBuf>,
    upload_limit: usize,
}

fn read<T>(lock: &RwLock<T>) -> RwLockReadGuard<'_, T> {
    lock.read().unwrap_or_else(|e| e.into_inner())
}

fn write<T>(lock: &RwLock<T>) -> RwLockWriteGuard<'_, T> {
    lock.write().unwrap_or_else(|e| e.into_inner())
}

impl AppState {
    /// Opens the registry, loading every session file found in `data_dir`.
    pub fn open(data_dir: Option<PathBuf>, upload_limit: usize) -> Result<AppState, ApiError> {
        let mut sessions = HashMap::new();
        if let Some(dir) = &data_dir {
            std::fs::create_dir_all(dir).map_err(|e| ApiError::internal(format!("cannot create {}: {e}", dir.display())))?;
            let entries = std::fs::read_dir(dir).map_err(|e| ApiError::internal(format!("cannot read {}: {e}", dir.display())))?;
            for entry in entries.flatten() {
                let path = entry.path();
                if path.extension().is_some_and(|x| x == "json") {
                    match Session::load(&path) {
                        Ok(s) => {
                            sessions.insert(s.id().to_string(), Arc::new(RwLock::new(s)));
                        }
                        Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
                    }
                }
            }
        }
        Ok(AppState {
            sessions: RwLock::new(sessions),
            data_dir,
            upload_limit,
        })
    }

    pub fn in_memory() -> AppState {
        AppState::open(None, DEFAULT_UPLOAD_LIMIT).expect("no data dir to read")
    }

    fn session(&self, id: &str) -> Result<SessionRef, ApiError> {
        read(&self.sessions).get(id).cloned().ok_or_else(|| ApiError::unknown_session(id))
    }

    fn session_path(&self, dir: &Path, id: &str) -> PathBuf {
        dir.join(format!("{id}.json"))
    }

    fn persist(&self, s: &Session) -> Result<(), ApiError> {
        if let Some(dir) = &self.data_dir {
            s.save(&self.session_path(dir, s.id()))?;
        }
        Ok(())
    }
}

pub type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    let limit = state.upload_limit;
    Router::new()
        .route("/health", get(health))
        .route("/openapi.json", get(openapi_document))
        .route("/procedures/schema", get(procedure_schema))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/columns/{col}/stats", get(stats))
        .route("/sessions/{id}/preview", post(preview))
        .route("/sessions/{id}/candidates", post(candidates))
        .route("/sessions/{id}/apply", post(apply))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/redo", post(redo))
        .route("/sessions/{id}/evaluate", post(evaluate))
        .route("/sessions/{id}/drift", get(drift))
        .route("/sessions/{id}/export.csv", get(export_csv))
        .route("/sessions/{id}/script", get(script))
        .route("/sessions/{id}/config", get(get_config).put(put_config))
        .fallback(|| async { ApiError::new("not_found", "no such endpoint") })
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Serves `router` on `bind` until interrupted. `on_bound` receives the
/// actual address, which matters when binding port 0.
pub async fn serve(bind: &str, state: Shared, on_bound: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Runs engine work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(ApiError::internal(format!("worker failed: {e}"))))
}

fn body_error(rejection: BytesRejection) -> ApiError {
    if rejection.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::new("upload_too_large", "request body exceeds the upload limit")
    } else {
        ApiError::new("invalid_request", rejection.body_text())
    }
}

fn parse_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let bytes = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}".as_slice() } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| {
        ApiError::new("invalid_request", format!("invalid request body: {e}")).with_detail(json!({ "line": e.line(), "column": e.column() }))
    })
}

/// JSON request body with errors in the API envelope. An empty body reads
/// as `{}`.
pub struct JsonBody<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for JsonBody<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state).await.map_err(body_error)?;
        parse_json(&bytes).map(JsonBody)
    }
}

fn guard(session: &Session, sent: &SnapshotId) -> Result<(), ApiError> {
    if sent != session.current_id() {
        return Err(ApiError::stale_snapshot(sent.as_str(), session.current_id().as_str()));
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
struct SnapshotQuery {
    snapshot: Option<String>,
}

fn pick(session: &Session, q: &SnapshotQuery) -> Result<Arc<Dataset>, ApiError> {
    match &q.snapshot {
        Some(id) => Ok(Arc::clone(session.snapshot(&SnapshotId(id.clone()))?)),
        None => Ok(Arc::clone(session.current())),
    }
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into() })
}

async fn openapi_document() -> Json<serde_json::Value> {
    Json(openapi::document())
}

async fn procedure_schema() -> Json<ProcedureCatalog> {
    Json(ProcedureCatalog { methods: method_schemas() })
}

async fn list_sessions(State(app): State<Shared>) -> Json<SessionList> {
    let all: Vec<SessionRef> = read(&app.sessions).values().cloned().collect();
    let mut sessions: Vec<SessionState> = all.iter().map(|s| read(s).state()).collect();
    sessions.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    Json(SessionList { sessions })
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    label: Option<String>,
}

/// Accepts either a JSON [`CreateSessionRequest`] or a raw `text/csv` body
/// (with `?label=` for the label column).
async fn create_session(
    State(app): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<UploadQuery>,
    body: Result<Bytes, BytesRejection>,
) -> Result<(StatusCode, Json<CreateSessionResponse>), ApiError> {
    let body = body.map_err(body_error)?;
    let is_csv = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv") || v.starts_with("text/plain"));
    let mut req = if is_csv {
        CreateSessionRequest {
            csv: String::from_utf8(body.to_vec()).map_err(|_| ApiError::new("invalid_request", "CSV body is not UTF-8"))?,
            ingest: None,
            config: None,
        }
    } else {
        parse_json::<CreateSessionRequest>(&body)?
    };
    if let Some(label) = q.label {
        req.ingest.get_or_insert_with(IngestOptions::default).label_column = Some(label);
    }
    let app2 = Arc::clone(&app);
    let resp = blocking(move || {
        let config = req.config.unwrap_or_default();
        let (session, warnings) = Session::from_csv(req.csv.as_bytes(), req.ingest.unwrap_or_default(), config)?;
        let report = session.report()?;
        app2.persist(&session)?;
        let state = session.state();
        write(&app2.sessions).insert(session.id().to_string(), Arc::new(RwLock::new(session)));
        Ok(CreateSessionResponse {
            session: state,
            report,
            warnings,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(resp)))
}

async fn get_session(State(app): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionState>, ApiError> {
    let s = app.session(&id)?;
    let state = read(&s).state();
    Ok(Json(state))
}

async fn report(State(app): State<Shared>, UrlPath(id): UrlPath<String>, Query(q): Query<SnapshotQuery>) -> Result<Json<QualityReport>, ApiError> {
    let s = app.session(&id)?;
    let (ds, cfg) = {
        let s = read(&s);
        (pick(&s, &q)?, s.config().quality.clone())
    };
    blocking(move || Ok(quality_report(&ds, &cfg)?)).await.map(Json)
}

async fn stats(
    State(app): State<Shared>,
    UrlPath((id, col)): UrlPath<(String, String)>,
    Query(q): Query<SnapshotQuery>,
) -> Result<Json<ColumnStats>, ApiError> {
    let s = app.session(&id)?;
    let ds = pick(&read(&s), &q)?;
    Ok(Json(column_stats(&ds, &col)?))
}

/// A copy of the session taken under the read lock, so that long previews
/// neither block nor observe a concurrent apply.
fn snapshot_of(s: &SessionRef, sent: &SnapshotId) -> Result<Session, ApiError> {
    let s = read(s);
    guard(&s, sent)?;
    Ok(s.clone())
}

async fn preview(
    State(app): State<Shared>,
    UrlPath(id): UrlPath<String>,
    JsonBody(req): JsonBody<PreviewRequest>,
) -> Result<Json<dqi_core::pipeline::RankedCandidate>, ApiError> {
    let s = snapshot_of(&app.session(&id)?, &req.snapshot_id)?;
    blocking(move || Ok(s.preview(&req.spec)?)).await.map(Json)
}

async fn candidates(
    State(app): State<Shared>,
    UrlPath(id): UrlPath<String>,
    JsonBody(req): JsonBody<CandidatesRequest>,
) -> Result<Json<CandidatesResponse>, ApiError> {
    let mut s = snapshot_of(&app.session(&id)?, &req.snapshot_id)?;
    blocking(move || {
        if let Some(weights) = req.weights {
            let config = SessionConfig {
                ranking: weights,
                ..s.config().clone()
            };
            s.set_config(config)?;
        }
        let candidates = s.rank(&req.specs)?;
        Ok(CandidatesResponse {
            snapshot_id: req.snapshot_id,
            weights: s.config().ranking,
            candidates,
        })
    })
    .await
    .map(Json)
}

async fn apply(State(app): State<Shared>, UrlPath(id): UrlPath<String>, JsonBody(req): JsonBody<ApplyRequest>) -> Result<Json<ApplyResponse>, ApiError> {
    let s = app.session(&id)?;
    blocking(move || {
        let mut s = write(&s);
        guard(&s, &req.snapshot_id)?;
        let entry = s.apply(&req.spec)?.clone();
        app.persist(&s)?;
        Ok(ApplyResponse { entry, session: s.state() })
    })
    .await
    .map(Json)
}

async fn step(app: Shared, id: String, req: StepRequest, forward: bool) -> Result<Json<StepResponse>, ApiError> {
    let s = app.session(&id)?;
    let mut s = write(&s);
    if let Some(sent) = &req.snapshot_id {
        guard(&s, sent)?;
    }
    let outcome = if forward { s.redo() } else { s.undo() };
    if outcome.moved {
        app.persist(&s)?;
    }
    Ok(Json(StepResponse { outcome, session: s.state() }))
}

async fn undo(State(app): State<Shared>, UrlPath(id): UrlPath<String>, JsonBody(req): JsonBody<StepRequest>) -> Result<Json<StepResponse>, ApiError> {
    step(app, id, req, false).await
}

async fn redo(State(app): State<Shared>, UrlPath(id): UrlPath<String>, JsonBody(req): JsonBody<StepRequest>) -> Result<Json<StepResponse>, ApiError> {
    step(app, id, req, true).await
}

async fn evaluate(State(app): State<Shared>, UrlPath(id): UrlPath<String>, JsonBody(req): JsonBody<EvaluateRequest>) -> Result<Json<Evaluation>, ApiError> {
    let s = app.session(&id)?;
    blocking(move || {
        let mut s = write(&s);
        let ev = s.evaluate(req.config)?;
        app.persist(&s)?;
        Ok(ev)
    })
    .await
    .map(Json)
}

#[derive(Debug, Deserialize)]
struct DriftQuery {
    from: Option<String>,
    to: Option<String>,
}

/// Drift between two snapshots, by default from the root to the current one.
async fn drift(State(app): State<Shared>, UrlPath(id): UrlPath<String>, Query(q): Query<DriftQuery>) -> Result<Json<DriftReport>, ApiError> {
    let s = app.session(&id)?;
    let s = read(&s).clone();
    blocking(move || {
        let from = q.from.map_or_else(|| s.root().snapshot_id().clone(), SnapshotId);
        let to = q.to.map_or_else(|| s.current_id().clone(), SnapshotId);
        Ok(s.drift(&from, &to)?)
    })
    .await
    .map(Json)
}

async fn export_csv(State(app): State<Shared>, UrlPath(id): UrlPath<String>, Query(q): Query<SnapshotQuery>) -> Result<Response, ApiError> {
    let s = app.session(&id)?;
    let ds = pick(&read(&s), &q)?;
    let snapshot = HeaderValue::from_str(ds.snapshot_id().as_str()).map_err(|e| ApiError::internal(e.to_string()))?;
    let mut resp = ds.to_csv().into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("text/csv; charset=utf-8"));
    headers.insert("x-snapshot-id", snapshot);
    Ok(resp)
}

async fn script(State(app): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<Script>, ApiError> {
    let s = app.session(&id)?;
    let script = read(&s).script();
    Ok(Json(script))
}

async fn get_config(State(app): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionConfig>, ApiError> {
    let s = app.session(&id)?;
    let config = read(&s).config().clone();
    Ok(Json(config))
}

async fn put_config(State(app): State<Shared>, UrlPath(id): UrlPath<String>, JsonBody(config): JsonBody<SessionConfig>) -> Result<Json<SessionState>, ApiError> {
    let s = app.session(&id)?;
    let mut s = write(&s);
    s.set_config(config)?;
    app.persist(&s)?;
    Ok(Json(s.state()))
}
