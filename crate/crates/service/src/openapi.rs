//! The OpenAPI document describing the HTTP API and the file formats.
//!
//! `docs/openapi.json` in the repository is this document, regenerated with
//! `dqi schema > docs/openapi.json`; a test keeps the two in sync.

use dqi_core::dimensions::QualityReport;
use dqi_core::drift::DriftReport;
use dqi_core::pipeline::{Evaluation, RankedCandidate, Script, SessionConfig, SessionDocument, SessionState};
use dqi_core::tabular::ColumnStats;
use schemars::generate::{SchemaGenerator, SchemaSettings};
use schemars::JsonSchema;
use serde_json::{json, Map, Value};

use crate::api::*;
use crate::error::ApiError;

enum Body {
    Json(Value),
    Csv,
}

struct Endpoint {
    path: &'static str,
    method: &'static str,
    summary: &'static str,
    params: &'static [(&'static str, &'static str, bool)],
    request: Option<Value>,
    ok_status: &'static str,
    response: Body,
}

fn schema<T: JsonSchema>(g: &mut SchemaGenerator) -> Value {
    g.subschema_for::<T>().to_value()
}

const ID: (&str, &str, bool) = ("id", "path", true);
const SNAPSHOT: (&str, &str, bool) = ("snapshot", "query", false);

fn endpoints(g: &mut SchemaGenerator) -> Vec<Endpoint> {
    let e = |path, method, summary, params, request, ok_status, response| Endpoint {
        path,
        method,
        summary,
        params,
        request,
        ok_status,
        response,
    };
    vec![
        e("/health", "get", "Liveness probe", &[], None, "200", Body::Json(schema::<Health>(g))),
        e("/openapi.json", "get", "This document", &[], None, "200", Body::Json(json!({ "type": "object" }))),
        e("/procedures/schema", "get", "Every procedure method with its parameters", &[], None, "200", Body::Json(schema::<ProcedureCatalog>(g))),
        e("/sessions", "get", "List live sessions", &[], None, "200", Body::Json(schema::<SessionList>(g))),
        e(
            "/sessions",
            "post",
            "Upload a CSV and open a session (JSON body, or raw text/csv with ?label=)",
            &[("label", "query", false)],
            Some(schema::<CreateSessionRequest>(g)),
            "201",
            Body::Json(schema::<CreateSessionResponse>(g)),
        ),
        e("/sessions/{id}", "get", "Session state", &[ID], None, "200", Body::Json(schema::<SessionState>(g))),
        e(
            "/sessions/{id}/report",
            "get",
            "Quality report of the current (or given) snapshot",
            &[ID, SNAPSHOT],
            None,
            "200",
            Body::Json(schema::<QualityReport>(g)),
        ),
        e(
            "/sessions/{id}/columns/{col}/stats",
            "get",
            "Column statistics",
            &[ID, ("col", "path", true), SNAPSHOT],
            None,
            "200",
            Body::Json(schema::<ColumnStats>(g)),
        ),
        e(
            "/sessions/{id}/preview",
            "post",
            "Preview one procedure on a scratch copy",
            &[ID],
            Some(schema::<PreviewRequest>(g)),
            "200",
            Body::Json(schema::<RankedCandidate>(g)),
        ),
        e(
            "/sessions/{id}/candidates",
            "post",
            "Rank candidate procedures",
            &[ID],
            Some(schema::<CandidatesRequest>(g)),
            "200",
            Body::Json(schema::<CandidatesResponse>(g)),
        ),
        e(
            "/sessions/{id}/apply",
            "post",
            "Apply a procedure to the current snapshot",
            &[ID],
            Some(schema::<ApplyRequest>(g)),
            "200",
            Body::Json(schema::<ApplyResponse>(g)),
        ),
        e(
            "/sessions/{id}/undo",
            "post",
            "Move the cursor back one step",
            &[ID],
            Some(schema::<StepRequest>(g)),
            "200",
            Body::Json(schema::<StepResponse>(g)),
        ),
        e(
            "/sessions/{id}/redo",
            "post",
            "Move the cursor forward one step",
            &[ID],
            Some(schema::<StepRequest>(g)),
            "200",
            Body::Json(schema::<StepResponse>(g)),
        ),
        e(
            "/sessions/{id}/evaluate",
            "post",
            "Cross-validate the current snapshot against the root",
            &[ID],
            Some(schema::<EvaluateRequest>(g)),
            "200",
            Body::Json(schema::<Evaluation>(g)),
        ),
        e(
            "/sessions/{id}/drift",
            "get",
            "Drift between two snapshots (root to current by default)",
            &[ID, ("from", "query", false), ("to", "query", false)],
            None,
            "200",
            Body::Json(schema::<DriftReport>(g)),
        ),
        e(
            "/sessions/{id}/export.csv",
            "get",
            "Canonical CSV of the current (or given) snapshot",
            &[ID, SNAPSHOT],
            None,
            "200",
            Body::Csv,
        ),
        e("/sessions/{id}/script", "get", "Replayable script of the applied steps", &[ID], None, "200", Body::Json(schema::<Script>(g))),
        e("/sessions/{id}/config", "get", "Session configuration", &[ID], None, "200", Body::Json(schema::<SessionConfig>(g))),
        e(
            "/sessions/{id}/config",
            "put",
            "Replace the session configuration",
            &[ID],
            Some(schema::<SessionConfig>(g)),
            "200",
            Body::Json(schema::<SessionState>(g)),
        ),
    ]
}

pub fn document() -> Value {
    let mut g = SchemaSettings::draft2020_12()
        .with(|s| s.definitions_path = "/components/schemas".into())
        .into_generator();
    let error = schema::<ApiError>(&mut g);
    // File formats without an endpoint of their own.
    schema::<SessionDocument>(&mut g);

    let mut paths = Map::new();
    for ep in endpoints(&mut g) {
        let content = match ep.response {
            Body::Json(s) => json!({ "application/json": { "schema": s } }),
            Body::Csv => json!({ "text/csv": { "schema": { "type": "string" } } }),
        };
        let params: Vec<Value> = ep
            .params
            .iter()
            .map(|(name, at, required)| json!({ "name": name, "in": at, "required": required, "schema": { "type": "string" } }))
            .collect();
        let mut op = json!({
            "summary": ep.summary,
            "responses": {
                ep.ok_status: { "description": "success", "content": content },
                "default": {
                    "description": "error envelope; 400 validation, 404 unknown id, 409 stale snapshot, 500 internal",
                    "content": { "application/json": { "schema": error } }
                }
            }
        });
        if !params.is_empty() {
            op["parameters"] = Value::Array(params);
        }
        if let Some(req) = ep.request {
            op["requestBody"] = json!({ "required": true, "content": { "application/json": { "schema": req } } });
        }
        paths
            .entry(ep.path.to_string())
            .or_insert_with(|| Value::Object(Map::new()))
            .as_object_mut()
            .expect("path item is an object")
            .insert(ep.method.to_string(), op);
    }

    let mut schemas: Vec<(String, Value)> = g.take_definitions(true).into_iter().collect();
    schemas.sort_by(|a, b| a.0.cmp(&b.0));
    json!({
        "openapi": "3.1.0",
        "info": {
            "title": "dqi",
            "version": env!("CARGO_PKG_VERSION"),
            "description": "Data-quality improvement sessions over tabular datasets. No authentication: bind to localhost."
        },
        "paths": paths,
        "components": { "schemas": Map::from_iter(schemas) }
    })
}
