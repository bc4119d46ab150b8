use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use dpp_core::engine::{plan, PlanError};
use dpp_core::{parse_program, Buffer, DataType, ExecError, Executor, LocalExecutor, StreamData};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use crate::runs::CreateError;
use crate::{AppState, INLINE_LIMIT, VERSION};

/// Request bodies above this size are refused before parsing.
const BODY_LIMIT: usize = 16 << 20;

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/status", get(status))
        .route("/v1/programs", post(upload))
        .route("/v1/programs/{id}", get(fetch_program))
        .route("/v1/programs/{id}/runs", post(create_run))
        .route("/v1/programs/{id}/runs:inline", post(inline_run))
        .route("/v1/runs/{id}", get(run_status).delete(cancel_run))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

fn error(code: StatusCode, message: impl Into<String>) -> Response {
    (code, Json(json!({ "error": message.into() }))).into_response()
}

async fn status(State(s): State<Shared>) -> Json<Value> {
    Json(json!({
        "version": VERSION,
        "workers": s.workers,
        "active_runs": s.runs.active(),
        "stored_programs": s.store.len(),
        "devices": [{ "kind": "cpu", "workers": s.workers }],
    }))
}

async fn upload(State(s): State<Shared>, body: Bytes) -> Response {
    let program = match parse_program(&body) {
        Ok(p) => p,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let report = program.validate();
    if !report.is_ok() {
        let mut v = serde_json::to_value(&report).expect("report serializes");
        v["error"] = json!("program failed validation");
        return (StatusCode::BAD_REQUEST, Json(v)).into_response();
    }
    let stored = tokio::task::spawn_blocking(move || s.store.insert(program)).await;
    match stored {
        Ok(Ok((entry, created))) => {
            let code = if created { StatusCode::CREATED } else { StatusCode::OK };
            (code, Json(json!({ "program_id": entry.id }))).into_response()
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("store: {e}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn fetch_program(State(s): State<Shared>, Path(id): Path<String>) -> Response {
    match s.store.get(&id) {
        Some(p) => ([(header::CONTENT_TYPE, "application/json")], p.bytes.clone()).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown program {id}")),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunOptions {
    chunk_size: Option<usize>,
}

fn plan_error(e: PlanError) -> Response {
    error(StatusCode::BAD_REQUEST, e.to_string())
}

async fn create_run(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> Response {
    let options: RunOptions = if body.iter().all(u8::is_ascii_whitespace) {
        RunOptions::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(o) => o,
            Err(e) => return error(StatusCode::BAD_REQUEST, format!("run options: {e}")),
        }
    };
    let Some(stored) = s.store.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown program {id}"));
    };
    let w = options.chunk_size.unwrap_or(dpp_core::engine::DEFAULT_CHUNK_SIZE);
    let plan = match plan(&stored.program, w) {
        Ok(p) => p,
        Err(e) => return plan_error(e),
    };
    match s.runs.create(&id, plan, s.workers) {
        Ok(run) => (
            StatusCode::CREATED,
            Json(json!({ "run_id": run.id, "data_port": run.data_port, "chunk_size": run.chunk_size })),
        )
            .into_response(),
        Err(CreateError::TooManyRuns(n)) => error(StatusCode::CONFLICT, format!("{n} runs already open")),
        Err(CreateError::Bind(e)) => error(StatusCode::SERVICE_UNAVAILABLE, format!("data port: {e}")),
    }
}

async fn run_status(State(s): State<Shared>, Path(id): Path<String>) -> Response {
    match s.runs.get(&id) {
        Some(run) => Json(run.snapshot()).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown run {id}")),
    }
}

async fn cancel_run(State(s): State<Shared>, Path(id): Path<String>) -> Response {
    match s.runs.remove(&id) {
        Some(run) => {
            run.cancel();
            Json(run.snapshot()).into_response()
        }
        None => error(StatusCode::NOT_FOUND, format!("unknown run {id}")),
    }
}

/// One stream of an inline run: flat little-endian scalars, base64.
#[derive(Debug, Serialize, Deserialize)]
pub struct InlineStream {
    #[serde(rename = "type")]
    pub data_type: DataType,
    pub data: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InlineRequest {
    chunk_size: Option<usize>,
    inputs: BTreeMap<String, InlineStream>,
}

fn exec_status(e: &ExecError) -> StatusCode {
    match e {
        ExecError::Kernel { .. } | ExecError::Chunk { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::BAD_REQUEST,
    }
}

async fn inline_run(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> Response {
    let req: InlineRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("inline run: {e}")),
    };
    let Some(stored) = s.store.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown program {id}"));
    };
    let mut inputs = BTreeMap::new();
    let mut total = 0usize;
    for (name, stream) in req.inputs {
        let bytes = match B64.decode(stream.data.as_bytes()) {
            Ok(b) => b,
            Err(e) => return error(StatusCode::BAD_REQUEST, format!("stream '{name}': {e}")),
        };
        total += bytes.len();
        if total > INLINE_LIMIT {
            return error(StatusCode::PAYLOAD_TOO_LARGE, format!("inline inputs exceed {INLINE_LIMIT} bytes"));
        }
        if bytes.len() % stream.data_type.byte_size() != 0 {
            return error(StatusCode::BAD_REQUEST, format!("stream '{name}': {} bytes is not a whole number of {}", bytes.len(), stream.data_type));
        }
        let buffer = match Buffer::from_le_bytes(stream.data_type.base, &bytes) {
            Ok(b) => b,
            Err(e) => return error(StatusCode::BAD_REQUEST, format!("stream '{name}': {e}")),
        };
        inputs.insert(name, StreamData::new(stream.data_type, buffer));
    }
    let exec = LocalExecutor::new(s.workers);
    let result = tokio::task::spawn_blocking(move || exec.execute(&stored.program, inputs, req.chunk_size)).await;
    match result {
        Ok(Ok(outputs)) => {
            let outputs: BTreeMap<String, Value> = outputs
                .into_iter()
                .map(|(name, d)| {
                    (name, json!({ "type": d.data, "count": d.count(), "data": B64.encode(d.buffer.to_le_bytes()) }))
                })
                .collect();
            Json(json!({ "outputs": outputs })).into_response()
        }
        Ok(Err(e)) => error(exec_status(&e), e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}
