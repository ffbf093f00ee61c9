//! HTTP facade: table builds, one-shot queries and chat sessions.
//!
//! Every body is JSON. Errors come back as `{"kind": ..., "message": ...}`
//! with a 4xx status when the caller is at fault and 5xx otherwise. Blocking
//! work (model calls, the store) runs on the blocking pool; turns within one
//! session are serialized by a per-session lock.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};

use dir_core::agent::{route_table, route_targets, step, AgentConfig, AgentTurn, Session, SessionStore};
use dir_core::config::{Config, IngestSection};
use dir_core::ingest::{collect_text_fields, load_context_table, SourceFormat};
use dir_core::model::{ColumnName, DialogState};
use dir_core::pipeline::write_artifacts;
use dir_core::{Engine, Error};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError { status, kind: kind.into(), message: message.into() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownTable(_) | Error::UnknownSession(_) => StatusCode::NOT_FOUND,
            e if e.is_user_error() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.kind(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"kind": self.kind, "message": self.message}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Pending,
    Ready,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub table_id: String,
    pub state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<serde_json::Value>,
}

/// Shared server state.
pub struct AppState {
    engine: Arc<Engine>,
    sessions: SessionStore,
    agent: AgentConfig,
    workdir: PathBuf,
    ingest: IngestSection,
    session_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    jobs: RwLock<BTreeMap<String, JobStatus>>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, sessions: SessionStore, config: &Config) -> Self {
        AppState {
            engine,
            sessions,
            agent: config.agent.clone(),
            workdir: config.workdir.clone(),
            ingest: config.ingest.clone(),
            session_locks: Mutex::new(HashMap::new()),
            jobs: RwLock::new(BTreeMap::new()),
        }
    }

    /// Opens the configured store, loads built tables and the session directory.
    pub fn from_config(config: &Config) -> dir_core::Result<Self> {
        let engine = Arc::new(config.engine()?);
        let sessions = SessionStore::new(config.session_dir())?;
        Ok(AppState::new(engine, sessions, config))
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }

    fn session_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.session_locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> dir_core::Result<T> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", e.to_string())),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any);
    Router::new()
        .route("/tables", get(list_tables).post(create_table))
        .route("/tables/{id}/status", get(table_status))
        .route("/tables/{id}/schema", get(table_schema))
        .route("/tables/{id}/catalog", get(table_catalog))
        .route("/query", post(query))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .layer(cors)
        .with_state(state)
}

/// Binds `addr` and serves until the process is interrupted.
pub async fn serve(state: Arc<AppState>, addr: &str) -> dir_core::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local: SocketAddr = listener.local_addr()?;
    tracing::info!("listening on http://{local}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct TableSummary {
    table_id: String,
    domain_id: String,
    view: String,
    rows: usize,
    columns: usize,
    inferred_columns: usize,
}

async fn list_tables(State(state): State<Arc<AppState>>) -> Json<Vec<TableSummary>> {
    let tables = state
        .engine
        .tables()
        .iter()
        .map(|t| TableSummary {
            table_id: t.table_id().to_string(),
            domain_id: t.context.domain_id.clone(),
            view: t.schema.view.clone(),
            rows: t.context.rows.len(),
            columns: t.schema.columns.len(),
            inferred_columns: t.catalog.entries.len(),
        })
        .collect();
    Json(tables)
}

#[derive(Debug, Deserialize)]
struct CreateTable {
    table_id: String,
    #[serde(default)]
    domain_id: Option<String>,
    #[serde(default)]
    format: Option<SourceFormat>,
    /// The file contents, inline.
    data: String,
    #[serde(default)]
    primary_key: Option<String>,
    #[serde(default)]
    text_columns: Option<Vec<String>>,
}

async fn create_table(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateTable>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<JobStatus>)> {
    let Json(req) = body?;
    if !ColumnName::is_normalized(&req.table_id) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "schema_error",
            format!("table id {:?} must be lowercase words joined by underscores", req.table_id),
        ));
    }
    let pending = JobStatus { table_id: req.table_id.clone(), state: JobState::Pending, error: None };
    {
        let mut jobs = state.jobs.write().unwrap_or_else(|e| e.into_inner());
        if jobs.get(&req.table_id).is_some_and(|j| j.state == JobState::Pending) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "job_in_progress",
                format!("table {} is already being built", req.table_id),
            ));
        }
        jobs.insert(req.table_id.clone(), pending.clone());
    }

    let job_state = state.clone();
    tokio::spawn(async move {
        let table_id = req.table_id.clone();
        let worker = job_state.clone();
        let outcome = blocking(move || build_table(&worker, req)).await;
        let status = match outcome {
            Ok(()) => JobStatus { table_id: table_id.clone(), state: JobState::Ready, error: None },
            Err(e) => {
                tracing::warn!("building {table_id} failed: {}", e.message);
                JobStatus {
                    table_id: table_id.clone(),
                    state: JobState::Failed,
                    error: Some(json!({"kind": e.kind, "message": e.message})),
                }
            }
        };
        job_state.jobs.write().unwrap_or_else(|e| e.into_inner()).insert(table_id, status);
    });
    Ok((StatusCode::ACCEPTED, Json(pending)))
}

fn build_table(state: &AppState, req: CreateTable) -> dir_core::Result<()> {
    let mut section = state.ingest.clone();
    if let Some(pk) = req.primary_key {
        section.primary_key = pk;
    }
    if req.text_columns.is_some() {
        section.text_columns = req.text_columns;
    }
    let cfg = section.ingest_config()?;
    let format = req.format.unwrap_or(SourceFormat::Csv);
    let domain = req.domain_id.unwrap_or_else(|| req.table_id.clone());
    let table = load_context_table(req.data.as_bytes(), format, &req.table_id, &domain, &cfg)?;
    let text = collect_text_fields(&table, &cfg)?;
    let artifacts = state.engine.build_table(table.with_text_columns(text))?;
    write_artifacts(&state.workdir, &artifacts)?;
    Ok(())
}

async fn table_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<JobStatus>> {
    if let Some(job) = state.jobs.read().unwrap_or_else(|e| e.into_inner()).get(&id) {
        return Ok(Json(job.clone()));
    }
    state.engine.table(&id)?;
    Ok(Json(JobStatus { table_id: id, state: JobState::Ready, error: None }))
}

async fn table_schema(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.engine.table(&id)?.schema.clone()).into_response())
}

async fn table_catalog(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.engine.table(&id)?.catalog.clone()).into_response())
}

#[derive(Debug, Deserialize)]
struct QueryRequest {
    #[serde(default)]
    table_id: Option<String>,
    question: String,
}

async fn query(
    State(state): State<Arc<AppState>>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    if req.question.trim().is_empty() {
        return Err(Error::EmptyUtterance.into());
    }
    let margin = state.agent.switch_margin;
    let engine = state.engine.clone();
    let answer = blocking(move || {
        let table_id = match req.table_id {
            Some(t) => t,
            None => route_table(&req.question, &route_targets(&engine), None, margin)?.table_id,
        };
        engine.ask(&table_id, &req.question, &DialogState::new(&table_id))
    })
    .await?;
    Ok(Json(answer).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct CreateSession {
    #[serde(default)]
    session_id: Option<String>,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Option<Json<CreateSession>>,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let id = req.session_id.unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    if state.sessions.exists(&id)? {
        return Err(ApiError::new(StatusCode::CONFLICT, "session_exists", format!("session {id} already exists")));
    }
    let session = state.sessions.create(&id)?;
    Ok((StatusCode::CREATED, Json(json!({"session_id": session.session_id}))))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Session>> {
    Ok(Json(state.sessions.load(&id)?))
}

#[derive(Debug, Deserialize)]
struct TurnRequest {
    utterance: String,
}

async fn post_turn(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<TurnRequest>, JsonRejection>,
) -> ApiResult<Json<AgentTurn>> {
    let Json(req) = body?;
    let lock = state.session_lock(&id);
    let _guard = lock.lock().await;
    let worker = state.clone();
    let turn = blocking(move || {
        let session = worker.sessions.load(&id)?;
        let turn = step(&session, &req.utterance, &worker.engine, &worker.agent)?;
        worker.sessions.append(&id, &turn)?;
        Ok(turn)
    })
    .await?;
    Ok(Json(turn))
}
