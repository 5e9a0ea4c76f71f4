//! HTTP API. Queries and evaluations run on blocking worker threads; callers
//! get 202 with an id and poll.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use super::build::persist_tank;
use super::config::{ConfigError, EngineConfig};
use crate::engine::{load_run, Engine, RunRecord, RunStatus};
use crate::evaluation::{load_gold, run_suite, EvalSummary, SuiteOptions};
use crate::knowledge::{Document, DocumentSource, KnowledgeError};
use crate::planning::Expertise;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("address {0} is already in use")]
    PortInUse(String),
    #[error(transparent)]
    ConfigInvalid(#[from] ConfigError),
    #[error("server: {0}")]
    Io(String),
}

#[derive(Debug, Clone)]
enum Job<T> {
    Running,
    Done(Arc<T>),
    Failed(String),
}

pub struct AppState {
    pub engine: Arc<Engine>,
    pub config: Arc<EngineConfig>,
    runs: Mutex<HashMap<String, Job<RunRecord>>>,
    evals: Mutex<HashMap<String, Job<EvalSummary>>>,
    eval_seq: AtomicU64,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, config: Arc<EngineConfig>) -> Self {
        Self {
            engine,
            config,
            runs: Mutex::new(HashMap::new()),
            evals: Mutex::new(HashMap::new()),
            eval_seq: AtomicU64::new(0),
        }
    }
}

pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} `{id}` not found"))
    }

    fn not_ready(id: &str) -> Self {
        Self::new(StatusCode::CONFLICT, "not_ready", format!("run `{id}` is still running"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "error": { "kind": self.kind, "message": self.message } })),
        )
            .into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/tools", get(tools))
        .route("/query", post(submit_query))
        .route("/runs/:id", get(run_status))
        .route("/runs/:id/:part", get(run_part))
        .route("/documents", post(ingest))
        .route("/eval", post(submit_eval))
        .route("/eval/:id", get(eval_status))
        .with_state(state)
}

async fn health(State(s): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "tools": s.engine.registry.len(),
        "tanks": s.engine.knowledge.tank_names().len(),
    }))
}

async fn tools(State(s): State<Arc<AppState>>) -> Response {
    let catalog: Value = serde_json::from_str(&s.engine.registry.render_catalog()).unwrap_or(Value::Null);
    Json(json!({ "tools": catalog })).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRequest {
    prompt: String,
    #[serde(default)]
    expertise: Option<Expertise>,
}

fn bad_json(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string())
}

fn parse<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(bad_json)
}

async fn submit_query(State(s): State<Arc<AppState>>, body: axum::body::Bytes) -> ApiResult {
    let req: QueryRequest = parse(&body)?;
    if req.prompt.trim().is_empty() {
        return Err(bad_json("prompt is empty"));
    }
    let run_id = s.engine.run_ids.next_id();
    s.runs.lock().unwrap().insert(run_id.clone(), Job::Running);
    let state = s.clone();
    let id = run_id.clone();
    tokio::task::spawn_blocking(move || {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            state.engine.run_with_id(&req.prompt, req.expertise, &id)
        }));
        let job = match outcome {
            Ok(rec) => Job::Done(Arc::new(rec)),
            Err(_) => Job::Failed("run panicked".into()),
        };
        state.runs.lock().unwrap().insert(id, job);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": run_id, "status": "running" }))).into_response())
}

enum RunLookup {
    Running,
    Done(Arc<RunRecord>),
}

fn lookup_run(s: &AppState, id: &str) -> Result<RunLookup, ApiError> {
    match s.runs.lock().unwrap().get(id) {
        Some(Job::Running) => return Ok(RunLookup::Running),
        Some(Job::Done(rec)) => return Ok(RunLookup::Done(rec.clone())),
        Some(Job::Failed(msg)) => {
            return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "run_failed", msg.clone()))
        }
        None => {}
    }
    match load_run(&s.config.runs_dir(), id) {
        Ok(Some(rec)) => Ok(RunLookup::Done(Arc::new(rec))),
        Ok(None) => Err(ApiError::not_found("run", id)),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())),
    }
}

async fn run_status(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let body = match lookup_run(&s, &id)? {
        RunLookup::Running => json!({ "run_id": id, "status": RunStatus::Running }),
        RunLookup::Done(rec) => json!({
            "run_id": rec.run_id,
            "status": rec.status,
            "prompt": rec.prompt,
            "trace_status": rec.trace.status,
            "nodes": rec.trace.entries.len(),
            "has_report": rec.report.is_some(),
            "repair_attempts": rec.repair_attempts,
            "error": rec.error,
        }),
    };
    Ok(Json(body).into_response())
}

async fn run_part(State(s): State<Arc<AppState>>, Path((id, part)): Path<(String, String)>) -> ApiResult {
    let rec = match lookup_run(&s, &id)? {
        RunLookup::Running => return Err(ApiError::not_ready(&id)),
        RunLookup::Done(rec) => rec,
    };
    let value = match part.as_str() {
        "plan" => rec.plan.as_ref().map(|p| serde_json::to_value(p).unwrap()),
        "trace" => Some(serde_json::to_value(&rec.trace).unwrap()),
        "report" => rec.report.as_ref().map(|r| serde_json::to_value(r).unwrap()),
        _ => return Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no resource `{part}`"))),
    };
    value
        .map(|v| Json(v).into_response())
        .ok_or_else(|| ApiError::not_found(&format!("{part} of run"), &id))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentsRequest {
    tank: String,
    docs: Vec<IncomingDocument>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IncomingDocument {
    id: String,
    title: String,
    body: String,
    #[serde(default)]
    source: DocumentSource,
}

async fn ingest(State(s): State<Arc<AppState>>, body: axum::body::Bytes) -> ApiResult {
    let req: DocumentsRequest = parse(&body)?;
    if req.tank.trim().is_empty() || req.tank.contains(['/', '\\']) || req.tank.starts_with('.') {
        return Err(bad_json(format!("invalid tank name `{}`", req.tank)));
    }
    let state = s.clone();
    let res = tokio::task::spawn_blocking(move || {
        let docs: Vec<Document> = req
            .docs
            .into_iter()
            .map(|d| Document {
                id: d.id,
                tank: req.tank.clone(),
                title: d.title,
                body: d.body,
                source: d.source,
            })
            .collect();
        let ids = state
            .engine
            .knowledge
            .ingest_batch(docs, state.engine.embedder.as_ref())
            .map_err(|e| match e {
                KnowledgeError::DuplicateId { .. } => ApiError::new(StatusCode::CONFLICT, "duplicate", e.to_string()),
                KnowledgeError::InvalidDocument(_) => bad_json(e),
                other => ApiError::new(StatusCode::BAD_GATEWAY, "embedder", other.to_string()),
            })?;
        persist_tank(&state.config, &state.engine.knowledge, &req.tank)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()))?;
        Ok::<_, ApiError>((req.tank, ids))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    let (tank, ids) = res?;
    Ok((StatusCode::CREATED, Json(json!({ "tank": tank, "ingested": ids }))).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalRequest {
    gold_path: PathBuf,
    #[serde(default)]
    workers: Option<usize>,
}

async fn submit_eval(State(s): State<Arc<AppState>>, body: axum::body::Bytes) -> ApiResult {
    let req: EvalRequest = parse(&body)?;
    let tasks = load_gold(&req.gold_path).map_err(bad_json)?;
    let eval_id = format!("eval-{:04}", s.eval_seq.fetch_add(1, Ordering::SeqCst) + 1);
    s.evals.lock().unwrap().insert(eval_id.clone(), Job::Running);
    let state = s.clone();
    let id = eval_id.clone();
    tokio::task::spawn_blocking(move || {
        let out = state.config.evals_dir();
        let opts = SuiteOptions {
            eval_id: &id,
            workers: req.workers.unwrap_or(state.config.workers),
            parameters: &state.config.model_parameters,
            out_dir: Some(&out),
        };
        let job = match run_suite(&tasks, state.engine.as_ref(), &opts) {
            Ok(summary) => Job::Done(Arc::new(summary)),
            Err(e) => Job::Failed(e.to_string()),
        };
        state.evals.lock().unwrap().insert(id, job);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "eval_id": eval_id, "status": "running" }))).into_response())
}

async fn eval_status(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let job = s.evals.lock().unwrap().get(&id).cloned();
    let body = match job {
        Some(Job::Running) => json!({ "eval_id": id, "status": "running" }),
        Some(Job::Done(summary)) => json!({ "eval_id": id, "status": "succeeded", "summary": *summary }),
        Some(Job::Failed(msg)) => json!({ "eval_id": id, "status": "failed", "error": msg }),
        None => {
            if id.contains(['/', '\\']) || id.starts_with('.') {
                return Err(ApiError::not_found("evaluation", &id));
            }
            let path = s.config.evals_dir().join(&id).join("summary.json");
            let text = std::fs::read_to_string(&path).map_err(|_| ApiError::not_found("evaluation", &id))?;
            let summary: Value = serde_json::from_str(&text)
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()))?;
            json!({ "eval_id": id, "status": "succeeded", "summary": summary })
        }
    };
    Ok(Json(body).into_response())
}

/// A server running on its own thread. Dropping it shuts it down.
pub struct Server {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<Result<(), String>>>,
}

impl Server {
    /// Binds `listen` and starts serving. Port 0 picks a free port.
    pub fn start(listen: &str, state: Arc<AppState>) -> Result<Self, ServeError> {
        let std_listener = std::net::TcpListener::bind(listen).map_err(|e| match e.kind() {
            std::io::ErrorKind::AddrInUse => ServeError::PortInUse(listen.to_string()),
            _ => ServeError::Io(format!("{listen}: {e}")),
        })?;
        std_listener.set_nonblocking(true).map_err(|e| ServeError::Io(e.to_string()))?;
        let addr = std_listener.local_addr().map_err(|e| ServeError::Io(e.to_string()))?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| e.to_string())?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener).map_err(|e| e.to_string())?;
                let shutdown = async {
                    tokio::select! {
                        _ = rx => {}
                        _ = tokio::signal::ctrl_c() => {}
                    }
                };
                axum::serve(listener, router(state))
                    .with_graceful_shutdown(shutdown)
                    .await
                    .map_err(|e| e.to_string())
            })
        });
        tracing::info!(%addr, "gateway listening");
        Ok(Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server exits (Ctrl-C).
    pub fn wait(mut self) -> Result<(), ServeError> {
        self.join()
    }

    pub fn stop(mut self) -> Result<(), ServeError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.join()
    }

    fn join(&mut self) -> Result<(), ServeError> {
        match self.thread.take().map(|t| t.join()) {
            Some(Ok(Err(e))) => Err(ServeError::Io(e)),
            Some(Err(_)) => Err(ServeError::Io("server thread panicked".into())),
            _ => Ok(()),
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.join();
    }
}
