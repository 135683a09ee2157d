//! JSON-over-HTTP service.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `POST /feedback` | `{corpus, text}` | 200 report, 404 unknown corpus |
//! | `POST /validate` | `{table, record, insert?}` | 200 `{violations, inserted?}` |
//! | `POST /train?corpus=C&seed=S` | JSONL corpus | 202 `{jobId, bundle}` |
//! | `GET /jobs/{id}` | | job state |
//! | `GET /models` | | published bundle metadata |
//!
//! Malformed bodies give 400 and every error body is `{"error": "..."}`.
//! `/train` also accepts a JSON body `{corpus, params, documents}`.
//! Report offsets count Unicode scalar values.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::corpus::{parse_jsonl, LabeledDoc};
use crate::ddl::{Catalog, ExplainerRegistry, Record, Schema, ValidateError, Violation};
use crate::pipeline::{train_bundle, TrainConfig};
use crate::store::{ModelStore, StoreError};

/// Shared, mostly read-only service state.
pub struct AppState {
    pub store: Arc<ModelStore>,
    pub schema: Schema,
    pub explainers: ExplainerRegistry,
    pub catalog: RwLock<Catalog>,
    /// Where accepted inserts are persisted; `None` keeps them in memory.
    pub catalog_dir: Option<PathBuf>,
    jobs: Mutex<BTreeMap<u64, Job>>,
    next_job: AtomicU64,
}

impl AppState {
    pub fn new(store: Arc<ModelStore>, schema: Schema, catalog: Catalog, catalog_dir: Option<PathBuf>) -> Self {
        Self {
            store,
            schema,
            explainers: ExplainerRegistry::builtin(),
            catalog: RwLock::new(catalog),
            catalog_dir,
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Job {
    pub job_id: u64,
    pub bundle: String,
    pub state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let r = Router::new()
        .route("/feedback", post(feedback))
        .route("/validate", post(validate))
        .route("/train", post(train))
        .route("/jobs/{id}", get(job))
        .route("/models", get(models))
        .with_state(state);
    match static_dir {
        Some(dir) => r.fallback_service(ServeDir::new(dir)),
        None => r,
    }
}

fn json_bytes(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn reply<T: Serialize>(status: StatusCode, v: &T) -> Response {
    match serde_json::to_vec(v) {
        Ok(b) => json_bytes(status, b),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

fn error(status: StatusCode, msg: impl ToString) -> Response {
    reply(status, &json!({ "error": msg.to_string() }))
}

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| error(StatusCode::BAD_REQUEST, format!("malformed JSON: {e}")))
}

fn store_error(e: StoreError) -> Response {
    match e {
        StoreError::NotFound(_) => error(StatusCode::NOT_FOUND, e),
        StoreError::InvalidName(_) => error(StatusCode::BAD_REQUEST, e),
        StoreError::AlreadyExists(_) => error(StatusCode::CONFLICT, e),
        _ => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

#[derive(Deserialize)]
struct FeedbackRequest {
    corpus: String,
    text: String,
}

async fn feedback(State(st): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: FeedbackRequest = match parse(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    let bundle = match st.store.get(&req.corpus) {
        Ok(b) => b,
        Err(e) => return store_error(e),
    };
    let run = tokio::task::spawn_blocking(move || bundle.get_feedback(&req.text)).await;
    match run {
        Ok(Ok(report)) => reply(StatusCode::OK, &report),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

#[derive(Deserialize)]
struct ValidateRequest {
    table: String,
    record: Record,
    #[serde(default)]
    insert: bool,
}

#[derive(Serialize)]
struct ValidateReply {
    violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inserted: Option<Record>,
}

async fn validate(State(st): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: ValidateRequest = match parse(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    let status = |e: &ValidateError| match e {
        ValidateError::UnknownTable(_) => StatusCode::NOT_FOUND,
        ValidateError::UnknownExplainer(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    };
    if !req.insert {
        let catalog = st.catalog.read().expect("catalog lock");
        return match st.schema.validate_insert(&req.table, &req.record, &catalog, &st.explainers) {
            Ok(violations) => reply(StatusCode::OK, &ValidateReply { violations, inserted: None }),
            Err(e) => error(status(&e), e),
        };
    }
    let Some(table) = st.schema.crowd_table(&req.table) else {
        let e = ValidateError::UnknownTable(req.table);
        return error(status(&e), e);
    };
    let mut catalog = st.catalog.write().expect("catalog lock");
    match catalog.insert(table, &req.record, &st.schema.constraint_bindings(), &st.explainers) {
        Ok(Ok(row)) => {
            if let Some(dir) = &st.catalog_dir {
                if let Err(e) = catalog.save_dir(dir) {
                    return error(StatusCode::INTERNAL_SERVER_ERROR, e);
                }
            }
            reply(StatusCode::OK, &ValidateReply { violations: Vec::new(), inserted: Some(row) })
        }
        Ok(Err(violations)) => reply(StatusCode::OK, &ValidateReply { violations, inserted: None }),
        Err(e) => error(status(&e), e),
    }
}

#[derive(Deserialize)]
struct TrainQuery {
    corpus: Option<String>,
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct TrainJson {
    corpus: String,
    #[serde(default)]
    params: Option<TrainConfig>,
    documents: Vec<LabeledDoc>,
}

async fn train(
    State(st): State<Arc<AppState>>,
    Query(q): Query<TrainQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let (corpus, mut cfg, docs) = if is_json {
        match parse::<TrainJson>(&body) {
            Ok(t) => (t.corpus, t.params.unwrap_or_default(), t.documents),
            Err(r) => return r,
        }
    } else {
        let Some(corpus) = q.corpus.clone() else {
            return error(StatusCode::BAD_REQUEST, "missing corpus query parameter");
        };
        match parse_jsonl::<LabeledDoc>(&body[..]) {
            Ok(d) => (corpus, TrainConfig::default(), d),
            Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed JSONL: {e}")),
        }
    };
    if let Some(seed) = q.seed {
        cfg = cfg.with_seed(seed);
    }
    let version = match st.store.reserve_version(&corpus) {
        Ok(v) => v,
        Err(e) => return store_error(e),
    };
    let job_id = st.next_job.fetch_add(1, Ordering::Relaxed);
    let bundle_id = format!("{corpus}/v{version}");
    let job = Job { job_id, bundle: bundle_id, state: JobState::Running, error: None };
    st.jobs.lock().expect("jobs lock").insert(job_id, job.clone());

    let worker = st.clone();
    tokio::task::spawn_blocking(move || {
        let result = train_bundle(&corpus, &docs, &cfg)
            .map_err(StoreError::from)
            .and_then(|mut b| {
                b.meta.version = version;
                worker.store.publish(&b)
            });
        if result.is_err() {
            worker.store.release_reservation(&corpus, version);
        }
        let mut jobs = worker.jobs.lock().expect("jobs lock");
        if let Some(j) = jobs.get_mut(&job_id) {
            match result {
                Ok(_) => j.state = JobState::Done,
                Err(e) => {
                    j.state = JobState::Failed;
                    j.error = Some(e.to_string());
                }
            }
        }
    });
    reply(StatusCode::ACCEPTED, &job)
}

async fn job(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> Response {
    match st.jobs.lock().expect("jobs lock").get(&id) {
        Some(j) => reply(StatusCode::OK, j),
        None => error(StatusCode::NOT_FOUND, format!("no job {id}")),
    }
}

async fn models(State(st): State<Arc<AppState>>) -> Response {
    let store = st.store.clone();
    match tokio::task::spawn_blocking(move || store.list()).await {
        Ok(list) => reply(StatusCode::OK, &json!({ "models": list })),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}
