//! HTTP API over profiling, adaptation and annotation collection.
//!
//! Every route lives under `/v1`. Failures carry the envelope
//! `{"code", "message", "path"}` where `path` is a JSON pointer into the
//! request body when one applies.

mod config;
mod store;

pub use config::{ConfigOverrides, ServiceConfig, ENV_VARS};
pub use store::{parse_vote_log, AnnotationStore, Snapshot, VoteEntry, VoteError, CORPUS_FILE, VOTE_LOG};

use std::path::Path;
use std::sync::Arc;

use arc_swap::ArcSwapOption;
use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use psyling::adapt::{Adapter, Conversation, Lexicons, Speaker};
use psyling::agreement::perfect_agreement;
use psyling::bundle::ModelBundle;
use psyling::corpus::{dataset_stats, derive_gold, GoldPolicy};
use psyling::ByCharacteristic;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub path: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                path: None,
            },
        }
    }

    fn at(mut self, path: impl Into<String>) -> Self {
        self.body.path = Some(path.into());
        self
    }

    fn unprocessable(code: &str, message: impl Into<String>, path: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message).at(path)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

fn parse_body<T: DeserializeOwned>(body: Result<Bytes, BytesRejection>) -> ApiResult<T> {
    let bytes = body.map_err(|e| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "payload_too_large", e.body_text())
        } else {
            ApiError::new(e.status(), "bad_request", e.body_text())
        }
    })?;
    let mut de = serde_json::Deserializer::from_slice(&bytes);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let code = if e.inner().is_data() { "schema_violation" } else { "invalid_json" };
        ApiError::unprocessable(code, e.inner().to_string(), json_pointer(e.path()))
    })?;
    de.end().map_err(|e| ApiError::unprocessable("invalid_json", e.to_string(), ""))?;
    Ok(value)
}

fn load_adapter(config: &ServiceConfig) -> psyling::Result<Option<Adapter>> {
    let Some(models) = &config.models else {
        return Ok(None);
    };
    let bundle = ModelBundle::load_dir(models)?;
    let lexicons = match &config.lexicons {
        Some(dir) => Lexicons::load_dir(dir)?,
        None => Lexicons::bundled(),
    };
    Ok(Some(Adapter::new(bundle, lexicons)))
}

pub struct AppState {
    config: ServiceConfig,
    adapter: ArcSwapOption<Adapter>,
    store: AnnotationStore,
}

impl AppState {
    pub fn new(config: ServiceConfig, adapter: Option<Adapter>, store: AnnotationStore) -> Arc<Self> {
        Arc::new(AppState {
            config,
            adapter: ArcSwapOption::from(adapter.map(Arc::new)),
            store,
        })
    }

    /// Loads the bundle and store named in `config`. Fails on any
    /// fingerprint or schema problem.
    pub fn from_config(config: ServiceConfig) -> psyling::Result<Arc<Self>> {
        let adapter = load_adapter(&config)?;
        let store = match &config.store {
            Some(dir) => AnnotationStore::open(dir)?,
            None => AnnotationStore::in_memory(Default::default()),
        };
        Ok(Self::new(config, adapter, store))
    }

    pub fn store(&self) -> &AnnotationStore {
        &self.store
    }

    fn adapter(&self) -> ApiResult<Arc<Adapter>> {
        self.adapter
            .load_full()
            .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "models_unavailable", "no model bundle is loaded"))
    }
}

fn domain_error(e: psyling::Error) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyRequest {
    text: String,
}

async fn classify(State(s): State<Arc<AppState>>, body: Result<Bytes, BytesRejection>) -> ApiResult<Response> {
    let req: ClassifyRequest = parse_body(body)?;
    if req.text.trim().is_empty() {
        return Err(ApiError::unprocessable("empty_text", "text must not be empty", "/text"));
    }
    let adapter = s.adapter()?;
    Ok(Json(adapter.profile(&req.text).map_err(domain_error)?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdaptRequest {
    conversation: Conversation,
}

async fn adapt(State(s): State<Arc<AppState>>, body: Result<Bytes, BytesRejection>) -> ApiResult<Response> {
    let req: AdaptRequest = parse_body(body)?;
    let c = &req.conversation;
    match c.turns.first() {
        None => {
            return Err(ApiError::unprocessable(
                "schema_violation",
                "conversation has no turns",
                "/conversation/turns",
            ))
        }
        Some(t) if t.speaker != Speaker::User => {
            return Err(ApiError::unprocessable(
                "schema_violation",
                "conversation must start with a user turn",
                "/conversation/turns/0/speaker",
            ))
        }
        Some(_) => {}
    }
    if let Some(i) = c.turns.iter().position(|t| t.text.trim().is_empty()) {
        return Err(ApiError::unprocessable(
            "empty_text",
            "turn text must not be empty",
            format!("/conversation/turns/{i}/text"),
        ));
    }
    let adapter = s.adapter()?;
    Ok(Json(adapter.adapt(c).map_err(domain_error)?).into_response())
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

fn annotator_from(explicit: Option<String>, headers: &HeaderMap) -> ApiResult<String> {
    explicit
        .or_else(|| headers.get(ANNOTATOR_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string))
        .filter(|a| !a.trim().is_empty())
        .ok_or_else(|| {
            ApiError::unprocessable(
                "missing_annotator",
                "annotator id required (query, body or x-annotator-id header)",
                "/annotator",
            )
        })
}

#[derive(Serialize)]
struct NextItem {
    utterance_id: String,
    text: String,
}

#[derive(Serialize)]
struct NextResponse {
    annotator: String,
    item: Option<NextItem>,
    remaining: usize,
}

async fn annotation_next(State(s): State<Arc<AppState>>, Query(q): Query<NextQuery>, headers: HeaderMap) -> ApiResult<Json<NextResponse>> {
    let annotator = annotator_from(q.annotator, &headers)?;
    let snap = s.store.snapshot();
    let (item, remaining) = snap.next_for(&annotator);
    Ok(Json(NextResponse {
        item: item.map(|r| NextItem {
            utterance_id: r.id.clone(),
            text: r.text.clone(),
        }),
        annotator,
        remaining,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VoteRequest {
    utterance_id: String,
    #[serde(default)]
    annotator: Option<String>,
    votes: ByCharacteristic<bool>,
    difficulty: bool,
}

async fn annotation_post(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<VoteEntry>> {
    let req: VoteRequest = parse_body(body)?;
    let entry = VoteEntry {
        annotator: annotator_from(req.annotator, &headers)?,
        utterance_id: req.utterance_id,
        votes: req.votes,
        difficulty: req.difficulty,
    };
    s.store.append(entry.clone()).map_err(|e| match e {
        VoteError::UnknownUtterance(id) => {
            ApiError::new(StatusCode::NOT_FOUND, "unknown_utterance", format!("no utterance {id:?}")).at("/utterance_id")
        }
        VoteError::Duplicate { annotator, utterance_id } => ApiError::new(
            StatusCode::CONFLICT,
            "duplicate_vote",
            format!("{annotator:?} already voted on {utterance_id:?}"),
        ),
        VoteError::Io(e) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()),
    })?;
    Ok(Json(entry))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsResponse {
    pub n_utterances: usize,
    pub n_votes: usize,
    pub dataset: psyling::corpus::StatsTable,
    pub agreement: psyling::agreement::AgreementReport,
}

/// The `/v1/stats` body for a corpus: gold counts under unanimous-only
/// resolution plus perfect agreement.
pub fn stats_for(corpus: &psyling::corpus::Corpus, n_votes: usize) -> psyling::Result<StatsResponse> {
    Ok(StatsResponse {
        n_utterances: corpus.len(),
        n_votes,
        dataset: dataset_stats(&derive_gold(corpus, GoldPolicy::PerfectOnly)?),
        agreement: perfect_agreement(corpus),
    })
}

async fn stats(State(s): State<Arc<AppState>>) -> ApiResult<Json<StatsResponse>> {
    let snap = s.store.snapshot();
    Ok(Json(stats_for(&snap.merged(), snap.n_votes()).map_err(domain_error)?))
}

async fn agreement(State(s): State<Arc<AppState>>) -> Json<psyling::agreement::AgreementReport> {
    Json(perfect_agreement(&s.store.snapshot().merged()))
}

async fn export(State(s): State<Arc<AppState>>) -> Response {
    (
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        s.store.snapshot().merged().to_jsonl(),
    )
        .into_response()
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    models_loaded: bool,
    fingerprints: Option<ByCharacteristic<String>>,
    utterances: usize,
    votes: usize,
}

async fn health(State(s): State<Arc<AppState>>) -> Json<Health> {
    let adapter = s.adapter.load_full();
    let snap = s.store.snapshot();
    Json(Health {
        status: "ok",
        models_loaded: adapter.is_some(),
        fingerprints: adapter.map(|a| a.bundle.fingerprints()),
        utterances: snap.n_utterances(),
        votes: snap.n_votes(),
    })
}

async fn reload(State(s): State<Arc<AppState>>) -> ApiResult<Json<ByCharacteristic<String>>> {
    if s.config.models.is_none() {
        return Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "models_unavailable",
            "no model bundle path configured",
        ));
    }
    let adapter = load_adapter(&s.config)
        .map_err(|e| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "reload_failed", e.to_string()))?
        .expect("models path is set");
    let fingerprints = adapter.bundle.fingerprints();
    s.adapter.store(Some(Arc::new(adapter)));
    Ok(Json(fingerprints))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.max_body_bytes;
    let timeout = state.config.timeout();
    Router::new()
        .route("/v1/classify", post(classify))
        .route("/v1/adapt", post(adapt))
        .route("/v1/annotation/next", get(annotation_next))
        .route("/v1/annotation", post(annotation_post))
        .route("/v1/stats", get(stats))
        .route("/v1/agreement", get(agreement))
        .route("/v1/export", get(export))
        .route("/v1/health", get(health))
        .route("/v1/admin/reload", post(reload))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(limit))
        .layer(tower_http::timeout::TimeoutLayer::with_status_code(
            StatusCode::REQUEST_TIMEOUT,
            timeout,
        ))
        .with_state(state)
}

/// Serves until interrupted.
pub async fn serve(config: ServiceConfig) -> psyling::Result<()> {
    let bind = config.bind;
    let state = AppState::from_config(config)?;
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Blocking wrapper around [`serve`] on a multi-threaded runtime.
pub fn run(config: ServiceConfig) -> psyling::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(config))
}

/// Writes a fresh annotation queue into `dir` from a corpus file.
pub fn init_store(dir: impl AsRef<Path>, corpus_jsonl: &str) -> psyling::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(CORPUS_FILE), corpus_jsonl)?;
    Ok(())
}
