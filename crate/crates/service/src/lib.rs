//! HTTP JSON facade over a [`KnowledgeBase`]. Every response carries the
//! build version of the snapshot it was computed from in `X-Graph-Version`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use kgforge_core::analytics::AnalyticsError;
use kgforge_core::pipeline::{self, KnowledgeBase, PipelineConfig};
use kgforge_core::recommender::RecError;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub mod feedback;

pub use feedback::{FeedbackDraft, FeedbackEvent, FeedbackLog, Verdict};

pub const VERSION_HEADER: &str = "x-graph-version";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("environment variable {0} is not set")]
    MissingToken(String),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("invalid bind address {0}")]
    Bind(String),
}

/// Produces the knowledge base for a given build version.
pub type Builder = Arc<dyn Fn(u64) -> Result<KnowledgeBase, String> + Send + Sync>;

#[derive(Debug, Clone)]
pub struct Tokens {
    pub reader: String,
    pub admin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Reader,
    Admin,
}

pub struct AppState {
    current: RwLock<Arc<KnowledgeBase>>,
    tokens: Tokens,
    builder: Builder,
    reloading: AtomicBool,
    feedback: Mutex<FeedbackLog>,
}

impl AppState {
    pub fn new(kb: KnowledgeBase, tokens: Tokens, builder: Builder, feedback: FeedbackLog) -> Self {
        AppState {
            current: RwLock::new(Arc::new(kb)),
            tokens,
            builder,
            reloading: AtomicBool::new(false),
            feedback: Mutex::new(feedback),
        }
    }

    /// The knowledge base currently served.
    pub fn snapshot(&self) -> Arc<KnowledgeBase> {
        self.current.read().expect("state lock").clone()
    }

    fn authorize(&self, headers: &HeaderMap, role: Role) -> Result<(), ApiError> {
        let token = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim);
        let Some(token) = token else {
            return Err(ApiError::new(StatusCode::UNAUTHORIZED, "missing bearer token"));
        };
        if token == self.tokens.admin {
            return Ok(());
        }
        if token == self.tokens.reader {
            return match role {
                Role::Reader => Ok(()),
                Role::Admin => Err(ApiError::new(StatusCode::FORBIDDEN, "admin token required")),
            };
        }
        Err(ApiError::new(StatusCode::UNAUTHORIZED, "invalid token"))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(err: AnalyticsError) -> Self {
        let status = match err {
            AnalyticsError::EmptyRange { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::NOT_FOUND,
        };
        ApiError::new(status, err.to_string())
    }
}

impl From<RecError> for ApiError {
    fn from(err: RecError) -> Self {
        let status = match err {
            RecError::UnknownEntity(_) | RecError::MissingRow(_) => StatusCode::NOT_FOUND,
            RecError::InvalidK | RecError::UnknownCategory(_) => StatusCode::BAD_REQUEST,
            RecError::Unfitted => StatusCode::SERVICE_UNAVAILABLE,
            RecError::Model(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, err.to_string())
    }
}

fn json_response(status: StatusCode, version: u64, body: &Value) -> Response {
    let bytes = serde_json::to_vec(body).expect("serializable");
    let mut response = (status, bytes).into_response();
    let headers = response.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    headers.insert(VERSION_HEADER, HeaderValue::from(version));
    response
}

/// Renders a handler result. Object keys come out sorted because
/// `serde_json::Value` maps are ordered.
fn respond(version: u64, status: StatusCode, result: Result<Value, ApiError>) -> Response {
    match result {
        Ok(body) => json_response(status, version, &body),
        Err(e) => json_response(e.status, version, &json!({ "error": e.message })),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("serializable")
}

type Params = Query<HashMap<String, String>>;

fn param<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    params
        .get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| ApiError::bad_request(format!("invalid {key}: {v:?}")))
        })
        .transpose()
}

fn required<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<T, ApiError> {
    param(params, key)?.ok_or_else(|| ApiError::bad_request(format!("missing {key}")))
}

async fn reader<F>(state: Arc<AppState>, headers: HeaderMap, f: F) -> Response
where
    F: FnOnce(&KnowledgeBase) -> Result<Value, ApiError>,
{
    let kb = state.snapshot();
    let result = state.authorize(&headers, Role::Reader).and_then(|_| f(&kb));
    respond(kb.version, StatusCode::OK, result)
}

async fn types(State(state): State<Arc<AppState>>, headers: HeaderMap, Query(q): Params) -> Response {
    reader(state, headers, |kb| {
        let limit = param::<usize>(&q, "limit")?.unwrap_or(usize::MAX);
        Ok(to_json(&kb.analytics.top_types(limit)))
    })
    .await
}

async fn children(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>) -> Response {
    reader(state, headers, |kb| Ok(to_json(&kb.analytics.children_sorted(&id)?))).await
}

async fn trends(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    Query(q): Params,
) -> Response {
    reader(state, headers, |kb| {
        let from = required(&q, "from")?;
        let to = required(&q, "to")?;
        Ok(to_json(&kb.analytics.trend_table(&id, from, to)?))
    })
    .await
}

async fn infobox(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>) -> Response {
    reader(state, headers, |kb| Ok(to_json(&kb.analytics.infobox(&id)?))).await
}

async fn evidence(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>) -> Response {
    reader(state, headers, |kb| Ok(to_json(&kb.analytics.evidence_for(&id)?))).await
}

/// Ranked items for a user, each with its explanation inline.
pub fn recommendations(kb: &KnowledgeBase, user: &str, category: &str, k: usize) -> Result<Value, RecError> {
    let rec = &kb.recommender;
    let items = rec.recommend_category(user, category, k)?;
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let explanation = rec.explain(user, &item.item, rec.config.top_m)?;
        let mut v = to_json(&item);
        v["explanation"] = to_json(&explanation);
        out.push(v);
    }
    Ok(Value::Array(out))
}

async fn recommend(State(state): State<Arc<AppState>>, headers: HeaderMap, Query(q): Params) -> Response {
    reader(state, headers, |kb| {
        let user: String = required(&q, "user")?;
        let category: String = required(&q, "category")?;
        let k: i64 = param(&q, "k")?.unwrap_or(10);
        if k < 1 {
            return Err(RecError::InvalidK.into());
        }
        let user = kb.entity_iri(&user);
        if kb.recommender.model.row(&user).is_none() {
            return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown user {user}")));
        }
        Ok(recommendations(kb, &user, &category, k as usize)?)
    })
    .await
}

async fn post_feedback(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Response {
    let kb = state.snapshot();
    let result = state.authorize(&headers, Role::Reader).and_then(|_| {
        let draft = FeedbackDraft::parse(&body).map_err(ApiError::bad_request)?;
        let mut log = state.feedback.lock().expect("feedback lock");
        let event = log
            .append(draft)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        Ok(to_json(&event))
    });
    respond(kb.version, StatusCode::CREATED, result)
}

struct ReloadGuard<'a>(&'a AtomicBool);

impl Drop for ReloadGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

async fn reload(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    let old = state.snapshot();
    if let Err(e) = state.authorize(&headers, Role::Admin) {
        return respond(old.version, StatusCode::OK, Err(e));
    }
    if state.reloading.swap(true, Ordering::SeqCst) {
        return respond(
            old.version,
            StatusCode::OK,
            Err(ApiError::new(StatusCode::CONFLICT, "a reload is already in progress")),
        );
    }
    let _guard = ReloadGuard(&state.reloading);
    let builder = state.builder.clone();
    let version = old.version + 1;
    let built = tokio::task::spawn_blocking(move || builder(version)).await;
    let kb = match built {
        Ok(Ok(kb)) => kb,
        Ok(Err(message)) => {
            return respond(
                old.version,
                StatusCode::OK,
                Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, message)),
            )
        }
        Err(e) => {
            return respond(
                old.version,
                StatusCode::OK,
                Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
            )
        }
    };
    let new_version = kb.version;
    *state.current.write().expect("state lock") = Arc::new(kb);
    respond(
        new_version,
        StatusCode::OK,
        Ok(json!({ "old_version": old.version, "new_version": new_version })),
    )
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/types", get(types))
        .route("/types/{id}/children", get(children))
        .route("/types/{id}/trends", get(trends))
        .route("/entities/{id}/infobox", get(infobox))
        .route("/statements/{id}/evidence", get(evidence))
        .route("/recommendations", get(recommend))
        .route("/feedback", post(post_feedback))
        .route("/admin/reload", post(reload))
        .with_state(state)
}

fn env_token(name: &str) -> Result<String, ServiceError> {
    std::env::var(name)
        .ok()
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ServiceError::MissingToken(name.to_string()))
}

/// State for `cfg`: tokens from the configured environment variables,
/// version 1 built from the pipeline inputs, rebuilt in full on reload.
pub fn state_from_config(cfg: &PipelineConfig) -> Result<AppState, ServiceError> {
    let tokens = Tokens {
        reader: env_token(&cfg.service.token_env)?,
        admin: env_token(&cfg.service.admin_token_env)?,
    };
    let kb = pipeline::build_knowledge_base(cfg, 1)?;
    let log = FeedbackLog::open(&cfg.output_path(&cfg.service.feedback_log))?;
    let build_cfg = cfg.clone();
    let builder: Builder =
        Arc::new(move |version| pipeline::build_knowledge_base(&build_cfg, version).map_err(|e| e.to_string()));
    Ok(AppState::new(kb, tokens, builder, log))
}

pub async fn serve(cfg: &PipelineConfig) -> Result<(), ServiceError> {
    let state = Arc::new(state_from_config(cfg)?);
    let addr: SocketAddr = format!("{}:{}", cfg.service.bind, cfg.service.port)
        .parse()
        .map_err(|_| ServiceError::Bind(format!("{}:{}", cfg.service.bind, cfg.service.port)))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
