//! HTTP front end: answer a question through a chat backend, or abstain.
//!
//! `POST /v1/decide` takes a [`GatewayRequest`] and returns a
//! [`GatewayResponse`]. Abstaining is a successful decision (HTTP 200);
//! errors are reserved for bad requests and backend trouble.
//! `GET /healthz` reports reachability of each configured backend.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use abstain_core::backend::SamplingParams;
use abstain_core::config::AppConfig;
use abstain_core::engine::{self, Backends, DecisionContext};
use abstain_core::error::BackendError;
use abstain_core::prompts::PromptCatalog;
use abstain_core::types::{Dataset, Method, QuerySample};
use abstain_core::{AbstainDecision, Error};

/// Seconds clients are asked to wait after a backend outage.
pub const RETRY_AFTER_SECS: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayRequest {
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method_override: Option<Method>,
    #[serde(default)]
    pub trace_wanted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    /// Parsed option token, or "Z" when none could be read.
    pub token: String,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub votes: BTreeMap<String, bool>,
    pub scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstructed_query: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayResponse {
    pub abstained: bool,
    /// Present when answering, or when diagnostics were requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    pub method: Method,
    pub latency_ms: u64,
}

impl GatewayResponse {
    pub fn from_decision(d: AbstainDecision, trace_wanted: bool) -> Self {
        let answer = (!d.abstain || trace_wanted).then(|| Answer {
            token: d.candidate.parsed.clone(),
            raw_text: d.candidate.raw_text.clone(),
        });
        let diagnostics = trace_wanted.then(|| Diagnostics {
            votes: d.votes.clone(),
            scores: d.scores.clone(),
            reconstructed_query: d.reconstructed_query.clone(),
            flags: d.flags.clone(),
        });
        GatewayResponse {
            abstained: d.abstain,
            answer,
            diagnostics,
            method: d.method,
            latency_ms: d.latency_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub kind: String,
}

/// An error as the gateway reports it.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, error: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: error.into(),
                kind: kind.into(),
            },
        }
    }

    pub fn bad_request(msg: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", msg)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e.backend_cause() {
            Some(BackendError::Capability(_)) => {
                ApiError::new(StatusCode::NOT_IMPLEMENTED, "capability", msg)
            }
            Some(
                BackendError::Unavailable { .. }
                | BackendError::Transport(_)
                | BackendError::Server { .. },
            ) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable", msg),
            Some(_) => ApiError::new(StatusCode::BAD_GATEWAY, "backend", msg),
            None => match root(&e) {
                Error::Input(_) => ApiError::bad_request(msg),
                Error::Config(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "config", msg),
                _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", msg),
            },
        }
    }
}

fn root(e: &Error) -> &Error {
    match e {
        Error::Stage { source, .. } => root(source),
        other => other,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut resp = (self.status, Json(self.body)).into_response();
        if self.status == StatusCode::SERVICE_UNAVAILABLE {
            resp.headers_mut()
                .insert(header::RETRY_AFTER, RETRY_AFTER_SECS.into());
        }
        resp
    }
}

/// Everything one request needs; swapped whole on reload.
pub struct Snapshot {
    pub config: AppConfig,
    pub backends: Backends,
    pub catalog: PromptCatalog,
}

impl Snapshot {
    pub fn from_config(config: AppConfig) -> abstain_core::Result<Self> {
        Ok(Snapshot {
            backends: config.connect()?,
            catalog: config.catalog()?,
            config,
        })
    }

    fn params(&self) -> &SamplingParams {
        &self.config.sampling
    }
}

#[derive(Clone)]
pub struct AppState {
    snapshot: Arc<RwLock<Arc<Snapshot>>>,
}

impl AppState {
    pub fn new(snapshot: Snapshot) -> Self {
        AppState {
            snapshot: Arc::new(RwLock::new(Arc::new(snapshot))),
        }
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Swap in a new configuration. Requests already running keep the old one.
    pub fn reload(&self, snapshot: Snapshot) {
        *self.snapshot.write().expect("snapshot lock") = Arc::new(snapshot);
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/decide", post(decide))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// Stable sample id for a prompt, so identical requests decide identically.
pub fn prompt_id(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    format!("gateway-{}", hex::encode(&digest[..8]))
}

/// Validate a request and turn it into a sample plus the method to run.
pub fn build_sample(
    req: &GatewayRequest,
    snapshot: &Snapshot,
) -> Result<(QuerySample, Method), ApiError> {
    if req.prompt.trim().is_empty() {
        return Err(ApiError::bad_request("prompt must not be empty"));
    }
    let method = req.method_override.unwrap_or(snapshot.config.method.method);
    // Without options the sample keeps the default letters A-D.
    let mut sample = QuerySample::new(
        prompt_id(&req.prompt),
        req.prompt.clone(),
        Dataset::Custom("gateway".into()),
    );
    match &req.options {
        Some(options) => {
            let mut seen: Vec<String> = options.iter().map(|o| o.trim().to_ascii_uppercase()).collect();
            if seen.iter().any(String::is_empty) {
                return Err(ApiError::bad_request("options must not be blank"));
            }
            seen.sort();
            seen.dedup();
            if seen.len() != options.len() || options.len() < 2 {
                return Err(ApiError::bad_request("options must hold at least two distinct tokens"));
            }
            sample = sample.with_options(options);
        }
        None if method != Method::TraceInversion => {
            return Err(ApiError::bad_request(format!(
                "{} parses option letters; the request must list options",
                method.display_name()
            )));
        }
        None => {}
    }
    Ok((sample, method))
}

async fn decide(
    State(state): State<AppState>,
    body: Result<Json<GatewayRequest>, JsonRejection>,
) -> Result<Json<GatewayResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let snapshot = state.current();
    let (sample, method) = build_sample(&req, &snapshot)?;
    let cfg = snapshot.config.method_for(method);
    let ctx = DecisionContext {
        backends: &snapshot.backends,
        catalog: &snapshot.catalog,
        params: snapshot.params(),
        seed: snapshot.params().seed.unwrap_or(0),
    };
    let decision = engine::decide(&ctx, &sample, &cfg).await.map_err(|e| {
        tracing::warn!(sample = %sample.id, error = %e, "decision failed");
        ApiError::from(e)
    })?;
    tracing::info!(
        sample = %sample.id,
        method = %decision.method,
        abstained = decision.abstain,
        latency_ms = decision.latency_ms,
        "decided"
    );
    Ok(Json(GatewayResponse::from_decision(decision, req.trace_wanted)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendHealth {
    pub id: String,
    pub reachable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    /// `null` for kinds that are not configured.
    pub chat: BackendHealth,
    pub embedding: Option<BackendHealth>,
    pub groundedness: Option<BackendHealth>,
}

fn health_of(id: &str, r: Result<(), BackendError>) -> BackendHealth {
    BackendHealth {
        id: id.to_string(),
        reachable: r.is_ok(),
        error: r.err().map(|e| e.to_string()),
    }
}

async fn healthz(State(state): State<AppState>) -> (StatusCode, Json<Health>) {
    let s = state.current();
    let b = &s.backends;
    let chat = health_of(b.model.id(), b.model.probe().await);
    let embedding = match &b.embedder {
        Some(e) => Some(health_of(e.id(), e.probe().await)),
        None => None,
    };
    let groundedness = match &b.guard {
        Some(g) => Some(health_of(g.id(), g.probe().await)),
        None => None,
    };
    let ok = chat.reachable
        && embedding.as_ref().is_none_or(|h| h.reachable)
        && groundedness.as_ref().is_none_or(|h| h.reachable);
    let health = Health {
        status: if ok { "ok" } else { "degraded" }.into(),
        chat,
        embedding,
        groundedness,
    };
    let code = if ok {
        StatusCode::OK
    } else {
        StatusCode::SERVICE_UNAVAILABLE
    };
    (code, Json(health))
}
