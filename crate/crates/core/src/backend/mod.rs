//! Client layer over chat, embedding and groundedness endpoints.
//!
//! Every endpoint kind is a trait so that HTTP clients and the scripted
//! fixture backend are interchangeable. Sampling parameters and the retry
//! policy are owned here; callers pass them per request.

mod http;
pub mod retry;
pub mod scripted;

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Error, Result};
use crate::types::PositionLogprobs;

pub use http::{HttpChat, HttpEmbedder, HttpGuard};
pub use retry::{with_retries, Retried, RetryPolicy, Sleeper, TokioSleeper};
pub use scripted::{request_digest, ScriptedBackend, ScriptedResponse};

/// Default embedding model for the SE scorer.
pub const DEFAULT_EMBEDDING_MODEL: &str = "sentence-transformers/all-MiniLM-L6-v2";
/// Default guard model for the GROUND scorer.
pub const DEFAULT_GROUNDEDNESS_MODEL: &str = "ibm-granite/granite-guardian-3.3-8b";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub want_logprobs: bool,
    pub top_k_logprobs: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reasoning_effort: Option<ReasoningEffort>,
    /// Forwarded to backends that accept a sampling seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 0.1,
            max_new_tokens: 1024,
            want_logprobs: false,
            top_k_logprobs: 5,
            reasoning_effort: None,
            seed: None,
        }
    }
}

impl SamplingParams {
    pub fn with_logprobs(mut self, k: u32) -> Self {
        self.want_logprobs = true;
        self.top_k_logprobs = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::Config(format!("temperature {} < 0", self.temperature)));
        }
        if self.max_new_tokens == 0 {
            return Err(Error::Config("max_new_tokens must be positive".into()));
        }
        if self.want_logprobs && self.top_k_logprobs == 0 {
            return Err(Error::Config("top_k_logprobs must be >= 1 when logprobs are requested".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub logprob_summary: Option<Vec<PositionLogprobs>>,
    pub finish_reason: FinishReason,
    /// Attempts the retry loop needed to get this completion.
    pub attempts: u32,
}

/// Groundedness verdict: `risk == true` means the claim is not grounded in the context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Groundedness {
    pub risk: bool,
    pub score: Option<f64>,
}

#[async_trait]
pub trait ChatModel: Send + Sync {
    fn id(&self) -> &str;

    fn supports_logprobs(&self) -> bool;

    async fn chat(
        &self,
        messages: &[Message],
        params: &SamplingParams,
    ) -> Result<Completion, BackendError>;

    /// Cheap reachability check; does not spend a model call.
    async fn probe(&self) -> Result<(), BackendError> {
        Ok(())
    }
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;

    /// Fixed dimensionality per endpoint; identical text yields an identical vector.
    async fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError>;

    /// Cheap reachability check; does not spend a model call.
    async fn probe(&self) -> Result<(), BackendError> {
        Ok(())
    }
}

#[async_trait]
pub trait GroundednessGuard: Send + Sync {
    fn id(&self) -> &str;

    async fn check(&self, context: &str, claim: &str) -> Result<Groundedness, BackendError>;

    /// Cheap reachability check; does not spend a model call.
    async fn probe(&self) -> Result<(), BackendError> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    Chat,
    Embedding,
    Groundedness,
    Scripted,
}

impl EndpointKind {
    fn name(self) -> &'static str {
        match self {
            EndpointKind::Chat => "chat",
            EndpointKind::Embedding => "embedding",
            EndpointKind::Groundedness => "groundedness",
            EndpointKind::Scripted => "scripted",
        }
    }
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_max_in_flight() -> usize {
    8
}

fn default_true() -> bool {
    true
}

/// Where and how to reach one endpoint.
///
/// For HTTP kinds `base_url` is the API root (e.g. `http://host:8000/v1`);
/// the client appends `/chat/completions`, `/embeddings` or `/groundedness`.
/// For `Scripted` it is the path of a fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendEndpoint {
    pub kind: EndpointKind,
    pub base_url: String,
    #[serde(default)]
    pub model_id: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_true")]
    pub supports_logprobs: bool,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl BackendEndpoint {
    pub fn new(kind: EndpointKind, base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        BackendEndpoint {
            kind,
            base_url: base_url.into(),
            model_id: model_id.into(),
            auth_env: None,
            timeout_ms: default_timeout_ms(),
            max_in_flight: default_max_in_flight(),
            supports_logprobs: true,
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_ms == 0 || self.max_in_flight == 0 {
            return Err(Error::Config(format!(
                "endpoint {}: timeout_ms and max_in_flight must be positive",
                self.base_url
            )));
        }
        self.retry.validate()
    }

    fn wrong_kind(&self, operation: &'static str) -> Error {
        BackendError::WrongKind {
            kind: self.kind.name().into(),
            operation,
        }
        .into()
    }

    pub fn connect_chat(&self) -> Result<Arc<dyn ChatModel>> {
        self.validate()?;
        match self.kind {
            EndpointKind::Chat => Ok(Arc::new(HttpChat::new(self)?)),
            EndpointKind::Scripted => Ok(Arc::new(self.load_scripted()?)),
            _ => Err(self.wrong_kind("chat completion")),
        }
    }

    pub fn connect_embedder(&self) -> Result<Arc<dyn Embedder>> {
        self.validate()?;
        match self.kind {
            EndpointKind::Embedding => Ok(Arc::new(HttpEmbedder::new(self)?)),
            EndpointKind::Scripted => Ok(Arc::new(self.load_scripted()?)),
            _ => Err(self.wrong_kind("embedding")),
        }
    }

    pub fn connect_guard(&self) -> Result<Arc<dyn GroundednessGuard>> {
        self.validate()?;
        match self.kind {
            EndpointKind::Groundedness => Ok(Arc::new(HttpGuard::new(self)?)),
            EndpointKind::Scripted => Ok(Arc::new(self.load_scripted()?)),
            _ => Err(self.wrong_kind("groundedness check")),
        }
    }

    fn load_scripted(&self) -> Result<ScriptedBackend> {
        let mut backend = ScriptedBackend::load(std::path::Path::new(&self.base_url))?;
        if !self.model_id.is_empty() {
            backend = backend.with_id(self.model_id.clone());
        }
        if !self.supports_logprobs {
            backend = backend.without_logprobs();
        }
        Ok(backend)
    }
}
