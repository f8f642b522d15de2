use std::fmt;
use std::sync::OnceLock;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Semaphore;

use super::retry::{with_retries, RetryPolicy, TokioSleeper};
use super::{
    BackendEndpoint, ChatModel, Completion, Embedder, FinishReason, Groundedness,
    GroundednessGuard, Message, SamplingParams,
};
use crate::error::{BackendError, Error, Result};
use crate::types::{PositionLogprobs, TopLogprob};

/// Shared HTTP plumbing: client, auth, concurrency limit and retry policy.
struct Transport {
    client: reqwest::Client,
    url: String,
    token: Option<String>,
    limiter: Semaphore,
    retry: RetryPolicy,
}

impl fmt::Debug for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transport")
            .field("url", &self.url)
            .field("authenticated", &self.token.is_some())
            .finish()
    }
}

impl Transport {
    fn new(endpoint: &BackendEndpoint, path: &str) -> Result<Self> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(endpoint.timeout_ms))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let token = match &endpoint.auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Config(format!("auth environment variable {var} is not set"))
            })?),
            None => None,
        };
        let base = endpoint.base_url.trim_end_matches('/');
        let url = if base.ends_with(path) {
            base.to_string()
        } else {
            format!("{base}{path}")
        };
        Ok(Transport {
            client,
            url,
            token,
            limiter: Semaphore::new(endpoint.max_in_flight),
            retry: endpoint.retry.clone(),
        })
    }

    async fn post_once<B: Serialize + ?Sized>(&self, body: &B) -> Result<Value, BackendError> {
        let _permit = self
            .limiter
            .acquire()
            .await
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let mut req = self.client.post(&self.url).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| BackendError::Transport(e.without_url().to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .await
            .map_err(|e| BackendError::Transport(e.without_url().to_string()))?;
        if status.is_server_error() {
            return Err(BackendError::Server {
                status: status.as_u16(),
                body: truncate(&text),
            });
        }
        if !status.is_success() {
            return Err(BackendError::Rejected {
                status: status.as_u16(),
                body: truncate(&text),
            });
        }
        serde_json::from_str(&text).map_err(|e| BackendError::Protocol(format!("invalid JSON: {e}")))
    }

    /// Open a TCP connection to the endpoint's host.
    async fn probe(&self) -> Result<(), BackendError> {
        let url = reqwest::Url::parse(&self.url)
            .map_err(|e| BackendError::Protocol(format!("bad endpoint url: {e}")))?;
        let host = url
            .host_str()
            .ok_or_else(|| BackendError::Protocol("endpoint url has no host".into()))?;
        let port = url.port_or_known_default().unwrap_or(80);
        let connect = tokio::net::TcpStream::connect((host, port));
        match tokio::time::timeout(Duration::from_secs(2), connect).await {
            Ok(Ok(_)) => Ok(()),
            Ok(Err(e)) => Err(BackendError::Transport(e.to_string())),
            Err(_) => Err(BackendError::Transport("connect timed out".into())),
        }
    }

    async fn post<B: Serialize + ?Sized>(&self, body: &B) -> Result<(Value, u32), BackendError> {
        let r = with_retries(&self.retry, &TokioSleeper, |_| self.post_once(body)).await?;
        Ok((r.value, r.attempts))
    }
}

fn truncate(s: &str) -> String {
    const MAX: usize = 512;
    if s.len() <= MAX {
        s.to_string()
    } else {
        let mut end = MAX;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &s[..end])
    }
}

/// OpenAI-compatible `/chat/completions` client.
#[derive(Debug)]
pub struct HttpChat {
    model: String,
    supports_logprobs: bool,
    transport: Transport,
}

impl HttpChat {
    pub fn new(endpoint: &BackendEndpoint) -> Result<Self> {
        Ok(HttpChat {
            model: endpoint.model_id.clone(),
            supports_logprobs: endpoint.supports_logprobs,
            transport: Transport::new(endpoint, "/chat/completions")?,
        })
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    logprobs: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    top_logprobs: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reasoning_effort: Option<super::ReasoningEffort>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
    #[serde(default)]
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceLogprobs {
    #[serde(default)]
    content: Option<Vec<TokenEntry>>,
}

#[derive(Deserialize)]
struct TokenEntry {
    token: String,
    logprob: f64,
    #[serde(default)]
    top_logprobs: Vec<TopEntry>,
}

#[derive(Deserialize)]
struct TopEntry {
    token: String,
    logprob: f64,
}

pub(crate) fn parse_chat_response(value: Value, want_logprobs: bool) -> Result<Completion, BackendError> {
    let resp: ChatResponse = serde_json::from_value(value)
        .map_err(|e| BackendError::Protocol(format!("chat response: {e}")))?;
    let choice = resp
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| BackendError::Protocol("chat response has no choices".into()))?;
    let text = choice
        .message
        .content
        .ok_or_else(|| BackendError::Protocol("choices[0].message.content missing".into()))?;
    let finish_reason = match choice.finish_reason.as_deref() {
        None | Some("stop") | Some("eos") => FinishReason::Stop,
        Some("length") => FinishReason::Length,
        Some(_) => FinishReason::Error,
    };
    let logprob_summary = match (want_logprobs, choice.logprobs.and_then(|l| l.content)) {
        (true, Some(entries)) => Some(
            entries
                .into_iter()
                .map(|e| PositionLogprobs {
                    token: e.token,
                    logprob: e.logprob.min(0.0),
                    top: e
                        .top_logprobs
                        .into_iter()
                        .map(|t| TopLogprob {
                            token: t.token,
                            logprob: t.logprob.min(0.0),
                        })
                        .collect(),
                })
                .collect(),
        ),
        _ => None,
    };
    Ok(Completion {
        text,
        logprob_summary,
        finish_reason,
        attempts: 1,
    })
}

#[async_trait]
impl ChatModel for HttpChat {
    async fn probe(&self) -> Result<(), BackendError> {
        self.transport.probe().await
    }

    fn id(&self) -> &str {
        &self.model
    }

    fn supports_logprobs(&self) -> bool {
        self.supports_logprobs
    }

    async fn chat(
        &self,
        messages: &[Message],
        params: &SamplingParams,
    ) -> Result<Completion, BackendError> {
        if params.want_logprobs && !self.supports_logprobs {
            return Err(BackendError::Capability(format!(
                "{} does not return token logprobs",
                self.model
            )));
        }
        let body = ChatRequest {
            model: &self.model,
            messages,
            temperature: params.temperature,
            max_tokens: params.max_new_tokens,
            logprobs: params.want_logprobs.then_some(true),
            top_logprobs: params.want_logprobs.then_some(params.top_k_logprobs),
            reasoning_effort: params.reasoning_effort,
            seed: params.seed,
        };
        let (value, attempts) = self.transport.post(&body).await?;
        let mut completion = parse_chat_response(value, params.want_logprobs)?;
        completion.attempts = attempts;
        Ok(completion)
    }
}

/// Checks that an endpoint keeps returning vectors of one size.
#[derive(Debug, Default)]
pub(crate) struct DimensionGuard(OnceLock<usize>);

impl DimensionGuard {
    pub(crate) fn check(&self, v: &[f64]) -> Result<(), BackendError> {
        if v.is_empty() {
            return Err(BackendError::Protocol("empty embedding".into()));
        }
        let dim = *self.0.get_or_init(|| v.len());
        if dim != v.len() {
            return Err(BackendError::Protocol(format!(
                "embedding dimension changed from {dim} to {}",
                v.len()
            )));
        }
        Ok(())
    }
}

/// `/embeddings` client: `{model, input}` to `{data: [{embedding}]}`.
#[derive(Debug)]
pub struct HttpEmbedder {
    model: String,
    transport: Transport,
    dims: DimensionGuard,
}

impl HttpEmbedder {
    pub fn new(endpoint: &BackendEndpoint) -> Result<Self> {
        Ok(HttpEmbedder {
            model: endpoint.model_id.clone(),
            transport: Transport::new(endpoint, "/embeddings")?,
            dims: DimensionGuard::default(),
        })
    }
}

#[async_trait]
impl Embedder for HttpEmbedder {
    async fn probe(&self) -> Result<(), BackendError> {
        self.transport.probe().await
    }

    fn id(&self) -> &str {
        &self.model
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        #[derive(Deserialize)]
        struct Resp {
            data: Vec<Item>,
        }
        #[derive(Deserialize)]
        struct Item {
            embedding: Vec<f64>,
        }
        let body = serde_json::json!({ "model": self.model, "input": text });
        let (value, _) = self.transport.post(&body).await?;
        let resp: Resp = serde_json::from_value(value)
            .map_err(|e| BackendError::Protocol(format!("embedding response: {e}")))?;
        let v = resp
            .data
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Protocol("embedding response has no data".into()))?
            .embedding;
        self.dims.check(&v)?;
        Ok(v)
    }
}

/// Groundedness client: `{context, claim}` to `{risk: "yes"|"no", score?}`.
#[derive(Debug)]
pub struct HttpGuard {
    model: String,
    transport: Transport,
}

impl HttpGuard {
    pub fn new(endpoint: &BackendEndpoint) -> Result<Self> {
        Ok(HttpGuard {
            model: endpoint.model_id.clone(),
            transport: Transport::new(endpoint, "/groundedness")?,
        })
    }
}

pub(crate) fn parse_risk(risk: &str, score: Option<f64>) -> Result<Groundedness, BackendError> {
    let risk = match risk.trim().to_ascii_lowercase().as_str() {
        "yes" => true,
        "no" => false,
        other => {
            return Err(BackendError::Protocol(format!(
                "groundedness risk must be \"yes\" or \"no\", got {other:?}"
            )))
        }
    };
    Ok(Groundedness { risk, score })
}

#[async_trait]
impl GroundednessGuard for HttpGuard {
    async fn probe(&self) -> Result<(), BackendError> {
        self.transport.probe().await
    }

    fn id(&self) -> &str {
        &self.model
    }

    async fn check(&self, context: &str, claim: &str) -> Result<Groundedness, BackendError> {
        #[derive(Deserialize)]
        struct Resp {
            risk: String,
            #[serde(default)]
            score: Option<f64>,
        }
        let body = serde_json::json!({ "context": context, "claim": claim });
        let (value, _) = self.transport.post(&body).await?;
        let resp: Resp = serde_json::from_value(value)
            .map_err(|e| BackendError::Protocol(format!("groundedness response: {e}")))?;
        parse_risk(&resp.risk, resp.score)
    }
}
