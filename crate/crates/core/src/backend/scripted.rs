//! Deterministic fixture-driven backend for offline tests and replays.
//!
//! A fixture file is a JSON object mapping a key to a response object.
//! Keys are either the hex SHA-256 request digest (see [`request_digest`]) or
//! `contains:<text>` rules, tried in file order when no digest matches and
//! only against requests of the response's kind. Responses look like:
//!
//! ```json
//! {"text": "Final answer: B", "logprobs": [...]}   // chat
//! {"embedding": [1.0, 0.0, 0.0]}                   // embedding
//! {"risk": "yes", "score": 0.93}                   // groundedness
//! {"error": "server"}                              // injected failure
//! ```
//!
//! Any response may carry `delay_ms` to simulate a slow endpoint. A fixture
//! may also be an array of `{"match": key, "response": {...}}` entries.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::http::{parse_risk, DimensionGuard};
use super::{
    ChatModel, Completion, Embedder, FinishReason, Groundedness, GroundednessGuard, Message,
    SamplingParams,
};
use crate::error::{BackendError, Error, Result};
use crate::types::PositionLogprobs;

const RULE_PREFIX: &str = "contains:";

/// Stable digest of role-tagged parts: SHA-256 over `role 0x1F content 0x1E` per part, hex encoded.
pub fn digest_parts<'a, I>(parts: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut h = Sha256::new();
    for (role, content) in parts {
        h.update(role.as_bytes());
        h.update([0x1f]);
        h.update(content.as_bytes());
        h.update([0x1e]);
    }
    hex::encode(h.finalize())
}

/// Digest of a chat request's message list.
pub fn request_digest(messages: &[Message]) -> String {
    digest_parts(messages.iter().map(|m| (m.role.as_str(), m.content.as_str())))
}

pub fn embedding_digest(text: &str) -> String {
    digest_parts([("embed", text)])
}

pub fn groundedness_digest(context: &str, claim: &str) -> String {
    digest_parts([("context", context), ("claim", claim)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedResponse {
    Chat {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        logprobs: Option<Vec<PositionLogprobs>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        finish_reason: Option<FinishReason>,
        #[serde(default, skip_serializing_if = "is_zero")]
        delay_ms: u64,
    },
    Embedding {
        embedding: Vec<f64>,
        #[serde(default, skip_serializing_if = "is_zero")]
        delay_ms: u64,
    },
    Groundedness {
        risk: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        score: Option<f64>,
        #[serde(default, skip_serializing_if = "is_zero")]
        delay_ms: u64,
    },
    /// `error` is `transport`, `server`, `unavailable`, or `capability`.
    Fault {
        error: String,
        #[serde(default, skip_serializing_if = "is_zero")]
        delay_ms: u64,
    },
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl ScriptedResponse {
    pub fn text(text: impl Into<String>) -> Self {
        ScriptedResponse::Chat {
            text: text.into(),
            logprobs: None,
            finish_reason: None,
            delay_ms: 0,
        }
    }

    pub fn text_with_logprobs(text: impl Into<String>, logprobs: Vec<PositionLogprobs>) -> Self {
        ScriptedResponse::Chat {
            text: text.into(),
            logprobs: Some(logprobs),
            finish_reason: None,
            delay_ms: 0,
        }
    }

    pub fn fault(kind: impl Into<String>) -> Self {
        ScriptedResponse::Fault {
            error: kind.into(),
            delay_ms: 0,
        }
    }

    pub fn with_delay(mut self, ms: u64) -> Self {
        match &mut self {
            ScriptedResponse::Chat { delay_ms, .. }
            | ScriptedResponse::Embedding { delay_ms, .. }
            | ScriptedResponse::Groundedness { delay_ms, .. }
            | ScriptedResponse::Fault { delay_ms, .. } => *delay_ms = ms,
        }
        self
    }

    fn delay(&self) -> u64 {
        match self {
            ScriptedResponse::Chat { delay_ms, .. }
            | ScriptedResponse::Embedding { delay_ms, .. }
            | ScriptedResponse::Groundedness { delay_ms, .. }
            | ScriptedResponse::Fault { delay_ms, .. } => *delay_ms,
        }
    }

    fn kind(&self) -> Option<RequestKind> {
        match self {
            ScriptedResponse::Chat { .. } => Some(RequestKind::Chat),
            ScriptedResponse::Embedding { .. } => Some(RequestKind::Embedding),
            ScriptedResponse::Groundedness { .. } => Some(RequestKind::Groundedness),
            ScriptedResponse::Fault { .. } => None,
        }
    }
}

fn fault_error(kind: &str) -> BackendError {
    match kind {
        "transport" => BackendError::Transport("scripted transport fault".into()),
        "server" => BackendError::Server {
            status: 500,
            body: "scripted server fault".into(),
        },
        "capability" => BackendError::Capability("scripted capability fault".into()),
        other => BackendError::Unavailable {
            attempts: 1,
            cause: format!("scripted fault: {other}"),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestKind {
    Chat,
    Embedding,
    Groundedness,
}

/// A request as the scripted backend saw it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub kind: RequestKind,
    pub digest: String,
    /// Role-tagged parts: chat messages, `("embed", text)`, or `("context", ..), ("claim", ..)`.
    pub parts: Vec<(String, String)>,
}

impl RecordedRequest {
    /// Concatenated payload text, for containment assertions.
    pub fn payload(&self) -> String {
        self.parts
            .iter()
            .map(|(_, c)| c.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Deserialize)]
struct FixtureEntry {
    #[serde(rename = "match")]
    key: String,
    response: serde_json::Value,
}

#[derive(Debug)]
pub struct ScriptedBackend {
    id: String,
    by_digest: HashMap<String, ScriptedResponse>,
    rules: Vec<(String, ScriptedResponse)>,
    logprobs: bool,
    dims: DimensionGuard,
    log: Mutex<Vec<RecordedRequest>>,
}

impl Default for ScriptedBackend {
    fn default() -> Self {
        ScriptedBackend::new("scripted")
    }
}

impl ScriptedBackend {
    pub fn new(id: impl Into<String>) -> Self {
        ScriptedBackend {
            id: id.into(),
            by_digest: HashMap::new(),
            rules: Vec::new(),
            logprobs: true,
            dims: DimensionGuard::default(),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read fixture file {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }

    /// Build from a fixture value: either an object of `key -> response`, or an
    /// array of `{"match": key, "response": {...}}` entries (which allows the
    /// same rule text more than once, e.g. for different response kinds).
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let entries: Vec<(String, serde_json::Value)> = match value {
            serde_json::Value::Object(map) => map.into_iter().collect(),
            serde_json::Value::Array(items) => items
                .into_iter()
                .enumerate()
                .map(|(i, item)| {
                    let entry: FixtureEntry = serde_json::from_value(item)
                        .map_err(|e| Error::Config(format!("fixture entry {i}: {e}")))?;
                    Ok((entry.key, entry.response))
                })
                .collect::<Result<_>>()?,
            _ => return Err(Error::Config("fixture must be a JSON object or array".into())),
        };
        let mut backend = ScriptedBackend::default();
        for (key, value) in entries {
            let response: ScriptedResponse = serde_json::from_value(value)
                .map_err(|e| Error::Config(format!("fixture {key:?}: {e}")))?;
            backend = backend.insert(key, response);
        }
        Ok(backend)
    }

    /// Serialize to the fixture file format.
    pub fn to_json(&self) -> Result<String> {
        let mut map = serde_json::Map::new();
        let mut keys: Vec<_> = self.by_digest.keys().collect();
        keys.sort();
        for k in keys {
            map.insert(k.clone(), serde_json::to_value(&self.by_digest[k])?);
        }
        for (needle, r) in &self.rules {
            map.insert(format!("{RULE_PREFIX}{needle}"), serde_json::to_value(r)?);
        }
        Ok(serde_json::to_string_pretty(&map)?)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Report no logprob support; chat requests asking for them fail with a capability error.
    pub fn without_logprobs(mut self) -> Self {
        self.logprobs = false;
        self
    }

    pub fn insert(mut self, key: impl Into<String>, response: ScriptedResponse) -> Self {
        let key = key.into();
        match key.strip_prefix(RULE_PREFIX) {
            Some(needle) => self.rules.push((needle.to_string(), response)),
            None => {
                self.by_digest.insert(key, response);
            }
        }
        self
    }

    pub fn on_chat(self, messages: &[Message], response: ScriptedResponse) -> Self {
        self.insert(request_digest(messages), response)
    }

    /// Single user-turn chat fixture.
    pub fn on_prompt(self, prompt: &str, text: impl Into<String>) -> Self {
        self.on_chat(&[Message::user(prompt)], ScriptedResponse::text(text))
    }

    pub fn on_embed(self, text: &str, vector: Vec<f64>) -> Self {
        self.insert(
            embedding_digest(text),
            ScriptedResponse::Embedding {
                embedding: vector,
                delay_ms: 0,
            },
        )
    }

    pub fn on_groundedness(self, context: &str, claim: &str, risk: bool, score: Option<f64>) -> Self {
        self.insert(
            groundedness_digest(context, claim),
            ScriptedResponse::Groundedness {
                risk: if risk { "yes" } else { "no" }.into(),
                score,
                delay_ms: 0,
            },
        )
    }

    /// Fallback rule: any request of the response's kind whose payload contains `needle`.
    pub fn on_contains(self, needle: &str, response: ScriptedResponse) -> Self {
        self.insert(format!("{RULE_PREFIX}{needle}"), response)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.log.lock().unwrap().clone()
    }

    async fn respond(
        &self,
        kind: RequestKind,
        parts: Vec<(&str, &str)>,
    ) -> Result<ScriptedResponse, BackendError> {
        let digest = digest_parts(parts.iter().copied());
        let payload = parts.iter().map(|(_, c)| *c).collect::<Vec<_>>().join("\n");
        self.log.lock().unwrap().push(RecordedRequest {
            kind,
            digest: digest.clone(),
            parts: parts
                .iter()
                .map(|(r, c)| (r.to_string(), c.to_string()))
                .collect(),
        });
        let fits = |r: &ScriptedResponse| r.kind().is_none_or(|k| k == kind);
        let response = self
            .by_digest
            .get(&digest)
            .filter(|r| fits(r))
            .or_else(|| {
                self.rules
                    .iter()
                    .find(|(needle, r)| fits(r) && payload.contains(needle.as_str()))
                    .map(|(_, r)| r)
            })
            .cloned()
            .ok_or(BackendError::FixtureMiss(digest))?;
        if response.delay() > 0 {
            tokio::time::sleep(Duration::from_millis(response.delay())).await;
        }
        if let ScriptedResponse::Fault { error, .. } = &response {
            return Err(fault_error(error));
        }
        Ok(response)
    }
}

#[async_trait]
impl ChatModel for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn supports_logprobs(&self) -> bool {
        self.logprobs
    }

    async fn chat(
        &self,
        messages: &[Message],
        params: &SamplingParams,
    ) -> Result<Completion, BackendError> {
        if params.want_logprobs && !self.logprobs {
            return Err(BackendError::Capability(format!(
                "{} does not return token logprobs",
                self.id
            )));
        }
        let parts = messages
            .iter()
            .map(|m| (m.role.as_str(), m.content.as_str()))
            .collect();
        match self.respond(RequestKind::Chat, parts).await? {
            ScriptedResponse::Chat {
                text,
                logprobs,
                finish_reason,
                ..
            } => {
                let k = params.top_k_logprobs as usize;
                let logprob_summary = logprobs.filter(|_| params.want_logprobs).map(|ps| {
                    ps.into_iter()
                        .map(|mut p| {
                            p.top.truncate(k);
                            p
                        })
                        .collect()
                });
                Ok(Completion {
                    text,
                    logprob_summary,
                    finish_reason: finish_reason.unwrap_or(FinishReason::Stop),
                    attempts: 1,
                })
            }
            _ => unreachable!("respond filters by kind"),
        }
    }
}

#[async_trait]
impl Embedder for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        match self.respond(RequestKind::Embedding, vec![("embed", text)]).await? {
            ScriptedResponse::Embedding { embedding, .. } => {
                self.dims.check(&embedding)?;
                Ok(embedding)
            }
            _ => unreachable!("respond filters by kind"),
        }
    }
}

#[async_trait]
impl GroundednessGuard for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    async fn check(&self, context: &str, claim: &str) -> Result<Groundedness, BackendError> {
        match self
            .respond(
                RequestKind::Groundedness,
                vec![("context", context), ("claim", claim)],
            )
            .await?
        {
            ScriptedResponse::Groundedness { risk, score, .. } => parse_risk(&risk, score),
            _ => unreachable!("respond filters by kind"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TopLogprob;

    fn five_way(token: &str) -> PositionLogprobs {
        PositionLogprobs {
            token: token.into(),
            logprob: -0.05,
            top: ["B", "A", "C", "D", "E", "F"]
                .iter()
                .enumerate()
                .map(|(i, t)| TopLogprob {
                    token: t.to_string(),
                    logprob: -(i as f64) - 0.05,
                })
                .collect(),
        }
    }

    #[tokio::test]
    async fn fixture_echo() {
        let b = ScriptedBackend::default().on_prompt("Q?", "Final answer: B");
        let c = b
            .chat(&[Message::user("Q?")], &SamplingParams::default())
            .await
            .unwrap();
        assert_eq!(c.text, "Final answer: B");
        assert_eq!(c.attempts, 1);
        assert!(c.logprob_summary.is_none());
    }

    #[tokio::test]
    async fn logprobs_truncated_to_top_k() {
        let msgs = [Message::user("Q?")];
        let b = ScriptedBackend::default().on_chat(
            &msgs,
            ScriptedResponse::text_with_logprobs("B", vec![five_way("B"), five_way(".")]),
        );
        let c = b
            .chat(&msgs, &SamplingParams::default().with_logprobs(5))
            .await
            .unwrap();
        let lp = c.logprob_summary.unwrap();
        assert_eq!(lp.len(), 2);
        assert!(lp.iter().all(|p| p.top.len() == 5));
    }

    #[tokio::test]
    async fn missing_fixture_fails_loudly() {
        let b = ScriptedBackend::default();
        let err = b
            .chat(&[Message::user("unknown")], &SamplingParams::default())
            .await
            .unwrap_err();
        assert!(matches!(err, BackendError::FixtureMiss(d) if d == request_digest(&[Message::user("unknown")])));
    }

    #[tokio::test]
    async fn embeddings_are_deterministic() {
        let b = ScriptedBackend::default().on_embed("hello", vec![1.0, 0.0, 0.0]);
        let a = b.embed("hello").await.unwrap();
        let again = b.embed("hello").await.unwrap();
        assert_eq!(a, vec![1.0, 0.0, 0.0]);
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            again.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[tokio::test]
    async fn dimension_change_is_protocol_error() {
        let b = ScriptedBackend::default()
            .on_embed("a", vec![1.0, 0.0])
            .on_embed("b", vec![1.0, 0.0, 0.0]);
        b.embed("a").await.unwrap();
        assert!(matches!(b.embed("b").await, Err(BackendError::Protocol(_))));
    }

    #[tokio::test]
    async fn rules_respect_kind_and_order() {
        let b = ScriptedBackend::default()
            .on_contains("grandson", ScriptedResponse::Groundedness { risk: "yes".into(), score: Some(0.9), delay_ms: 0 })
            .on_contains("grandson", ScriptedResponse::text("first"))
            .on_contains("grand", ScriptedResponse::text("second"));
        let c = b
            .chat(&[Message::user("a grandson")], &SamplingParams::default())
            .await
            .unwrap();
        assert_eq!(c.text, "first");
        let g = b.check("ctx", "the grandson").await.unwrap();
        assert!(g.risk);
        assert!(b.embed("grandson").await.is_err());
    }

    #[tokio::test]
    async fn faults_and_capability() {
        let b = ScriptedBackend::default()
            .on_chat(&[Message::user("x")], ScriptedResponse::fault("unavailable"))
            .without_logprobs();
        assert!(matches!(
            b.chat(&[Message::user("x")], &SamplingParams::default()).await,
            Err(BackendError::Unavailable { .. })
        ));
        assert!(matches!(
            b.chat(&[Message::user("x")], &SamplingParams::default().with_logprobs(5)).await,
            Err(BackendError::Capability(_))
        ));
    }

    #[tokio::test]
    async fn json_round_trip_and_digest_stability() {
        let b = ScriptedBackend::default()
            .on_prompt("Q?", "B")
            .on_groundedness("q", "q", false, None)
            .on_contains("needle", ScriptedResponse::fault("server"));
        let reloaded = ScriptedBackend::from_json(&b.to_json().unwrap()).unwrap();
        assert!(!reloaded.check("q", "q").await.unwrap().risk);
        assert_eq!(
            reloaded.chat(&[Message::user("Q?")], &SamplingParams::default()).await.unwrap().text,
            "B"
        );
        // Role tagging matters.
        assert_ne!(
            request_digest(&[Message::user("x")]),
            request_digest(&[Message::assistant("x")])
        );
        assert_eq!(request_digest(&[Message::user("x")]), request_digest(&[Message::user("x")]));
    }
}
