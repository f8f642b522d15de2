//! HTTP clients against a local mock server.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use abstain_core::backend::{BackendEndpoint, EndpointKind, Message, RetryPolicy, SamplingParams};
use abstain_core::error::BackendError;
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

struct Mock {
    calls: AtomicU32,
    fail_first: u32,
    fail_status: StatusCode,
    last_body: std::sync::Mutex<Option<Value>>,
}

async fn chat(State(m): State<Arc<Mock>>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    *m.last_body.lock().unwrap() = Some(body);
    let n = m.calls.fetch_add(1, Ordering::SeqCst) + 1;
    if n <= m.fail_first {
        return (m.fail_status, Json(json!({"error": "try again"})));
    }
    (
        StatusCode::OK,
        Json(json!({
            "choices": [{
                "message": {"role": "assistant", "content": "Final answer: C"},
                "finish_reason": "stop",
                "logprobs": {"content": [
                    {"token": "C", "logprob": -0.1, "top_logprobs": [
                        {"token": "C", "logprob": -0.1}, {"token": "B", "logprob": -2.5}
                    ]}
                ]}
            }]
        })),
    )
}

async fn embeddings() -> Json<Value> {
    Json(json!({"data": [{"embedding": [0.6, 0.8]}]}))
}

async fn groundedness() -> Json<Value> {
    Json(json!({"risk": "Yes", "score": 0.8}))
}

async fn serve(fail_first: u32, fail_status: StatusCode) -> (String, Arc<Mock>) {
    let mock = Arc::new(Mock {
        calls: AtomicU32::new(0),
        fail_first,
        fail_status,
        last_body: Default::default(),
    });
    let app = Router::new()
        .route("/v1/chat/completions", post(chat))
        .route("/v1/embeddings", post(embeddings))
        .route("/v1/groundedness", post(groundedness))
        .with_state(mock.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/v1"), mock)
}

fn endpoint(kind: EndpointKind, url: &str) -> BackendEndpoint {
    let mut e = BackendEndpoint::new(kind, url, "mock-model");
    e.retry = RetryPolicy::immediate(10);
    e
}

#[tokio::test]
async fn nine_server_errors_then_success_takes_ten_attempts() {
    let (url, mock) = serve(9, StatusCode::INTERNAL_SERVER_ERROR).await;
    let model = endpoint(EndpointKind::Chat, &url).connect_chat().unwrap();
    let c = model
        .chat(&[Message::user("Q")], &SamplingParams::default())
        .await
        .unwrap();
    assert_eq!(c.text, "Final answer: C");
    assert_eq!(c.attempts, 10);
    assert_eq!(mock.calls.load(Ordering::SeqCst), 10);
}

#[tokio::test]
async fn ten_server_errors_exhaust_the_budget() {
    let (url, mock) = serve(10, StatusCode::SERVICE_UNAVAILABLE).await;
    let model = endpoint(EndpointKind::Chat, &url).connect_chat().unwrap();
    let err = model
        .chat(&[Message::user("Q")], &SamplingParams::default())
        .await
        .unwrap_err();
    assert!(matches!(err, BackendError::Unavailable { attempts: 10, .. }), "{err:?}");
    assert_eq!(mock.calls.load(Ordering::SeqCst), 10);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let (url, mock) = serve(1, StatusCode::BAD_REQUEST).await;
    let model = endpoint(EndpointKind::Chat, &url).connect_chat().unwrap();
    let err = model
        .chat(&[Message::user("Q")], &SamplingParams::default())
        .await
        .unwrap_err();
    assert!(matches!(err, BackendError::Rejected { status: 400, .. }));
    assert_eq!(mock.calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn request_body_and_logprobs() {
    let (url, mock) = serve(0, StatusCode::OK).await;
    let model = endpoint(EndpointKind::Chat, &url).connect_chat().unwrap();
    let params = SamplingParams::default().with_logprobs(2);
    let c = model.chat(&[Message::user("Q")], &params).await.unwrap();
    let body = mock.last_body.lock().unwrap().clone().unwrap();
    assert_eq!(body["model"], "mock-model");
    assert_eq!(body["temperature"], 0.1);
    assert_eq!(body["max_tokens"], 1024);
    assert_eq!(body["top_logprobs"], 2);
    assert_eq!(body["messages"][0]["content"], "Q");
    let lp = c.logprob_summary.unwrap();
    assert_eq!(lp[0].top.len(), 2);
}

#[tokio::test]
async fn embedding_and_guard_clients() {
    let (url, _) = serve(0, StatusCode::OK).await;
    let e = endpoint(EndpointKind::Embedding, &url).connect_embedder().unwrap();
    assert_eq!(e.embed("text").await.unwrap(), vec![0.6, 0.8]);
    let g = endpoint(EndpointKind::Groundedness, &url).connect_guard().unwrap();
    let v = g.check("context", "claim").await.unwrap();
    assert!(v.risk);
    assert_eq!(v.score, Some(0.8));
}

#[tokio::test]
async fn unreachable_endpoint_is_unavailable() {
    let mut e = endpoint(EndpointKind::Chat, "http://127.0.0.1:9/v1");
    e.retry = RetryPolicy::immediate(2);
    let model = e.connect_chat().unwrap();
    let err = model
        .chat(&[Message::user("Q")], &SamplingParams::default())
        .await
        .unwrap_err();
    assert!(matches!(err, BackendError::Unavailable { attempts: 2, .. }), "{err:?}");
}
