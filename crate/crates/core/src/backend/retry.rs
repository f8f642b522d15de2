//! Exponential backoff with full jitter.

use std::future::Future;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub factor: f64,
    pub max_delay_ms: u64,
    /// Draw each delay uniformly from `[0, backoff]` instead of sleeping the full backoff.
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 10,
            base_delay_ms: 500,
            factor: 2.0,
            max_delay_ms: 30_000,
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests and fixture replays.
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay_ms: 0,
            jitter: false,
            ..RetryPolicy::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_attempts == 0 {
            return Err(Error::Config("retry.max_attempts must be >= 1".into()));
        }
        if self.factor.is_nan() || self.factor < 1.0 {
            return Err(Error::Config("retry.factor must be >= 1".into()));
        }
        Ok(())
    }

    /// Upper bound of the wait after the `failures`-th consecutive failure (1-based).
    pub fn backoff_ceiling(&self, failures: u32) -> Duration {
        let exp = self.factor.powi(failures.saturating_sub(1) as i32);
        let ms = (self.base_delay_ms as f64 * exp).min(self.max_delay_ms as f64);
        Duration::from_millis(ms as u64)
    }

    fn delay(&self, failures: u32) -> Duration {
        let ceiling = self.backoff_ceiling(failures);
        if self.jitter && !ceiling.is_zero() {
            let ms = rand::rng().random_range(0..=ceiling.as_millis() as u64);
            Duration::from_millis(ms)
        } else {
            ceiling
        }
    }
}

#[async_trait]
pub trait Sleeper: Send + Sync {
    async fn sleep(&self, duration: Duration);
}

pub struct TokioSleeper;

#[async_trait]
impl Sleeper for TokioSleeper {
    async fn sleep(&self, duration: Duration) {
        if !duration.is_zero() {
            tokio::time::sleep(duration).await;
        }
    }
}

/// Fake clock: records requested waits and returns immediately.
#[derive(Default)]
pub struct RecordingSleeper {
    waits: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn waits(&self) -> Vec<Duration> {
        self.waits.lock().unwrap().clone()
    }
}

#[async_trait]
impl Sleeper for RecordingSleeper {
    async fn sleep(&self, duration: Duration) {
        self.waits.lock().unwrap().push(duration);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retried<T> {
    pub value: T,
    pub attempts: u32,
}

/// Run `action` until it succeeds, fails with a non-retryable error, or the
/// attempt budget is spent. `action` receives the 1-based attempt number.
pub async fn with_retries<T, F, Fut>(
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
    mut action: F,
) -> Result<Retried<T>, BackendError>
where
    F: FnMut(u32) -> Fut,
    Fut: Future<Output = Result<T, BackendError>>,
{
    let max = policy.max_attempts.max(1);
    let mut attempt = 1;
    loop {
        match action(attempt).await {
            Ok(value) => {
                return Ok(Retried {
                    value,
                    attempts: attempt,
                })
            }
            Err(e) if !e.is_retryable() => return Err(e),
            Err(e) if attempt >= max => {
                return Err(BackendError::Unavailable {
                    attempts: attempt,
                    cause: e.to_string(),
                })
            }
            Err(e) => {
                tracing::debug!(attempt, error = %e, "retrying backend request");
                sleeper.sleep(policy.delay(attempt)).await;
                attempt += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn failing_until(n: u32, calls: &AtomicU32) -> impl FnMut(u32) -> std::future::Ready<Result<u32, BackendError>> + '_ {
        move |attempt| {
            calls.fetch_add(1, Ordering::SeqCst);
            std::future::ready(if attempt <= n {
                Err(BackendError::Server {
                    status: 500,
                    body: format!("boom {attempt}"),
                })
            } else {
                Ok(attempt)
            })
        }
    }

    #[tokio::test]
    async fn first_success_wins() {
        let calls = AtomicU32::new(0);
        let r = with_retries(&RetryPolicy::default(), &RecordingSleeper::default(), failing_until(0, &calls))
            .await
            .unwrap();
        assert_eq!(r.attempts, 1);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[tokio::test]
    async fn three_failures_then_success_with_exact_backoff() {
        let calls = AtomicU32::new(0);
        let sleeper = RecordingSleeper::default();
        let policy = RetryPolicy {
            jitter: false,
            ..RetryPolicy::default()
        };
        let r = with_retries(&policy, &sleeper, failing_until(3, &calls)).await.unwrap();
        assert_eq!(r.attempts, 4);
        assert_eq!(
            sleeper.waits(),
            [500, 1000, 2000].map(Duration::from_millis).to_vec()
        );
    }

    #[tokio::test]
    async fn ten_failures_exhaust_budget() {
        let calls = AtomicU32::new(0);
        let err = with_retries(&RetryPolicy::default(), &RecordingSleeper::default(), failing_until(10, &calls))
            .await
            .unwrap_err();
        assert_eq!(calls.load(Ordering::SeqCst), 10);
        match err {
            BackendError::Unavailable { attempts, cause } => {
                assert_eq!(attempts, 10);
                assert!(cause.contains("boom 10"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[tokio::test]
    async fn client_errors_are_not_retried() {
        let calls = AtomicU32::new(0);
        let err = with_retries(&RetryPolicy::default(), &RecordingSleeper::default(), |_| {
            calls.fetch_add(1, Ordering::SeqCst);
            std::future::ready(Err::<(), _>(BackendError::Rejected {
                status: 400,
                body: "bad".into(),
            }))
        })
        .await
        .unwrap_err();
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert!(matches!(err, BackendError::Rejected { .. }));
    }

    #[test]
    fn backoff_is_capped_and_jitter_bounded() {
        let p = RetryPolicy::default();
        assert_eq!(p.backoff_ceiling(1), Duration::from_millis(500));
        assert_eq!(p.backoff_ceiling(7), Duration::from_millis(30_000));
        assert_eq!(p.backoff_ceiling(9), Duration::from_millis(30_000));
        for failures in 1..10 {
            assert!(p.delay(failures) <= p.backoff_ceiling(failures));
        }
    }
}
