use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::label::LabelSource;
use super::prompt::ChatMessage;
use crate::error::{Error, Result};

/// Failure of a single backend call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Transport failure or server-side error; worth retrying.
    Transient(String),
    RateLimited,
    /// Anything a retry cannot fix (bad credentials, bad request).
    Fatal(String),
}

impl std::fmt::Display for BackendError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendError::Transient(m) => write!(f, "transient: {m}"),
            BackendError::RateLimited => f.write_str("rate limited"),
            BackendError::Fatal(m) => write!(f, "fatal: {m}"),
        }
    }
}

/// A chat-completion service.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> std::result::Result<String, BackendError>;

    fn source(&self) -> LabelSource {
        LabelSource::Llm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    #[serde(with = "millis")]
    pub initial_backoff: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts.
    pub fn immediate(attempts: u32) -> Self {
        Self {
            attempts,
            initial_backoff: Duration::ZERO,
            multiplier: 1.0,
        }
    }

    pub fn backoff(&self, retry: u32) -> Duration {
        self.initial_backoff
            .mul_f64(self.multiplier.powi(retry.saturating_sub(1) as i32))
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// Calls the backend, retrying transient failures with exponential backoff.
pub fn call_with_retry(
    backend: &dyn ChatBackend,
    messages: &[ChatMessage],
    policy: &RetryPolicy,
) -> Result<String> {
    let attempts = policy.attempts.max(1);
    let mut last = String::new();
    for attempt in 1..=attempts {
        if attempt > 1 {
            let wait = policy.backoff(attempt - 1);
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        match backend.complete(messages) {
            Ok(reply) => return Ok(reply),
            Err(BackendError::Fatal(m)) => return Err(Error::Backend(m)),
            Err(e) => {
                log::warn!("backend attempt {attempt}/{attempts} failed: {e}");
                last = e.to_string();
            }
        }
    }
    Err(Error::Transient {
        attempts,
        message: last,
    })
}

/// Replays canned replies in order and records every request it receives.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    replies: Mutex<VecDeque<std::result::Result<String, BackendError>>>,
    received: Mutex<Vec<Vec<ChatMessage>>>,
    source: Option<LabelSource>,
}

impl ScriptedBackend {
    pub fn new<I>(replies: I) -> Self
    where
        I: IntoIterator<Item = std::result::Result<String, BackendError>>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().collect()),
            received: Mutex::new(Vec::new()),
            source: None,
        }
    }

    pub fn from_texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(texts.into_iter().map(|t| Ok(t.into())))
    }

    pub fn with_source(mut self, source: LabelSource) -> Self {
        self.source = Some(source);
        self
    }

    pub fn received(&self) -> Vec<Vec<ChatMessage>> {
        self.received.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().unwrap().len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, messages: &[ChatMessage]) -> std::result::Result<String, BackendError> {
        self.received.lock().unwrap().push(messages.to_vec());
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(BackendError::Fatal("script exhausted".into())))
    }

    fn source(&self) -> LabelSource {
        self.source.unwrap_or(LabelSource::Llm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transient_failures_are_retried() {
        let b = ScriptedBackend::new([
            Err(BackendError::Transient("reset".into())),
            Err(BackendError::RateLimited),
            Ok("done".into()),
        ]);
        let out = call_with_retry(&b, &[], &RetryPolicy::immediate(3)).unwrap();
        assert_eq!(out, "done");
        assert_eq!(b.received().len(), 3);
    }

    #[test]
    fn exhausted_retries_report_count() {
        let b = ScriptedBackend::new((0..5).map(|_| Err(BackendError::Transient("down".into()))));
        match call_with_retry(&b, &[], &RetryPolicy::immediate(3)) {
            Err(Error::Transient { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(b.remaining(), 2);
    }

    #[test]
    fn fatal_errors_are_not_retried() {
        let b = ScriptedBackend::new([Err(BackendError::Fatal("401".into())), Ok("x".into())]);
        assert!(matches!(
            call_with_retry(&b, &[], &RetryPolicy::immediate(3)),
            Err(Error::Backend(_))
        ));
        assert_eq!(b.remaining(), 1);
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(p.backoff(1), Duration::from_secs(1));
        assert_eq!(p.backoff(2), Duration::from_secs(2));
    }
}
