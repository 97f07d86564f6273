//! Chat-completion backend over HTTP (OpenAI-compatible wire format).

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::backend::{BackendError, ChatBackend};
use super::prompt::ChatMessage;
use crate::error::{Error, Result};

pub const DEFAULT_TOKEN_ENV: &str = "ADHERE_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_secs: u64,
    pub temperature: f64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o-2024-05-13".into(),
            token_env: DEFAULT_TOKEN_ENV.into(),
            timeout_secs: 120,
            temperature: 0.0,
        }
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    token: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    /// Reads the bearer token from the configured environment variable.
    pub fn from_env(config: HttpConfig) -> Result<Self> {
        let token = std::env::var(&config.token_env).map_err(|_| {
            Error::Config(format!("environment variable {} is not set", config.token_env))
        })?;
        Ok(Self::with_token(config, token))
    }

    pub fn with_token(config: HttpConfig, token: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            token: token.into(),
            agent,
        }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

impl ChatBackend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage]) -> std::result::Result<String, BackendError> {
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": messages,
        });
        let mut resp = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.token))
            .send_json(&body)
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            429 => return Err(BackendError::RateLimited),
            500..=599 => return Err(BackendError::Transient(format!("HTTP {status}"))),
            _ => {
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                return Err(BackendError::Fatal(format!("HTTP {status}: {text}")));
            }
        }
        let completion: Completion = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Fatal(format!("unreadable completion: {e}")))?;
        completion
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Fatal("completion has no content".into()))
    }
}
