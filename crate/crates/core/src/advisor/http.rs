//! Chat-completions transport for hosted language-model advisors.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::backend::{ActorBackend, ActorQuery, BackendError, CriticBackend, CriticQuery};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpChatConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub timeout_ms: u64,
    /// Total attempts per query, first try included.
    pub max_attempts: u32,
    /// Delay before the first retry; doubled on every further retry.
    pub backoff_ms: u64,
    /// Environment variable holding a bearer token, if any.
    pub api_key_env: Option<String>,
}

impl HttpChatConfig {
    pub fn actor_default(endpoint: &str, model: &str) -> Self {
        HttpChatConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            max_tokens: 5120,
            temperature: 0.0,
            timeout_ms: 60_000,
            max_attempts: 3,
            backoff_ms: 500,
            api_key_env: Some("ACE_API_KEY".into()),
        }
    }

    pub fn critic_default(endpoint: &str, model: &str) -> Self {
        HttpChatConfig {
            max_tokens: 4096,
            ..Self::actor_default(endpoint, model)
        }
    }
}

#[derive(Debug)]
pub struct HttpChat {
    config: HttpChatConfig,
    client: reqwest::blocking::Client,
    /// Requests sent, retries included.
    pub requests_sent: usize,
    /// Body of the most recent request, as sent.
    pub last_request: Option<String>,
}

impl HttpChat {
    pub fn new(config: HttpChatConfig) -> Result<Self, BackendError> {
        if config.max_tokens == 0 {
            return Err(BackendError::Config("max_tokens must be positive".into()));
        }
        if config.max_attempts == 0 {
            return Err(BackendError::Config("max_attempts must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpChat {
            config,
            client,
            requests_sent: 0,
            last_request: None,
        })
    }

    pub fn config(&self) -> &HttpChatConfig {
        &self.config
    }

    /// Sends one chat request; transient failures (timeouts, connection
    /// errors, 429, 5xx) are retried with exponential backoff.
    pub fn chat(&mut self, system: &str, user: &str) -> Result<String, BackendError> {
        let body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
        });
        let body_text = body.to_string();
        self.last_request = Some(body_text.clone());
        let token = self
            .config
            .api_key_env
            .as_ref()
            .and_then(|var| std::env::var(var).ok());
        let mut last = String::new();
        for attempt in 0..self.config.max_attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (attempt - 1)));
            }
            self.requests_sent += 1;
            let mut req = self
                .client
                .post(&self.config.endpoint)
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(body_text.clone());
            if let Some(t) = &token {
                req = req.bearer_auth(t);
            }
            let resp = match req.send() {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("advisor request attempt {} failed: {e}", attempt + 1);
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            let text = resp.text().unwrap_or_default();
            if status.as_u16() == 429 || status.is_server_error() {
                log::warn!("advisor endpoint returned {status} on attempt {}", attempt + 1);
                last = format!("status {status}");
                continue;
            }
            if !status.is_success() {
                return Err(BackendError::Status {
                    status: status.as_u16(),
                    body: text,
                });
            }
            return extract_content(&text);
        }
        Err(BackendError::Exhausted {
            attempts: self.config.max_attempts,
            last,
        })
    }
}

/// `choices[0].message.content` of a chat-completions response.
pub fn extract_content(body: &str) -> Result<String, BackendError> {
    let v: serde_json::Value = serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::Malformed("missing choices[0].message.content".into()))
}

impl ActorBackend for HttpChat {
    fn propose(&mut self, query: &ActorQuery) -> Result<String, BackendError> {
        self.chat(query.system, query.prompt)
    }
}

impl CriticBackend for HttpChat {
    fn assess(&mut self, query: &CriticQuery) -> Result<String, BackendError> {
        self.chat(query.system, query.prompt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_extraction() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(extract_content(body).unwrap(), "hi");
        assert!(matches!(extract_content("{}"), Err(BackendError::Malformed(_))));
        assert!(matches!(extract_content("not json"), Err(BackendError::Malformed(_))));
    }
}
