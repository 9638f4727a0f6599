//! Minimal OpenAI-compatible chat-completions client.
//!
//! All remote backends (policy, judge, inducer, proposer) share this
//! contract. The transport is a trait so tests can stub replies without a
//! network; the real transport posts JSON over HTTP with the API key taken
//! from an environment variable named in the config.

use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed completion envelope: {0}")]
    Envelope(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub retries: usize,
    pub temperature: f64,
}

impl Default for ChatConfig {
    fn default() -> Self {
        ChatConfig {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "default".into(),
            api_key_env: "WEBSKILL_API_KEY".into(),
            retries: 2,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Message {
    pub role: &'static str,
    pub content: String,
}

pub fn system(content: impl Into<String>) -> Message {
    Message {
        role: "system",
        content: content.into(),
    }
}

pub fn user(content: impl Into<String>) -> Message {
    Message {
        role: "user",
        content: content.into(),
    }
}

/// Sends one request body, returns the raw response body.
pub trait ChatTransport: Send + Sync {
    fn post(&self, endpoint: &str, api_key: Option<&str>, body: &serde_json::Value)
        -> Result<String, ChatError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Self {
        HttpTransport {
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl ChatTransport for HttpTransport {
    fn post(
        &self,
        endpoint: &str,
        api_key: Option<&str>,
        body: &serde_json::Value,
    ) -> Result<String, ChatError> {
        let mut req = self.client.post(endpoint).json(body);
        if let Some(key) = api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ChatError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ChatError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ChatError::Transport(format!("{status}: {text}")));
        }
        Ok(text)
    }
}

#[derive(Clone)]
pub struct ChatClient {
    pub config: ChatConfig,
    transport: Arc<dyn ChatTransport>,
}

impl ChatClient {
    pub fn new(config: ChatConfig) -> Self {
        ChatClient {
            config,
            transport: Arc::new(HttpTransport::new()),
        }
    }

    pub fn with_transport(config: ChatConfig, transport: Arc<dyn ChatTransport>) -> Self {
        ChatClient { config, transport }
    }

    /// One completion; transport failures are retried per the config.
    pub fn complete(&self, messages: &[Message]) -> Result<String, ChatError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": messages,
        });
        let api_key = std::env::var(&self.config.api_key_env).ok();
        let mut last = None;
        for _ in 0..=self.config.retries {
            match self
                .transport
                .post(&self.config.endpoint, api_key.as_deref(), &body)
                .and_then(|raw| extract_content(&raw))
            {
                Ok(content) => return Ok(content),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| ChatError::Transport("no attempts made".into())))
    }
}

fn extract_content(raw: &str) -> Result<String, ChatError> {
    let v: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| ChatError::Envelope(e.to_string()))?;
    v["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| ChatError::Envelope("missing choices[0].message.content".into()))
}

#[cfg(test)]
pub mod testing {
    use super::*;
    use std::sync::Mutex;

    /// Scripted transport: pops replies front-to-back, repeating the last.
    pub struct StubTransport {
        replies: Mutex<Vec<String>>,
        pub requests: Mutex<Vec<serde_json::Value>>,
    }

    impl StubTransport {
        pub fn new(replies: Vec<&str>) -> Arc<Self> {
            Arc::new(StubTransport {
                replies: Mutex::new(replies.into_iter().map(String::from).collect()),
                requests: Mutex::new(Vec::new()),
            })
        }

        pub fn reply_with(content: &str) -> Arc<Self> {
            Self::new(vec![content])
        }
    }

    impl ChatTransport for StubTransport {
        fn post(
            &self,
            _endpoint: &str,
            _api_key: Option<&str>,
            body: &serde_json::Value,
        ) -> Result<String, ChatError> {
            self.requests.lock().unwrap().push(body.clone());
            let mut replies = self.replies.lock().unwrap();
            let content = if replies.len() > 1 {
                replies.remove(0)
            } else {
                replies.first().cloned().unwrap_or_default()
            };
            Ok(serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": content}}]
            })
            .to_string())
        }
    }
}
