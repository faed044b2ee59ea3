//! OpenAI-compatible chat-completions client.

use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::{backoff, Backend, BackendTag, GenerationParams, LlmError};
use crate::prompt::PromptText;

pub const ENV_ENDPOINT: &str = "XLAT_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "XLAT_LLM_API_KEY";
pub const ENV_MODEL: &str = "XLAT_LLM_MODEL";

#[derive(Debug, Clone)]
pub struct LiveConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: Option<String>,
}

impl LiveConfig {
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var(ENV_ENDPOINT).ok().filter(|s| !s.is_empty())?;
        Some(LiveConfig {
            endpoint,
            api_key: std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty()),
            model: std::env::var(ENV_MODEL).ok().filter(|s| !s.is_empty()),
        })
    }
}

pub struct LiveBackend {
    cfg: LiveConfig,
    client: reqwest::blocking::Client,
}

enum Failure {
    Transient(String),
    Fatal(String),
}

impl LiveBackend {
    pub fn new(cfg: LiveConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| LlmError::NotConfigured(e.to_string()))?;
        Ok(LiveBackend { cfg, client })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.cfg.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, prompt: &PromptText, params: &GenerationParams) -> Result<String, Failure> {
        let model = match (&self.cfg.model, params.model.as_str()) {
            (Some(m), "default") => m.clone(),
            (_, m) => m.to_string(),
        };
        let body = json!({
            "model": model,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "messages": [{"role": "user", "content": prompt.rendered}],
        });
        let mut req = self
            .client
            .post(self.url())
            .timeout(Duration::from_secs(params.timeout_secs.max(1)))
            .json(&body);
        if let Some(k) = &self.cfg.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Failure::Transient(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(format!("HTTP {status}: {text}")));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Fatal(format!("invalid JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Failure::Fatal("reply has no choices[0].message.content".into()))
    }
}

impl Backend for LiveBackend {
    fn tag(&self) -> BackendTag {
        BackendTag::Live
    }

    fn complete_raw(&self, _key: &str, prompt: &PromptText, params: &GenerationParams) -> Result<String, LlmError> {
        let attempts = params.retries.max(1);
        let mut last = String::new();
        for a in 0..attempts {
            match self.attempt(prompt, params) {
                Ok(r) => return Ok(r),
                Err(Failure::Fatal(m)) => {
                    return Err(LlmError::ServiceUnavailable {
                        attempts: a + 1,
                        message: m,
                    })
                }
                Err(Failure::Transient(m)) => {
                    log::warn!("completion attempt {} failed: {m}", a + 1);
                    last = m;
                    if a + 1 < attempts {
                        thread::sleep(backoff(a));
                    }
                }
            }
        }
        Err(LlmError::ServiceUnavailable {
            attempts,
            message: last,
        })
    }
}
