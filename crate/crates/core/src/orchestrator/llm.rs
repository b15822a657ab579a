//! Chat-completion clients: a scripted transcript for offline runs and an
//! OpenAI-compatible HTTP client.

use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use ureq::Agent;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("LLM configuration error: {0}")]
    Config(String),
    #[error("LLM transport error: {0}")]
    Transport(String),
    #[error("LLM endpoint returned HTTP {status}: {message}")]
    Status { status: u16, message: String },
    #[error("LLM returned an empty completion")]
    Empty,
    #[error("scripted transcript exhausted after {0} response(s)")]
    Exhausted(usize),
}

pub trait LlmClient: Send + Sync {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

/// Replays canned responses: the k-th call returns the k-th string.
#[derive(Debug, Default)]
pub struct ScriptedLlm {
    responses: Vec<String>,
    calls: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedLlm {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> ScriptedLlm {
        ScriptedLlm { responses: responses.into_iter().map(Into::into).collect(), calls: Mutex::default() }
    }

    /// Reads a JSON list of strings.
    pub fn from_file(path: &Path) -> Result<ScriptedLlm, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let responses: Vec<String> = serde_json::from_str(&text)
            .map_err(|e| LlmError::Config(format!("{}: expected a JSON list of strings: {e}", path.display())))?;
        Ok(ScriptedLlm::new(responses))
    }

    /// Every conversation sent so far.
    pub fn calls(&self) -> Vec<Vec<ChatMessage>> {
        self.calls.lock().expect("transcript lock poisoned").clone()
    }
}

impl LlmClient for ScriptedLlm {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let mut calls = self.calls.lock().expect("transcript lock poisoned");
        let k = calls.len();
        calls.push(messages.to_vec());
        self.responses.get(k).cloned().ok_or(LlmError::Exhausted(self.responses.len()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub base_url: String,
    pub api_key: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_s: f64,
}

pub const DEFAULT_MODEL: &str = "gpt-4";

impl LlmConfig {
    pub fn new(base_url: &str, api_key: &str) -> LlmConfig {
        LlmConfig {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            model: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            max_tokens: 2048,
            timeout_s: 120.0,
        }
    }

    /// Reads `WAVCRAFT_LLM_BASE_URL`, `WAVCRAFT_LLM_API_KEY` and
    /// `WAVCRAFT_LLM_MODEL`. `Ok(None)` when no endpoint is configured.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Option<LlmConfig>, LlmError> {
        let get = |key: &str| lookup(key).map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
        let Some(base_url) = get("WAVCRAFT_LLM_BASE_URL") else {
            return Ok(None);
        };
        let api_key = get("WAVCRAFT_LLM_API_KEY")
            .ok_or_else(|| LlmError::Config(format!("WAVCRAFT_LLM_API_KEY is required with endpoint {base_url}")))?;
        let mut config = LlmConfig::new(&base_url, &api_key);
        if let Some(model) = get("WAVCRAFT_LLM_MODEL") {
            config.model = model;
        }
        Ok(Some(config))
    }

    pub fn from_env() -> Result<Option<LlmConfig>, LlmError> {
        Self::from_lookup(|key| std::env::var(key).ok())
    }
}

pub struct OpenAiClient {
    config: LlmConfig,
    agent: Agent,
}

impl OpenAiClient {
    pub fn new(config: LlmConfig) -> OpenAiClient {
        let agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        OpenAiClient { config, agent }
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }
}

impl LlmClient for OpenAiClient {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        });
        let url = format!("{}/chat/completions", self.config.base_url);
        let mut response = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(LlmError::Status { status, message: text.chars().take(300).collect() });
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| LlmError::Transport(format!("malformed completion: {e}")))?;
        let content = value["choices"][0]["message"]["content"].as_str().unwrap_or("");
        if content.trim().is_empty() {
            return Err(LlmError::Empty);
        }
        Ok(content.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_replays_in_order() {
        let llm = ScriptedLlm::new(["a", "b"]);
        let msg = [ChatMessage::user("hi")];
        assert_eq!(llm.chat(&msg).unwrap(), "a");
        assert_eq!(llm.chat(&msg).unwrap(), "b");
        assert_eq!(llm.chat(&msg), Err(LlmError::Exhausted(2)));
        assert_eq!(llm.calls().len(), 3);
    }

    #[test]
    fn config_from_environment() {
        assert_eq!(LlmConfig::from_lookup(|_| None), Ok(None));
        let missing_key = LlmConfig::from_lookup(|k| (k == "WAVCRAFT_LLM_BASE_URL").then(|| "http://x/v1".into()));
        assert!(matches!(missing_key, Err(LlmError::Config(_))));
        let config = LlmConfig::from_lookup(|k| match k {
            "WAVCRAFT_LLM_BASE_URL" => Some("http://x/v1/".into()),
            "WAVCRAFT_LLM_API_KEY" => Some("k".into()),
            _ => None,
        })
        .unwrap()
        .unwrap();
        assert_eq!(config.base_url, "http://x/v1");
        assert_eq!(config.temperature, 0.0);
        assert_eq!(config.model, DEFAULT_MODEL);
    }
}
