//! Chat-completions HTTP backend (`POST {base}/chat/completions`).

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatParams, ChatProvider, Message, ProviderError};

/// Environment variable that overrides the configured base URL.
pub const BASE_URL_ENV: &str = "VHSIM_BASE_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpChatConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for HttpChatConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "meta-llama/Llama-3.1-8B-Instruct".into(),
            api_key_env: "VHSIM_API_KEY".into(),
            timeout_secs: 120,
        }
    }
}

impl HttpChatConfig {
    pub fn effective_base_url(&self) -> String {
        std::env::var(BASE_URL_ENV).unwrap_or_else(|_| self.base_url.clone())
    }
}

pub struct HttpChatProvider {
    config: HttpChatConfig,
    base_url: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
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
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpChatProvider {
    pub fn new(config: HttpChatConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let base_url = config.effective_base_url();
        Self { config, base_url, agent }
    }
}

impl ChatProvider for HttpChatProvider {
    fn complete(&self, messages: &[Message], params: &ChatParams) -> Result<String, ProviderError> {
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(ChatRequest {
                model: &self.config.model,
                messages,
                temperature: params.temperature,
                max_tokens: params.max_tokens,
                seed: params.seed,
            })
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::Status { status, body });
        }
        let body: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Malformed(e.to_string()))?;
        body.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Malformed("no choices[0].message.content".into()))
    }

    fn id(&self) -> String {
        format!("http:{}", self.config.model)
    }
}
