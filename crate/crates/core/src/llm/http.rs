use std::time::Duration;

use serde_json::{json, Value};

use super::{Provider, ProviderConfig, ProviderFailure};

/// Request shape spoken by the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApiStyle {
    /// `{model, messages: [{role, content}], temperature}`, answer in
    /// `choices[0].message.content`.
    Chat,
    /// `{model, prompt, temperature}`, answer in `choices[0].text` or `completion`.
    Completion,
}

/// Blocking HTTP adapter for OpenAI-style endpoints.
///
/// Must not be called from inside an async executor thread; the service
/// drives it from `spawn_blocking`.
#[derive(Debug)]
pub struct HttpProvider {
    style: ApiStyle,
    timeout: Duration,
}

impl HttpProvider {
    pub fn new(style: ApiStyle) -> Self {
        HttpProvider {
            style,
            timeout: Duration::from_secs(60),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn body(&self, prompt: &str, config: &ProviderConfig) -> Value {
        match self.style {
            ApiStyle::Chat => json!({
                "model": config.model_name,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": config.temperature,
            }),
            ApiStyle::Completion => json!({
                "model": config.model_name,
                "prompt": prompt,
                "temperature": config.temperature,
            }),
        }
    }

    fn extract(&self, body: &Value) -> Option<String> {
        let choice = body.get("choices").and_then(|c| c.get(0));
        let text = match self.style {
            ApiStyle::Chat => choice
                .and_then(|c| c.get("message"))
                .and_then(|m| m.get("content")),
            ApiStyle::Completion => choice
                .and_then(|c| c.get("text"))
                .or_else(|| body.get("completion")),
        };
        text.and_then(Value::as_str).map(str::to_string)
    }
}

impl Provider for HttpProvider {
    fn complete(&self, prompt: &str, config: &ProviderConfig) -> Result<String, ProviderFailure> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| ProviderFailure::Fatal(e.to_string()))?;
        let mut request = client.post(&config.endpoint).json(&self.body(prompt, config));
        if let Ok(key) = std::env::var(config.api_key_var()) {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| ProviderFailure::Transient(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(ProviderFailure::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(ProviderFailure::Fatal(format!("HTTP {status}")));
        }
        let body: Value = response
            .json()
            .map_err(|e| ProviderFailure::Fatal(format!("malformed response body: {e}")))?;
        self.extract(&body)
            .ok_or_else(|| ProviderFailure::Fatal("response has no completion text".into()))
    }
}
