//! Provider-agnostic completion interface with token budgeting and retries.
//!
//! Prompts are rendered from editable template assets (see [`template`]);
//! [`MockProvider`] answers both prompt kinds deterministically so the whole
//! pipeline can run without a network.

mod http;
mod mock;
pub mod template;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use http::{ApiStyle, HttpProvider};
pub use mock::{LexiconEntry, MockProvider};
pub use template::{
    build_discretize_prompt, build_text2sql_prompt, Exemplar, Prompt, PromptTemplate, TemplateKind,
};

/// Fixed characters-per-token ratio used for all budget checks.
pub const CHARS_PER_TOKEN: f64 = 4.0;

/// Conservative token estimate: `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> usize {
    (text.chars().count() as f64 / CHARS_PER_TOKEN).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub provider_id: String,
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub model_name: String,
    pub max_input_tokens: usize,
    #[serde(default)]
    pub temperature: f64,
}

impl ProviderConfig {
    pub fn mock(max_input_tokens: usize) -> Self {
        ProviderConfig {
            provider_id: "mock".into(),
            endpoint: String::new(),
            model_name: "mock".into(),
            max_input_tokens,
            temperature: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_input_tokens == 0 {
            return Err(Error::Config("max_input_tokens must be positive".into()));
        }
        if self.provider_id != "mock" && reqwest::Url::parse(&self.endpoint).is_err() {
            return Err(Error::Config(format!("invalid endpoint {:?}", self.endpoint)));
        }
        Ok(())
    }

    /// Environment variable holding this provider's API key.
    pub fn api_key_var(&self) -> String {
        let id: String = self
            .provider_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
            .collect();
        format!("DIR_{id}_API_KEY")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderFailure {
    /// Worth retrying: connection refused, timeouts, 5xx, rate limits.
    Transient(String),
    Fatal(String),
}

pub trait Provider: Send + Sync {
    fn complete(&self, prompt: &str, config: &ProviderConfig) -> Result<String, ProviderFailure>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_backoff_ms: 250,
        }
    }
}

/// A shareable handle: provider, its configuration and the retry policy.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn Provider>,
    config: ProviderConfig,
    retry: RetryPolicy,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("config", &self.config)
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, config: ProviderConfig) -> Self {
        Gateway {
            provider,
            config,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// Sends one prompt, enforcing the input budget and retrying transient
    /// failures with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let estimate = estimate_tokens(prompt);
        if estimate > self.config.max_input_tokens {
            return Err(Error::Budget {
                estimate,
                limit: self.config.max_input_tokens,
                hint: String::new(),
            });
        }
        let mut attempt = 0;
        loop {
            match self.provider.complete(prompt, &self.config) {
                Ok(text) => return Ok(text),
                Err(ProviderFailure::Fatal(msg)) => return Err(Error::Provider(msg)),
                Err(ProviderFailure::Transient(msg)) => {
                    if attempt >= self.retry.max_retries {
                        return Err(Error::Provider(format!(
                            "{msg} (gave up after {} attempts)",
                            attempt + 1
                        )));
                    }
                    let wait = self.retry.base_backoff_ms.saturating_mul(1 << attempt.min(16));
                    tracing::debug!(attempt, wait, "transient provider failure: {msg}");
                    std::thread::sleep(Duration::from_millis(wait));
                    attempt += 1;
                }
            }
        }
    }
}

/// Replays canned completions in order; the last one repeats once exhausted.
/// Useful for driving error paths that the mock never produces.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    responses: Vec<String>,
    cursor: std::sync::atomic::AtomicUsize,
}

impl ScriptedProvider {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedProvider {
            responses: responses.into_iter().map(Into::into).collect(),
            cursor: Default::default(),
        }
    }

    pub fn calls(&self) -> usize {
        self.cursor.load(std::sync::atomic::Ordering::SeqCst)
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, _prompt: &str, _config: &ProviderConfig) -> Result<String, ProviderFailure> {
        let i = self.cursor.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        self.responses
            .get(i.min(self.responses.len().saturating_sub(1)))
            .cloned()
            .ok_or_else(|| ProviderFailure::Fatal("no scripted responses".into()))
    }
}
