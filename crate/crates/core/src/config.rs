//! TOML configuration shared by the command line and the HTTP service.
//!
//! ```toml
//! workdir = "dir-work"
//! mandatory_keys = ["product_type"]
//!
//! [provider]
//! provider_id = "mock"
//! max_input_tokens = 8000
//! lexicon = "lexicon.json"
//! ```
//!
//! Relative paths are taken as given, i.e. against the working directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::enumerate::CapPolicy;
use crate::error::{Error, Result};
use crate::ingest::IngestConfig;
use crate::llm::{ApiStyle, Gateway, HttpProvider, MockProvider, PromptTemplate, ProviderConfig, RetryPolicy};
use crate::model::ColumnName;
use crate::pipeline::{Engine, Templates};
use crate::tablegen::Store;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_workdir")]
    pub workdir: PathBuf,
    /// Defaults to `<workdir>/store.sqlite`.
    #[serde(default)]
    pub store_path: Option<PathBuf>,
    /// Defaults to `<workdir>/sessions`.
    #[serde(default)]
    pub session_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Keys every row must yield; kept through column capping.
    #[serde(default)]
    pub mandatory_keys: Vec<String>,
    #[serde(default)]
    pub provider: ProviderSection,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub templates: TemplateSection,
    #[serde(default)]
    pub cap: CapPolicy,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub service: ServiceSection,
}

fn default_workdir() -> PathBuf {
    PathBuf::from("dir-work")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    #[serde(default = "default_provider")]
    pub provider_id: String,
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub model_name: String,
    #[serde(default = "default_max_input_tokens")]
    pub max_input_tokens: usize,
    #[serde(default)]
    pub temperature: f64,
    /// `chat` or `completion`; ignored by the mock.
    #[serde(default = "default_api_style")]
    pub api_style: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Phrase lexicon for the mock provider (JSON list of phrase/key/value).
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
}

fn default_provider() -> String {
    "mock".into()
}
fn default_max_input_tokens() -> usize {
    8000
}
fn default_api_style() -> String {
    "chat".into()
}
fn default_timeout() -> u64 {
    60
}

impl Default for ProviderSection {
    fn default() -> Self {
        ProviderSection {
            provider_id: default_provider(),
            endpoint: String::new(),
            model_name: String::new(),
            max_input_tokens: default_max_input_tokens(),
            temperature: 0.0,
            api_style: default_api_style(),
            timeout_secs: default_timeout(),
            lexicon: None,
        }
    }
}

impl ProviderSection {
    pub fn provider_config(&self) -> ProviderConfig {
        ProviderConfig {
            provider_id: self.provider_id.clone(),
            endpoint: self.endpoint.clone(),
            model_name: self.model_name.clone(),
            max_input_tokens: self.max_input_tokens,
            temperature: self.temperature,
        }
    }

    fn api_style(&self) -> Result<ApiStyle> {
        match self.api_style.as_str() {
            "chat" => Ok(ApiStyle::Chat),
            "completion" => Ok(ApiStyle::Completion),
            other => Err(Error::Config(format!("api_style must be chat or completion, got {other:?}"))),
        }
    }
}

/// Paths to replacement prompt templates; bundled ones are used otherwise.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSection {
    #[serde(default)]
    pub discretize: Option<PathBuf>,
    #[serde(default)]
    pub text2sql: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    #[serde(default = "default_pk")]
    pub primary_key: String,
    #[serde(default)]
    pub text_columns: Option<Vec<String>>,
    #[serde(default = "default_threshold")]
    pub text_detection_threshold: f64,
    #[serde(default = "default_min_len")]
    pub min_avg_text_length: usize,
}

fn default_pk() -> String {
    "id".into()
}
fn default_threshold() -> f64 {
    0.5
}
fn default_min_len() -> usize {
    40
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            primary_key: default_pk(),
            text_columns: None,
            text_detection_threshold: default_threshold(),
            min_avg_text_length: default_min_len(),
        }
    }
}

impl IngestSection {
    pub fn ingest_config(&self) -> Result<IngestConfig> {
        let mut cfg = IngestConfig::new(ColumnName::new(&self.primary_key)?);
        cfg.declared_text_columns = self
            .text_columns
            .as_ref()
            .map(|cols| cols.iter().map(|c| ColumnName::new(c)).collect::<Result<Vec<_>>>())
            .transpose()?;
        cfg.text_detection_threshold = self.text_detection_threshold;
        cfg.min_avg_text_length = self.min_avg_text_length;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSection {
    #[serde(default = "default_bind")]
    pub bind: String,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

impl Default for ServiceSection {
    fn default() -> Self {
        ServiceSection { bind: default_bind() }
    }
}

impl Default for Config {
    fn default() -> Self {
        Config {
            workdir: default_workdir(),
            store_path: None,
            session_dir: None,
            seed: 0,
            mandatory_keys: Vec::new(),
            provider: ProviderSection::default(),
            retry: RetryPolicy::default(),
            templates: TemplateSection::default(),
            cap: CapPolicy::default(),
            ingest: IngestSection::default(),
            agent: AgentConfig::default(),
            service: ServiceSection::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(source: &str) -> Result<Self> {
        let config: Config = toml::from_str(source).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&source)
    }

    pub fn validate(&self) -> Result<()> {
        self.provider.provider_config().validate()?;
        self.provider.api_style()?;
        self.cap.validate()?;
        self.ingest.ingest_config()?;
        self.mandatory()?;
        if self.agent.max_iterations == 0 {
            return Err(Error::Config("agent.max_iterations must be at least 1".into()));
        }
        // also rejects NaN
        if self.agent.switch_margin.is_nan() || self.agent.switch_margin < 1.0 {
            return Err(Error::Config("agent.switch_margin must be at least 1".into()));
        }
        if self.provider.provider_id == "mock" && self.provider.lexicon.is_none() {
            tracing::debug!("mock provider without a lexicon extracts nothing");
        }
        Ok(())
    }

    pub fn mandatory(&self) -> Result<Vec<ColumnName>> {
        self.mandatory_keys.iter().map(|k| ColumnName::new(k)).collect()
    }

    pub fn store_path(&self) -> PathBuf {
        self.store_path.clone().unwrap_or_else(|| self.workdir.join("store.sqlite"))
    }

    pub fn session_dir(&self) -> PathBuf {
        self.session_dir.clone().unwrap_or_else(|| self.workdir.join("sessions"))
    }

    /// Cap policy with the top-level mandatory keys folded in.
    pub fn cap_policy(&self) -> Result<CapPolicy> {
        let mut cap = self.cap.clone();
        for key in self.mandatory()? {
            if !cap.mandatory_keys.contains(&key) {
                cap.mandatory_keys.push(key);
            }
        }
        cap.validate()?;
        Ok(cap)
    }

    pub fn gateway(&self) -> Result<Gateway> {
        let config = self.provider.provider_config();
        let gateway = if config.provider_id == "mock" {
            let lexicon = match &self.provider.lexicon {
                Some(path) => MockProvider::load_lexicon(path)?,
                None => Vec::new(),
            };
            Gateway::new(Arc::new(MockProvider::new(lexicon)), config)
        } else {
            let http = HttpProvider::new(self.provider.api_style()?)
                .with_timeout(Duration::from_secs(self.provider.timeout_secs));
            Gateway::new(Arc::new(http), config)
        };
        Ok(gateway.with_retry(self.retry))
    }

    pub fn templates(&self) -> Result<Templates> {
        let mut templates = Templates::default();
        if let Some(p) = &self.templates.discretize {
            templates.discretize = PromptTemplate::load(p)?;
        }
        if let Some(p) = &self.templates.text2sql {
            templates.text2sql = PromptTemplate::load(p)?;
        }
        Ok(templates)
    }

    /// Opens the store and loads every table already built in the workdir.
    pub fn engine(&self) -> Result<Engine> {
        let store = Store::open(self.store_path())?;
        let engine = Engine::new(self.gateway()?, self.templates()?, self.cap_policy()?, store);
        engine.load_artifacts(&self.workdir)?;
        Ok(engine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.store_path(), PathBuf::from("dir-work/store.sqlite"));

        let c = Config::from_toml_str(
            r#"
workdir = "w"
mandatory_keys = ["product_type"]
[provider]
max_input_tokens = 100
[cap]
max_columns = 12
[agent]
max_iterations = 2
[ingest]
primary_key = "product_id"
"#,
        )
        .unwrap();
        assert_eq!(c.session_dir(), PathBuf::from("w/sessions"));
        assert_eq!(c.cap_policy().unwrap().max_columns, 12);
        assert_eq!(c.cap_policy().unwrap().mandatory_keys, vec![ColumnName::new("product_type").unwrap()]);
        assert_eq!(c.agent.max_iterations, 2);
        assert_eq!(c.gateway().unwrap().config().max_input_tokens, 100);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "[provider]\nmax_input_tokens = 0",
            "[provider]\nprovider_id = \"openai\"\nendpoint = \"not a url\"",
            "[provider]\napi_style = \"grpc\"",
            "[cap]\nmin_row_support = 2.0",
            "[agent]\nmax_iterations = 0",
            "mandatory_keys = [\"!!!\"]",
            "unknown = 1",
        ] {
            assert!(matches!(Config::from_toml_str(bad), Err(Error::Config(_)) | Err(Error::Name { .. })), "{bad}");
        }
    }
}
