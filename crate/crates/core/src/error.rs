use thiserror::Error;

use crate::sql::SqlError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid column name {raw:?}: {reason}")]
    Name { raw: String, reason: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("integrity error: offending keys {keys:?}")]
    Integrity { keys: Vec<String> },

    #[error("prompt needs ~{estimate} tokens but the limit is {limit}{hint}")]
    Budget {
        estimate: usize,
        limit: usize,
        hint: String,
    },

    #[error("provider error: {0}")]
    Provider(String),

    #[error("could not parse extraction: {0}")]
    ExtractionParse(String),

    #[error("grounding keys missing from catalog: {missing:?}")]
    Grounding { missing: Vec<String> },

    #[error("store allows at most {limit} columns per table, {requested} requested")]
    StoreLimit { limit: usize, requested: usize },

    #[error(transparent)]
    Sql(#[from] SqlError),

    #[error("no parseable SQL in completion ({reason}): {completion:?}")]
    SemanticParse { completion: String, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("could not route question: {0}")]
    Routing(String),

    #[error("agent exceeded {limit} tool calls for one utterance")]
    AgentBudget {
        limit: usize,
        trace: Vec<crate::agent::ReactStep>,
    },

    #[error("unknown table {0:?}")]
    UnknownTable(String),

    #[error("unknown session {0:?}")]
    UnknownSession(String),

    #[error("utterance is empty")]
    EmptyUtterance,

    #[error("invalid corpus spec: {0}")]
    Spec(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Store(#[from] rusqlite::Error),
}

impl Error {
    /// Stable machine-readable kind, used in HTTP error bodies and exit-code mapping.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Name { .. } => "name_error",
            Error::Schema(_) => "schema_error",
            Error::Integrity { .. } => "integrity_error",
            Error::Budget { .. } => "budget_error",
            Error::Provider(_) => "provider_error",
            Error::ExtractionParse(_) => "extraction_parse_error",
            Error::Grounding { .. } => "grounding_error",
            Error::StoreLimit { .. } => "store_limit_error",
            Error::Sql(_) => "sql_parse_error",
            Error::SemanticParse { .. } => "semantic_parse_error",
            Error::Contract(_) => "contract_error",
            Error::Routing(_) => "routing_error",
            Error::AgentBudget { .. } => "agent_budget_error",
            Error::UnknownTable(_) => "unknown_table",
            Error::UnknownSession(_) => "unknown_session",
            Error::EmptyUtterance => "empty_utterance",
            Error::Spec(_) => "spec_error",
            Error::Config(_) => "config_error",
            Error::Io(_) => "io_error",
            Error::Csv(_) => "csv_error",
            Error::Json(_) => "json_error",
            Error::Store(_) => "store_error",
        }
    }

    /// True when the caller (not the system) is at fault.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::Provider(_) | Error::Io(_) | Error::Store(_) | Error::AgentBudget { .. }
        )
    }
}
