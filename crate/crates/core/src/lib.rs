//! Discrete information retrieval over product tables.
//!
//! Free-text columns are discretized by a language model into key-value
//! tuples, the tuples are enumerated into a catalog of categorical columns,
//! and the columns are materialized next to the original table in SQLite.
//! Natural-language questions are then compiled to a small SQL subset,
//! validated against the catalog (with literal repair) and executed.
//!
//! The usual entry point is [`pipeline::Engine`]; [`agent`] adds multi-turn
//! dialog on top and [`eval`] measures retrieval quality on a synthetic corpus.

pub mod agent;
pub mod config;
pub mod discretize;
pub mod enumerate;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod llm;
pub mod model;
pub mod pipeline;
pub mod reference;
pub mod sql;
pub mod tablegen;
pub mod text2sql;

#[cfg(test)]
mod testkit;

pub use config::Config;
pub use error::{Error, Result};
pub use pipeline::{Answer, Engine, TableArtifacts, Templates};
