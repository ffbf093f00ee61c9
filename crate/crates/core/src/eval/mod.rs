//! Retrieval evaluation: a synthetic corpus with known attributes, a query
//! suite with constraint-level ground truth, two baselines and per-query
//! recall and precision.

pub mod baselines;
pub mod corpus;
pub mod harness;
pub mod suite;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{ColumnName, Literal, Operator};

pub use corpus::{generate_corpus, AttributeSpec, Corpus, CorpusSpec, DomainSpec, GroundTruth};
pub use harness::{evaluate, mock_engine, EvalReport, QueryResult, System, SystemReport};
pub use suite::{generate_suite, oracle_answer, read_suite, write_suite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntentKind {
    Direct,
    Exploratory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentConstraint {
    pub column: ColumnName,
    pub op: Operator,
    pub value: Literal,
}

/// One evaluation question and the constraints it stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryIntent {
    pub description: String,
    pub constraints: Vec<IntentConstraint>,
    pub kind: IntentKind,
    pub table_id: String,
    /// Which slice of the suite the query belongs to, e.g. `enum_direct`.
    #[serde(default)]
    pub subsuite: String,
}

pub const ENUM_DIRECT: &str = "enum_direct";
pub const NEGATION_PARAPHRASE: &str = "negation_paraphrase";
pub const EXPLORATORY: &str = "exploratory";

/// Recall and precision of one returned set.
///
/// Empty sets: an empty truth scores recall 1 (nothing to miss), and
/// precision 1 only if nothing was returned. An empty answer to a non-empty
/// truth scores 0 on both.
pub fn recall_precision(returned: &BTreeSet<String>, truth: &BTreeSet<String>) -> (f64, f64) {
    let hit = returned.intersection(truth).count() as f64;
    let recall = if truth.is_empty() { 1.0 } else { hit / truth.len() as f64 };
    let precision = match (returned.is_empty(), truth.is_empty()) {
        (true, true) => 1.0,
        (true, false) => 0.0,
        (false, _) => hit / returned.len() as f64,
    };
    (recall, precision)
}

/// Mean of `values`, summed in sorted order so the result does not depend
/// on query order. `None` for no values.
pub fn macro_average(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}
