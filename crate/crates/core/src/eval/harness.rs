//! Runs a system over a suite and aggregates the metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::baselines::{lexical_baseline, like_baseline};
use super::corpus::Corpus;
use super::suite::oracle_answer;
use super::{macro_average, recall_precision, QueryIntent};
use crate::enumerate::CapPolicy;
use crate::error::{Error, Result};
use crate::llm::{Gateway, MockProvider, ProviderConfig};
use crate::model::{ColumnName, DialogState};
use crate::pipeline::{Engine, Templates};
use crate::tablegen::Store;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Dir,
    Like,
    Lexical,
}

impl System {
    pub const ALL: [System; 3] = [System::Dir, System::Like, System::Lexical];

    pub fn name(self) -> &'static str {
        match self {
            System::Dir => "dir",
            System::Like => "like",
            System::Lexical => "lexical",
        }
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dir" => Ok(System::Dir),
            "like" => Ok(System::Like),
            "lexical" => Ok(System::Lexical),
            other => Err(Error::Config(format!("unknown system {other:?}, expected dir, like or lexical"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub description: String,
    pub table_id: String,
    pub subsuite: String,
    pub returned: Vec<String>,
    pub expected: usize,
    pub recall: f64,
    pub precision: f64,
    /// The executed SQL, for systems that generate it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sql: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub queries: usize,
    pub macro_recall: Option<f64>,
    pub macro_precision: Option<f64>,
}

impl Slice {
    fn of<'a>(results: impl Iterator<Item = &'a QueryResult> + Clone) -> Self {
        Slice {
            queries: results.clone().count(),
            macro_recall: macro_average(results.clone().map(|r| r.recall)),
            macro_precision: macro_average(results.map(|r| r.precision)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub system: System,
    pub overall: Slice,
    pub by_subsuite: BTreeMap<String, Slice>,
    pub queries: Vec<QueryResult>,
}

impl SystemReport {
    pub fn subsuite(&self, name: &str) -> Option<&Slice> {
        self.by_subsuite.get(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows_per_domain: usize,
    pub seed: u64,
    pub systems: Vec<SystemReport>,
}

impl EvalReport {
    pub fn system(&self, system: System) -> Option<&SystemReport> {
        self.systems.iter().find(|s| s.system == system)
    }

    /// Fixed-width table: one line per system and slice.
    pub fn to_text(&self) -> String {
        let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let mut out = format!("{:<8} {:<20} {:>7} {:>7} {:>9}\n", "system", "slice", "queries", "recall", "precision");
        for s in &self.systems {
            let slices = std::iter::once(("all", &s.overall)).chain(s.by_subsuite.iter().map(|(k, v)| (k.as_str(), v)));
            for (name, slice) in slices {
                let _ = writeln!(
                    out,
                    "{:<8} {:<20} {:>7} {:>7} {:>9}",
                    s.system.name(),
                    name,
                    slice.queries,
                    fmt(slice.macro_recall),
                    fmt(slice.macro_precision)
                );
            }
        }
        out
    }
}

/// An engine backed by the lexicon mock with every corpus table built.
pub fn mock_engine(corpus: &Corpus, store: Store) -> Result<Engine> {
    let gateway = Gateway::new(Arc::new(MockProvider::new(corpus.lexicon.clone())), ProviderConfig::mock(32_000));
    let cap = CapPolicy { mandatory_keys: vec![ColumnName::new("product_type")?], ..CapPolicy::default() };
    let engine = Engine::new(gateway, Templates::default(), cap, store);
    for table in &corpus.tables {
        engine.build_table(table.clone())?;
    }
    Ok(engine)
}

fn run_one(
    system: System,
    intent: &QueryIntent,
    truth: &BTreeSet<String>,
    engine: &Engine,
) -> Result<(BTreeSet<String>, Option<String>, Option<String>)> {
    let table = engine.table(&intent.table_id)?;
    Ok(match system {
        System::Dir => match engine.ask(&intent.table_id, &intent.description, &DialogState::new(&intent.table_id)) {
            Ok(answer) => {
                let pk = table.schema.primary_key.as_str();
                let ids = answer.rows.map(|r| r.column_values(pk).into_iter().collect()).unwrap_or_default();
                (ids, Some(answer.query.raw_sql.clone()), Some(answer.query.report.status.to_string()))
            }
            Err(Error::SemanticParse { .. }) => (BTreeSet::new(), None, Some("unparseable".into())),
            Err(e) => return Err(e),
        },
        System::Like => (engine.with_store(|s| like_baseline(intent, &table.context, s))?, None, None),
        // The ranker is handed the truth size as its cut-off.
        System::Lexical => (lexical_baseline(intent, &table.context, truth.len()), None, None),
    })
}

/// Scores `system` on every query against the oracle.
pub fn evaluate(system: System, suite: &[QueryIntent], engine: &Engine, corpus: &Corpus) -> Result<SystemReport> {
    let mut queries = Vec::with_capacity(suite.len());
    for intent in suite {
        let truth = oracle_answer(intent, corpus);
        let (returned, sql, status) = run_one(system, intent, &truth, engine)?;
        let (recall, precision) = recall_precision(&returned, &truth);
        queries.push(QueryResult {
            description: intent.description.clone(),
            table_id: intent.table_id.clone(),
            subsuite: intent.subsuite.clone(),
            returned: returned.into_iter().collect(),
            expected: truth.len(),
            recall,
            precision,
            sql,
            status,
        });
    }
    let subsuites: BTreeSet<&str> = queries.iter().map(|q| q.subsuite.as_str()).collect();
    let by_subsuite = subsuites
        .into_iter()
        .map(|name| (name.to_string(), Slice::of(queries.iter().filter(|q| q.subsuite == name))))
        .collect();
    Ok(SystemReport { system, overall: Slice::of(queries.iter()), by_subsuite, queries })
}
