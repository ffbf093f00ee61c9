//! Lexical table routing with a stickiness margin.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EnumerationCatalog;
use crate::tablegen::JoinedSchema;

pub const DEFAULT_SWITCH_MARGIN: f64 = 2.0;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "any", "are", "at", "be", "by", "can", "do", "for", "have", "i", "in", "is", "it", "me", "my",
    "need", "no", "non", "not", "of", "on", "or", "over", "please", "show", "some", "than", "that", "the", "this",
    "to", "under", "want", "what", "which", "with", "you",
];

/// Lowercase alphanumeric tokens with a naive plural strip.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(t))
        .map(singular)
        .collect()
}

fn singular(word: &str) -> String {
    if word.len() > 4 && word.ends_with("ies") {
        format!("{}y", &word[..word.len() - 3])
    } else if word.len() > 3
        && (word.ends_with("ches") || word.ends_with("shes") || word.ends_with("xes") || word.ends_with("sses"))
    {
        word[..word.len() - 2].to_string()
    } else if word.len() > 3 && word.ends_with('s') && !word.ends_with("ss") {
        word[..word.len() - 1].to_string()
    } else {
        word.to_string()
    }
}

/// Vocabulary a question is matched against for one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteTarget {
    pub table_id: String,
    pub vocabulary: BTreeSet<String>,
}

impl RouteTarget {
    pub fn new(domain_id: &str, schema: &JoinedSchema, catalog: &EnumerationCatalog) -> Self {
        let mut text = vec![schema.table_id.replace('_', " "), domain_id.replace('_', " ")];
        text.extend(schema.columns.iter().map(|c| c.name.as_str().replace('_', " ")));
        for values in catalog.entries.values() {
            text.extend(values.iter().cloned());
        }
        RouteTarget {
            table_id: schema.table_id.clone(),
            vocabulary: tokens(&text.join(" ")),
        }
    }

    pub fn score(&self, question: &BTreeSet<String>) -> usize {
        question.intersection(&self.vocabulary).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub table_id: String,
    pub scores: BTreeMap<String, usize>,
    pub switched: bool,
}

/// Picks the table whose vocabulary overlaps the question most; ties go to
/// the smallest table id. With a `current` table the route only moves when
/// another table beats it by more than `margin` times its score.
pub fn route_table(
    question: &str,
    targets: &[RouteTarget],
    current: Option<&str>,
    margin: f64,
) -> Result<RoutingDecision> {
    if targets.is_empty() {
        return Err(Error::Routing("no tables are registered".into()));
    }
    let q = tokens(question);
    let scores: BTreeMap<String, usize> = targets.iter().map(|t| (t.table_id.clone(), t.score(&q))).collect();
    let (best, best_score) = scores
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(id, s)| (id.clone(), *s))
        .expect("targets are non-empty");

    if let Some(cur) = current.filter(|c| scores.contains_key(*c)) {
        let cur_score = scores[cur] as f64;
        let switch = best != cur && best_score > 0 && best_score as f64 > margin * cur_score;
        let table_id = if switch { best } else { cur.to_string() };
        return Ok(RoutingDecision { table_id, scores, switched: switch });
    }
    if best_score == 0 {
        let names: Vec<&str> = scores.keys().map(String::as_str).collect();
        return Err(Error::Routing(format!(
            "nothing in the question matches a table; available tables: {}",
            names.join(", ")
        )));
    }
    Ok(RoutingDecision { table_id: best, scores, switched: current.is_some() })
}
