//! The Discretize step: per-row extraction of key-value tuples from the
//! collected text fields.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::llm::{build_discretize_prompt, Gateway, PromptTemplate};
use crate::model::{ColumnName, ContextTable, ExtractionSet, KeyValueTuple, RowExtraction};

/// Suffix given to an inferred key that collides with a context column.
pub const COLLISION_SUFFIX: &str = "_inferred";

const MAX_WORKERS: usize = 8;

/// Tuples parsed from one completion plus the entries that had to be skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedExtraction {
    pub tuples: Vec<KeyValueTuple>,
    pub warnings: Vec<String>,
}

/// Parses a completion holding an array of `[key, value]` pairs.
///
/// The first JSON array in the text is used; a completion written as Python
/// style tuples (`('key', 'value')`) is accepted as a fallback. Malformed
/// entries are skipped with a warning. Repeated keys keep the last value.
pub fn parse_extraction(completion: &str) -> Result<ParsedExtraction> {
    let raw = match first_json_array(completion) {
        Some(items) => items
            .into_iter()
            .map(|item| match item {
                serde_json::Value::Array(pair) if pair.len() == 2 => {
                    match (scalar(&pair[0]), scalar(&pair[1])) {
                        (Some(k), Some(v)) => Ok((k, v)),
                        _ => Err(format!("entry {} is not a pair of scalars", serde_json::Value::Array(pair))),
                    }
                }
                other => Err(format!("entry {other} is not a [key, value] pair")),
            })
            .collect::<Vec<_>>(),
        None => {
            let pairs = tuple_pairs(completion);
            if pairs.is_empty() {
                return Err(Error::ExtractionParse(format!(
                    "no array of pairs in completion {:?}",
                    truncate(completion, 80)
                )));
            }
            pairs.into_iter().map(Ok).collect()
        }
    };

    let mut parsed = ParsedExtraction::default();
    for entry in raw {
        let (key, value) = match entry {
            Ok(pair) => pair,
            Err(w) => {
                parsed.warnings.push(w);
                continue;
            }
        };
        let key = match ColumnName::new(&key) {
            Ok(k) => k,
            Err(e) => {
                parsed.warnings.push(e.to_string());
                continue;
            }
        };
        match KeyValueTuple::new(key, &value) {
            Ok((tuple, truncated)) => {
                if truncated {
                    parsed.warnings.push(format!("value for {} truncated", tuple.key));
                }
                parsed.tuples.retain(|t| t.key != tuple.key);
                parsed.tuples.push(tuple);
            }
            Err(e) => parsed.warnings.push(e.to_string()),
        }
    }
    Ok(parsed)
}

fn scalar(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn first_json_array(text: &str) -> Option<Vec<serde_json::Value>> {
    text.match_indices('[').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<serde_json::Value>();
        match stream.next() {
            Some(Ok(serde_json::Value::Array(items))) => Some(items),
            _ => None,
        }
    })
}

fn tuple_pairs(text: &str) -> Vec<(String, String)> {
    static TUPLE: OnceLock<Regex> = OnceLock::new();
    let re = TUPLE.get_or_init(|| {
        Regex::new(r#"\(\s*['"]([^'"]*)['"]\s*,\s*['"]([^'"]*)['"]\s*\)"#).expect("valid tuple pattern")
    });
    re.captures_iter(text)
        .map(|c| (c[1].to_string(), c[2].to_string()))
        .collect()
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

fn missing_keys(tuples: &[KeyValueTuple], mandatory: &[ColumnName]) -> Vec<ColumnName> {
    mandatory
        .iter()
        .filter(|k| !tuples.iter().any(|t| &t.key == *k))
        .cloned()
        .collect()
}

/// Extracts tuples from one row's text. When a mandatory key is missing, or
/// the completion cannot be parsed, the prompt is sent once more with a
/// reminder. Keys still missing after that are recorded as unextracted.
pub fn discretize_row(
    row_text: &str,
    mandatory_keys: &[ColumnName],
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Result<RowExtraction> {
    if row_text.trim().is_empty() {
        return Err(Error::Contract("row text is empty".into()));
    }
    let prompt = build_discretize_prompt(row_text, mandatory_keys, template)?;
    let first = parse_extraction(&gateway.complete(&prompt.text)?);
    let needs_retry = match &first {
        Ok(p) => !missing_keys(&p.tuples, mandatory_keys).is_empty(),
        Err(_) => true,
    };
    let parsed = if needs_retry {
        let reminder = match &first {
            Ok(p) => {
                let keys: Vec<String> = missing_keys(&p.tuples, mandatory_keys)
                    .iter()
                    .map(ColumnName::to_string)
                    .collect();
                format!("Your answer must include the keys: {}.", keys.join(", "))
            }
            Err(_) => "Your answer must be a JSON array of [key, value] pairs.".to_string(),
        };
        let retry = format!("{}\n{reminder}\n", prompt.text.trim_end());
        match (parse_extraction(&gateway.complete(&retry)?), first) {
            (Ok(second), Ok(first)) => {
                if missing_keys(&second.tuples, mandatory_keys).len() <= missing_keys(&first.tuples, mandatory_keys).len() {
                    second
                } else {
                    first
                }
            }
            (Ok(second), Err(_)) => second,
            (Err(_), Ok(first)) => first,
            (Err(e), Err(_)) => return Err(e),
        }
    } else {
        first?
    };
    Ok(RowExtraction {
        unextracted: missing_keys(&parsed.tuples, mandatory_keys),
        tuples: parsed.tuples,
        failure: None,
        warnings: parsed.warnings,
    })
}

/// Runs [`discretize_row`] over every row. Text columns are joined with
/// newlines in the given order. A failing row is recorded with a failure
/// reason and never aborts the table.
pub fn discretize_table(
    table: &ContextTable,
    text_cols: &[ColumnName],
    mandatory_keys: &[ColumnName],
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Result<ExtractionSet> {
    let mut indices = Vec::with_capacity(text_cols.len());
    for col in text_cols {
        if !table.text_columns.contains(col) {
            return Err(Error::Contract(format!("{col} is not a collected text column of {}", table.table_id)));
        }
        indices.push(table.column_index(col).ok_or_else(|| Error::Schema(format!("no column {col}")))?);
    }
    let pk = table.pk_index();

    let work: Vec<(String, String)> = table
        .rows
        .iter()
        .map(|row| {
            let text = indices
                .iter()
                .filter_map(|&i| row[i].as_deref())
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join("\n");
            (row[pk].clone().unwrap_or_default(), text)
        })
        .collect();

    let run = |text: &str| -> RowExtraction {
        if text.is_empty() {
            return RowExtraction {
                failure: Some("no text to extract from".into()),
                unextracted: mandatory_keys.to_vec(),
                ..Default::default()
            };
        }
        discretize_row(text, mandatory_keys, gateway, template).unwrap_or_else(|e| RowExtraction {
            failure: Some(e.to_string()),
            unextracted: mandatory_keys.to_vec(),
            ..Default::default()
        })
    };

    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .clamp(1, MAX_WORKERS)
        .min(work.len().max(1));
    let chunk = work.len().div_ceil(workers).max(1);
    let results: Vec<(String, RowExtraction)> = std::thread::scope(|s| {
        let handles: Vec<_> = work
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|(k, t)| (k.clone(), run(t))).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("discretize worker panicked"))
            .collect()
    });

    let mut set = ExtractionSet {
        table_id: table.table_id.clone(),
        per_row: BTreeMap::new(),
        renamed: BTreeMap::new(),
    };
    for (key, mut extraction) in results {
        if let Some(reason) = &extraction.failure {
            tracing::warn!(table_id = %table.table_id, pk = %key, reason = %reason, "row extraction failed");
        }
        for tuple in &mut extraction.tuples {
            if table.column(&tuple.key).is_some() {
                let renamed = ColumnName::new(&format!("{}{COLLISION_SUFFIX}", tuple.key))?;
                set.renamed.insert(tuple.key.clone(), renamed.clone());
                tuple.key = renamed;
            }
        }
        set.per_row.insert(key, extraction);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{collect_text_fields, load_context_table, IngestConfig, SourceFormat};
    use crate::llm::{LexiconEntry, MockProvider, ProviderConfig, ScriptedProvider};
    use std::sync::Arc;

    fn col(s: &str) -> ColumnName {
        ColumnName::new(s).unwrap()
    }

    fn pairs(p: &ParsedExtraction) -> Vec<(String, String)> {
        p.tuples.iter().map(|t| (t.key.to_string(), t.value.clone())).collect()
    }

    fn lexicon() -> Vec<LexiconEntry> {
        [
            ("backpack", "product_type", "backpack"),
            ("15 liter", "product_size", "15 liter"),
            ("22 liter", "product_size", "22 liter"),
            ("strap", "handle_type", "strap"),
            ("black", "color", "black"),
            ("leather", "material", "leather"),
            ("priced", "price", "cheap"),
        ]
        .into_iter()
        .map(|(p, k, v)| LexiconEntry { phrase: p.into(), key: k.into(), value: v.into() })
        .collect()
    }

    fn gateway(lexicon: Vec<LexiconEntry>) -> Gateway {
        Gateway::new(Arc::new(MockProvider::new(lexicon)), ProviderConfig::mock(4096))
    }

    const FIXTURE: &str = "product_id,title,price,description\n\
        p1,Trail Pack,120,\"A rugged 15 liter backpack with a padded shoulder strap for day hikes and commuting.\"\n\
        p2,City Pack,310,\"A sleek black 22 liter backpack in leather, with a strap and a laptop sleeve inside.\"\n\
        p3,Weekender,95,\"A soft everyday bag, priced for students, with room for books and a water bottle.\"\n";

    fn fixture() -> ContextTable {
        let cfg = IngestConfig::new(col("product_id"));
        let t = load_context_table(FIXTURE.as_bytes(), SourceFormat::Csv, "backpacks", "backpacks", &cfg).unwrap();
        let text = collect_text_fields(&t, &cfg).unwrap();
        t.with_text_columns(text)
    }

    #[test]
    fn parses_pairs() {
        let p = parse_extraction(r#"[["product_size","15 liter"],["handle_type","strap"]]"#).unwrap();
        assert_eq!(
            pairs(&p),
            vec![("product_size".into(), "15 liter".into()), ("handle_type".into(), "strap".into())]
        );
    }

    #[test]
    fn empty_array_is_empty() {
        assert!(parse_extraction("[]").unwrap().tuples.is_empty());
    }

    #[test]
    fn last_write_wins() {
        let p = parse_extraction(r#"[["color","Black"],["color","navy"]]"#).unwrap();
        assert_eq!(pairs(&p), vec![("color".into(), "navy".into())]);
    }

    #[test]
    fn malformed_entries_are_skipped() {
        let p = parse_extraction(r#"Sure: [["color","red"], ["lonely"], [1, 2], ["", "x"], ["size", " "], {"a": 1}]"#)
            .unwrap();
        assert_eq!(pairs(&p), vec![("color".into(), "red".into()), ("1".into(), "2".into())]);
        assert_eq!(p.warnings.len(), 4);
    }

    #[test]
    fn tuple_syntax_is_accepted() {
        let p = parse_extraction("('product_size', '15 liter'), ('handle_type', 'strap')").unwrap();
        assert_eq!(p.tuples.len(), 2);
    }

    #[test]
    fn no_array_is_an_error() {
        assert!(matches!(parse_extraction("I cannot help"), Err(Error::ExtractionParse(_))));
    }

    #[test]
    fn row_extraction_with_lexicon() {
        let t = PromptTemplate::default_discretize();
        let row = discretize_row("A 15 liter backpack with a strap.", &[col("product_type")], &gateway(lexicon()), &t)
            .unwrap();
        assert!(row.tuples.contains(&KeyValueTuple { key: col("product_size"), value: "15 liter".into() }));
        assert!(row.unextracted.is_empty());
    }

    #[test]
    fn empty_text_is_refused() {
        let t = PromptTemplate::default_discretize();
        assert!(discretize_row("  ", &[], &gateway(lexicon()), &t).is_err());
    }

    #[test]
    fn missing_mandatory_key_is_retried_then_flagged() {
        let provider = Arc::new(ScriptedProvider::new([r#"[["color","red"]]"#]));
        let gw = Gateway::new(provider.clone(), ProviderConfig::mock(4096));
        let row = discretize_row("a red thing", &[col("product_type")], &gw, &PromptTemplate::default_discretize())
            .unwrap();
        assert_eq!(provider.calls(), 2);
        assert_eq!(row.unextracted, vec![col("product_type")]);

        let empty = discretize_row("a red thing", &[col("product_type")], &gateway(vec![]), &PromptTemplate::default_discretize())
            .unwrap();
        assert!(empty.tuples.is_empty());
        assert_eq!(empty.unextracted, vec![col("product_type")]);
    }

    #[test]
    fn retry_recovers_from_garbage() {
        let provider = Arc::new(ScriptedProvider::new(["nope", r#"[["product_type","backpack"]]"#]));
        let gw = Gateway::new(provider, ProviderConfig::mock(4096));
        let row = discretize_row("x", &[col("product_type")], &gw, &PromptTemplate::default_discretize()).unwrap();
        assert_eq!(row.get(&col("product_type")), Some("backpack"));
    }

    #[test]
    fn table_covers_every_row_and_renames_collisions() {
        let t = fixture();
        let set = discretize_table(&t, &t.text_columns.clone(), &[col("product_type")], &gateway(lexicon()), &PromptTemplate::default_discretize())
            .unwrap();
        assert_eq!(set.per_row.len(), 3);
        assert_eq!(set.per_row["p1"].get(&col("product_size")), Some("15 liter"));
        // "priced" maps to key `price`, which is a context column.
        assert_eq!(set.per_row["p3"].get(&col("price_inferred")), Some("cheap"));
        assert_eq!(set.renamed.get(&col("price")), Some(&col("price_inferred")));
        assert_eq!(set.per_row["p3"].unextracted, vec![col("product_type")]);
    }

    #[test]
    fn row_order_does_not_matter() {
        let t = fixture();
        let mut reversed = t.clone();
        reversed.rows.reverse();
        let g = gateway(lexicon());
        let tpl = PromptTemplate::default_discretize();
        let a = discretize_table(&t, &t.text_columns, &[], &g, &tpl).unwrap();
        let b = discretize_table(&reversed, &t.text_columns, &[], &g, &tpl).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_table_and_failed_rows() {
        let mut t = fixture();
        t.rows.clear();
        let set = discretize_table(&t, &t.text_columns, &[], &gateway(lexicon()), &PromptTemplate::default_discretize()).unwrap();
        assert!(set.per_row.is_empty());

        let t = fixture();
        let gw = Gateway::new(Arc::new(ScriptedProvider::new(["not json"])), ProviderConfig::mock(4096));
        let set = discretize_table(&t, &t.text_columns, &[], &gw, &PromptTemplate::default_discretize()).unwrap();
        assert_eq!(set.failed_rows().count(), 3);
    }

    #[test]
    fn undeclared_text_column_is_refused() {
        let t = fixture();
        assert!(discretize_table(&t, &[col("title")], &[], &gateway(lexicon()), &PromptTemplate::default_discretize()).is_err());
    }
}
