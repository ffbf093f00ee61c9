//! Deterministic stand-in for a hosted model.
//!
//! Extraction prompts are answered by a keyword lexicon: every phrase found in
//! the target text (longest first, whole words, case-insensitive) yields its
//! key-value pair. Text-to-SQL prompts are answered by a small rule-based
//! compiler that reads the table, columns, enumerations and dialog state back
//! out of the rendered prompt and recognizes this constraint grammar in the
//! question:
//!
//! * `any <column>` relaxes a column (`<column> IS ANY`);
//! * `<column> is [not] <value>` names a literal explicitly, even one that is
//!   not enumerated;
//! * `[<numeric column>] under|below|less than|at most|over|above|more than|at least [$]N`;
//! * any enumerated value, optionally prefixed by `non-`, `not`, `no`,
//!   `without` or `except`, compares its column for (in)equality;
//! * `cheapest` / `most expensive` order by price, `top N` limits.
//!
//! Constraints from the dialog state are carried over unless the question
//! replaces or relaxes them.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Provider, ProviderConfig, ProviderFailure};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub phrase: String,
    pub key: String,
    pub value: String,
}

#[derive(Debug)]
struct CompiledEntry {
    pattern: Regex,
    key: String,
    value: String,
}

#[derive(Debug, Default)]
pub struct MockProvider {
    lexicon: Vec<CompiledEntry>,
}

impl MockProvider {
    pub fn new(lexicon: Vec<LexiconEntry>) -> Self {
        let mut entries = lexicon;
        entries.sort_by(|a, b| {
            b.phrase
                .chars()
                .count()
                .cmp(&a.phrase.chars().count())
                .then_with(|| a.phrase.cmp(&b.phrase))
        });
        let lexicon = entries
            .into_iter()
            .filter(|e| !e.phrase.trim().is_empty())
            .map(|e| CompiledEntry {
                pattern: Regex::new(&format!(r"\b{}\b", regex::escape(&e.phrase.trim().to_lowercase())))
                    .expect("escaped phrase is a valid pattern"),
                key: e.key,
                value: e.value,
            })
            .collect();
        MockProvider { lexicon }
    }

    pub fn load_lexicon(path: &std::path::Path) -> Result<Vec<LexiconEntry>> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    fn extract(&self, text: &str) -> String {
        let mut masked = text.to_lowercase();
        let mut found: Vec<(usize, &str, &str)> = Vec::new();
        for entry in &self.lexicon {
            let spans: Vec<_> = entry.pattern.find_iter(&masked).map(|m| m.range()).collect();
            for span in spans {
                found.push((span.start, &entry.key, &entry.value));
                mask(&mut masked, span);
            }
        }
        found.sort_by_key(|(pos, _, _)| *pos);
        let pairs: Vec<[&str; 2]> = found.iter().map(|(_, k, v)| [*k, *v]).collect();
        serde_json::to_string(&pairs).expect("pairs serialize")
    }
}

impl Provider for MockProvider {
    fn complete(&self, prompt: &str, _config: &ProviderConfig) -> Result<String, ProviderFailure> {
        let sections = Sections::parse(prompt);
        if sections.get("SQL").is_some() {
            compile_sql(&sections)
                .ok_or_else(|| ProviderFailure::Fatal("mock: text2sql prompt lacks table or question".into()))
        } else if let Some(text) = sections.get("Text") {
            Ok(self.extract(text))
        } else {
            Err(ProviderFailure::Fatal("mock: unrecognized prompt".into()))
        }
    }
}

fn mask(s: &mut String, span: std::ops::Range<usize>) {
    let blank = " ".repeat(span.len());
    s.replace_range(span, &blank);
}

/// `### Header` delimited sections; the last occurrence of a header wins.
struct Sections<'a> {
    parts: Vec<(&'a str, String)>,
}

impl<'a> Sections<'a> {
    fn parse(prompt: &'a str) -> Self {
        let mut parts: Vec<(&'a str, String)> = Vec::new();
        for line in prompt.lines() {
            if let Some(header) = line.strip_prefix("### ") {
                parts.push((header.trim(), String::new()));
            } else if let Some((_, body)) = parts.last_mut() {
                body.push_str(line);
                body.push('\n');
            }
        }
        Sections { parts }
    }

    fn get(&self, header: &str) -> Option<&str> {
        self.parts
            .iter()
            .rev()
            .find(|(h, _)| *h == header)
            .map(|(_, b)| b.as_str())
    }

    fn bullets(&self, header: &str) -> Vec<&str> {
        self.get(header)
            .map(|b| b.lines().filter_map(|l| l.strip_prefix("- ")).collect())
            .unwrap_or_default()
    }
}

struct SchemaColumn {
    name: String,
    numeric: bool,
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn number(n: f64) -> String {
    format!("{n}")
}

fn json_to_sql(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().map(number),
        serde_json::Value::String(s) => Some(quote(s)),
        _ => None,
    }
}

fn state_fragment(column: &str, op: &str, operand: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(operand).ok()?;
    let sym = match op {
        "eq" => "=",
        "neq" => "!=",
        "lt" => "<",
        "lte" => "<=",
        "gt" => ">",
        "gte" => ">=",
        "like" => "LIKE",
        "in" => {
            let items: Option<Vec<String>> = value.as_array()?.iter().map(json_to_sql).collect();
            return Some(format!("{column} IN ({})", items?.join(", ")));
        }
        _ => return None,
    };
    Some(format!("{column} {sym} {}", json_to_sql(&value)?))
}

fn phrase_pattern(value: &str) -> String {
    let tokens: Vec<&str> = value.split(|c: char| c.is_whitespace() || c == '-').filter(|t| !t.is_empty()).collect();
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            let prev_digit = tokens[i - 1].ends_with(|c: char| c.is_ascii_digit());
            out.push_str(if prev_digit { r"[\s-]*" } else { r"[\s-]+" });
        }
        out.push_str(&regex::escape(tok));
    }
    out
}

fn compile_sql(sections: &Sections<'_>) -> Option<String> {
    let view = sections.get("Table")?.trim().to_string();
    let question = sections.get("Question")?.trim().to_lowercase();
    if view.is_empty() {
        return None;
    }

    let mut columns = Vec::new();
    for line in sections.bullets("Columns") {
        let (name, rest) = line.split_once(':')?;
        let primary = rest.contains("primary key");
        if !primary {
            columns.push(SchemaColumn {
                name: name.trim().to_string(),
                numeric: rest.trim_start().starts_with("number"),
            });
        }
    }
    let mut enums: Vec<(String, String)> = Vec::new();
    for line in sections.bullets("Enumerations") {
        if let Some((name, list)) = line.split_once(": ") {
            if let Ok(values) = serde_json::from_str::<Vec<String>>(list) {
                enums.extend(values.into_iter().map(|v| (name.to_string(), v)));
            }
        }
    }
    let mut carried: Vec<(String, String)> = Vec::new();
    for line in sections.bullets("Dialog State") {
        let Some((body, _turn)) = line.rsplit_once(" (turn ") else { continue };
        let mut parts = body.splitn(3, ' ');
        let (Some(col), Some(op), Some(operand)) = (parts.next(), parts.next(), parts.next()) else {
            continue;
        };
        if let Some(fragment) = state_fragment(col, op, operand) {
            carried.push((col.to_string(), fragment));
        }
    }

    // Phrases naming each column, longest first: "product size", plus the last
    // word when no other column shares it.
    let mut phrases: Vec<(String, usize)> = Vec::new();
    for (i, c) in columns.iter().enumerate() {
        phrases.push((c.name.replace('_', " "), i));
        if let Some(last) = c.name.rsplit('_').next() {
            let shared = columns.iter().filter(|o| o.name.rsplit('_').next() == Some(last)).count();
            if shared == 1 && last != c.name && last.len() >= 3 {
                phrases.push((last.to_string(), i));
            }
        }
    }
    phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    let phrase_alt = |only_numeric: bool| -> String {
        phrases
            .iter()
            .filter(|(_, i)| !only_numeric || columns[*i].numeric)
            .map(|(p, _)| regex::escape(p))
            .collect::<Vec<_>>()
            .join("|")
    };
    let column_of = |phrase: &str| phrases.iter().find(|(p, _)| p == phrase).map(|(_, i)| columns[*i].name.clone());

    let mut masked = question.clone();
    // (position, column, fragment)
    let mut found: Vec<(usize, String, String)> = Vec::new();

    let all = phrase_alt(false);
    if !all.is_empty() {
        let relax = Regex::new(&format!(r"\b(?:any|whatever)\s+({all})\b")).ok()?;
        let hits: Vec<_> = relax.captures_iter(&masked).map(|c| (c.get(0).unwrap().range(), c[1].to_string())).collect();
        for (span, phrase) in hits {
            let col = column_of(&phrase)?;
            found.push((span.start, col.clone(), format!("{col} IS ANY")));
            mask(&mut masked, span);
        }

        let explicit = Regex::new(&format!(
            r"\b({all})\s+(is not|isn't|is|=|:)\s+([^,.;?!]+?)(?:\s+and\s+|\s+but\s+|\s*[,.;?!]|$)"
        ))
        .ok()?;
        let hits: Vec<_> = explicit
            .captures_iter(&masked)
            .map(|c| (c.get(0).unwrap().range(), c[1].to_string(), c[2].to_string(), c[3].trim().to_string()))
            .collect();
        for (span, phrase, verb, value) in hits {
            let col = column_of(&phrase)?;
            let numeric = columns.iter().any(|c| c.name == col && c.numeric);
            let literal = match value.trim_start_matches('$').parse::<f64>() {
                Ok(n) if numeric => number(n),
                _ => quote(&value),
            };
            let sym = if verb.starts_with("is n") { "!=" } else { "=" };
            found.push((span.start, col.clone(), format!("{col} {sym} {literal}")));
            mask(&mut masked, span);
        }
    }

    let numeric_cols: Vec<&SchemaColumn> = columns.iter().filter(|c| c.numeric).collect();
    let default_numeric = numeric_cols
        .iter()
        .find(|c| c.name == "price")
        .or_else(|| numeric_cols.first())
        .map(|c| c.name.clone());
    let numeric_alt = phrase_alt(true);
    let prefix = if numeric_alt.is_empty() { String::new() } else { format!(r"(?:\b({numeric_alt})\s+)?") };
    let comparison = Regex::new(&format!(
        r"{prefix}\b(under|below|less than|cheaper than|at most|no more than|up to|over|above|more than|at least|no less than)\s+(\$)?(\d+(?:\.\d+)?)"
    ))
    .ok()?;
    let hits: Vec<_> = comparison
        .captures_iter(&masked)
        .map(|c| {
            (
                c.get(0).unwrap().range(),
                c.get(1).map(|m| m.as_str().to_string()),
                c[2].to_string(),
                c[4].parse::<f64>().unwrap_or_default(),
            )
        })
        .collect();
    for (span, phrase, word, n) in hits {
        let col = match phrase.as_deref().and_then(column_of) {
            Some(c) => c,
            None => match &default_numeric {
                Some(c) => c.clone(),
                None => continue,
            },
        };
        let sym = match word.as_str() {
            "under" | "below" | "less than" | "cheaper than" => "<",
            "at most" | "no more than" | "up to" => "<=",
            "over" | "above" | "more than" => ">",
            _ => ">=",
        };
        found.push((span.start, col.clone(), format!("{col} {sym} {}", number(n))));
        mask(&mut masked, span);
    }

    let mut by_len = enums.clone();
    by_len.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.cmp(b)));
    // column -> (first position, eq values, neq values)
    let mut mentions: BTreeMap<String, (usize, Vec<String>, Vec<String>)> = BTreeMap::new();
    for (col, value) in &by_len {
        let pattern = format!(
            r"(?:\b(non-|(?:non|not|no|without|except)\s+))?\b{}(?:s|es)?\b",
            phrase_pattern(value)
        );
        let Ok(re) = Regex::new(&pattern) else { continue };
        let hits: Vec<_> = re.captures_iter(&masked).map(|c| (c.get(0).unwrap().range(), c.get(1).is_some())).collect();
        for (span, negated) in hits {
            let entry = mentions.entry(col.clone()).or_insert((span.start, Vec::new(), Vec::new()));
            entry.0 = entry.0.min(span.start);
            let list = if negated { &mut entry.2 } else { &mut entry.1 };
            if !list.contains(value) {
                list.push(value.clone());
            }
            mask(&mut masked, span);
        }
    }
    for (col, (pos, mut eq, mut neq)) in mentions {
        if found.iter().any(|(_, c, _)| c == &col) {
            continue;
        }
        eq.sort();
        neq.sort();
        let list = |vs: &[String]| vs.iter().map(|v| quote(v)).collect::<Vec<_>>().join(", ");
        let fragment = match (eq.len(), neq.len()) {
            (1, _) => format!("{col} = {}", quote(&eq[0])),
            (n, _) if n > 1 => format!("{col} IN ({})", list(&eq)),
            (_, 1) => format!("{col} != {}", quote(&neq[0])),
            _ => format!("NOT {col} IN ({})", list(&neq)),
        };
        found.push((pos, col, fragment));
    }

    let mut order = None;
    if let Some(price) = &default_numeric {
        if Regex::new(r"\b(cheapest|lowest price|least expensive)\b").ok()?.is_match(&question) {
            order = Some(format!("{price} ASC"));
        } else if Regex::new(r"\b(most expensive|priciest|highest price)\b").ok()?.is_match(&question) {
            order = Some(format!("{price} DESC"));
        }
    }
    let limit = Regex::new(r"\b(?:top|first)\s+(\d+)\b")
        .ok()?
        .captures(&question)
        .and_then(|c| c[1].parse::<u64>().ok())
        .filter(|n| *n > 0);

    found.sort_by_key(|(pos, _, _)| *pos);
    let mut fragments: Vec<String> = carried
        .into_iter()
        .filter(|(col, _)| !found.iter().any(|(_, c, _)| c == col))
        .map(|(_, f)| f)
        .collect();
    fragments.extend(found.into_iter().map(|(_, _, f)| f));

    let mut sql = format!("SELECT * FROM {view}");
    if !fragments.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&fragments.join(" AND "));
    }
    if let Some(o) = order {
        sql.push_str(&format!(" ORDER BY {o}"));
    }
    if let Some(n) = limit {
        sql.push_str(&format!(" LIMIT {n}"));
    }
    Some(sql)
}
