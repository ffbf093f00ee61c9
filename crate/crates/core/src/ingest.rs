//! Loading context tables and choosing which free-text fields to discretize.

use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{parse_bool, parse_number, ColumnDef, ColumnName, ContextTable, Row, ValueKind};

/// Share of non-null cells that must parse as numbers for a numeric column.
const NUMERIC_SHARE: f64 = 0.9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    pub primary_key: ColumnName,
    #[serde(default)]
    pub declared_text_columns: Option<Vec<ColumnName>>,
    #[serde(default = "default_threshold")]
    pub text_detection_threshold: f64,
    #[serde(default = "default_min_len")]
    pub min_avg_text_length: usize,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_min_len() -> usize {
    40
}

impl IngestConfig {
    pub fn new(primary_key: ColumnName) -> Self {
        IngestConfig {
            primary_key,
            declared_text_columns: None,
            text_detection_threshold: default_threshold(),
            min_avg_text_length: default_min_len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.text_detection_threshold) {
            return Err(Error::Config(format!(
                "text_detection_threshold {} outside [0, 1]",
                self.text_detection_threshold
            )));
        }
        if self.min_avg_text_length < 1 {
            return Err(Error::Config("min_avg_text_length must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Csv,
    Jsonl,
}

impl SourceFormat {
    pub fn from_path(path: &std::path::Path) -> SourceFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => SourceFormat::Jsonl,
            _ => SourceFormat::Csv,
        }
    }
}

/// Reads a context table and infers each column's value kind.
///
/// The primary key is always typed as text. Whitespace-only cells are null.
pub fn load_context_table(
    source: impl Read,
    format: SourceFormat,
    table_id: &str,
    domain_id: &str,
    config: &IngestConfig,
) -> Result<ContextTable> {
    config.validate()?;
    let (header, rows) = match format {
        SourceFormat::Csv => read_csv(source)?,
        SourceFormat::Jsonl => read_jsonl(source)?,
    };

    let pk_idx = header
        .iter()
        .position(|h| h == &config.primary_key)
        .ok_or_else(|| {
            Error::Schema(format!(
                "primary key column {} not found in header",
                config.primary_key
            ))
        })?;

    let mut seen = HashSet::new();
    let mut offending = BTreeSet::new();
    for (i, row) in rows.iter().enumerate() {
        match row[pk_idx].as_deref() {
            None => {
                offending.insert(format!("<null primary key at row {}>", i + 1));
            }
            Some(k) => {
                if !seen.insert(k) {
                    offending.insert(k.to_string());
                }
            }
        }
    }
    if !offending.is_empty() {
        return Err(Error::Integrity {
            keys: offending.into_iter().collect(),
        });
    }

    let columns = header
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let kind = if i == pk_idx {
                ValueKind::Text
            } else {
                infer_kind(rows.iter().filter_map(|r| r[i].as_deref()))
            };
            ColumnDef { name, kind }
        })
        .collect();

    Ok(ContextTable {
        table_id: table_id.to_string(),
        domain_id: domain_id.to_string(),
        primary_key: config.primary_key.clone(),
        columns,
        text_columns: Vec::new(),
        rows,
    })
}

fn infer_kind<'a>(cells: impl Iterator<Item = &'a str> + Clone) -> ValueKind {
    let total = cells.clone().count();
    if total == 0 {
        return ValueKind::Text;
    }
    if cells.clone().all(|c| parse_bool(c).is_some()) {
        return ValueKind::Boolean;
    }
    let numeric = cells.filter(|c| parse_number(c).is_some()).count();
    if numeric as f64 >= NUMERIC_SHARE * total as f64 {
        ValueKind::Number
    } else {
        ValueKind::Text
    }
}

fn cell(raw: &str) -> Option<String> {
    if raw.trim().is_empty() {
        None
    } else {
        Some(raw.to_string())
    }
}

fn normalized_header<'a>(names: impl Iterator<Item = &'a str>) -> Result<Vec<ColumnName>> {
    let mut header: Vec<ColumnName> = Vec::new();
    for raw in names {
        let name = ColumnName::new(raw)?;
        if header.contains(&name) {
            return Err(Error::Schema(format!(
                "columns normalize to the same name {name}"
            )));
        }
        header.push(name);
    }
    Ok(header)
}

fn read_csv(source: impl Read) -> Result<(Vec<ColumnName>, Vec<Row>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = normalized_header(reader.headers()?.iter())?;
    if header.is_empty() {
        return Err(Error::Schema("missing header row".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Schema(format!(
                "record has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        rows.push(record.iter().map(cell).collect());
    }
    Ok((header, rows))
}

fn read_jsonl(source: impl Read) -> Result<(Vec<ColumnName>, Vec<Row>)> {
    let reader = std::io::BufReader::new(source);
    let mut raw_names: Vec<String> = Vec::new();
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&line)?;
        for key in doc.keys() {
            if !raw_names.contains(key) {
                raw_names.push(key.clone());
            }
        }
        records.push(doc);
    }
    let header = normalized_header(raw_names.iter().map(String::as_str))?;
    let mut rows = Vec::with_capacity(records.len());
    for doc in records {
        let mut row: Row = vec![None; header.len()];
        for (key, value) in doc {
            let idx = raw_names.iter().position(|n| n == &key).expect("key collected");
            row[idx] = match value {
                serde_json::Value::Null => None,
                serde_json::Value::String(s) => cell(&s),
                serde_json::Value::Number(n) => Some(n.to_string()),
                serde_json::Value::Bool(b) => Some(b.to_string()),
                other => {
                    return Err(Error::Schema(format!(
                        "field {key} is not flat: {other}"
                    )))
                }
            };
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Writes the table back as CSV with normalized headers.
pub fn write_csv(table: &ContextTable, sink: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(table.columns.iter().map(|c| c.name.as_str()))?;
    for row in &table.rows {
        writer.write_record(row.iter().map(|c| c.as_deref().unwrap_or("")))?;
    }
    writer.flush()?;
    Ok(())
}

/// The collect step: which columns feed discretization, in schema order.
///
/// Declared columns win. Otherwise a text column qualifies when its average
/// non-null length reaches `min_avg_text_length` and its distinct-value ratio
/// reaches `text_detection_threshold`.
pub fn collect_text_fields(table: &ContextTable, config: &IngestConfig) -> Result<Vec<ColumnName>> {
    config.validate()?;
    if let Some(declared) = &config.declared_text_columns {
        let mut out = Vec::new();
        for name in declared {
            if table.column(name).is_none() {
                return Err(Error::Schema(format!("declared text column {name} not in table")));
            }
            if name == &table.primary_key {
                return Err(Error::Schema(format!(
                    "primary key {name} cannot be a text field"
                )));
            }
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
        return Ok(out);
    }

    let mut out = Vec::new();
    for (idx, col) in table.columns.iter().enumerate() {
        if col.kind != ValueKind::Text || col.name == table.primary_key {
            continue;
        }
        let cells: Vec<&str> = table.rows.iter().filter_map(|r| r[idx].as_deref()).collect();
        if cells.is_empty() {
            continue;
        }
        let avg_len = cells.iter().map(|c| c.chars().count()).sum::<usize>() as f64 / cells.len() as f64;
        let distinct = cells.iter().collect::<HashSet<_>>().len() as f64 / cells.len() as f64;
        if avg_len >= config.min_avg_text_length as f64 && distinct >= config.text_detection_threshold {
            out.push(col.name.clone());
        }
    }
    Ok(out)
}
