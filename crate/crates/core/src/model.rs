//! Domain types shared by every stage of the pipeline.
//!
//! Everything here is a plain value: once built, a table, extraction set or
//! catalog is never mutated in place by another stage, each stage produces a
//! new value instead.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_COLUMN_NAME_LEN: usize = 64;
pub const MAX_VALUE_LEN: usize = 128;

/// A normalized column identifier: lowercase ASCII alphanumeric words joined
/// by single underscores.
///
/// Equality, ordering and hashing use the normalized form only. The raw input
/// is kept for diagnostics but is not serialized.
#[derive(Clone)]
pub struct ColumnName {
    raw: String,
    normalized: String,
}

/// Normalize a free-form key or header into a [`ColumnName`].
///
/// Every character outside `[A-Za-z0-9]` acts as a word separator, except
/// apostrophes which are dropped (`men's` becomes `mens`). Names longer than
/// [`MAX_COLUMN_NAME_LEN`] are truncated at a word boundary when possible.
pub fn normalize_column_name(raw: &str) -> Result<ColumnName> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(Error::Name {
            raw: raw.to_string(),
            reason: "empty".into(),
        });
    }
    let mut words: Vec<String> = Vec::new();
    let mut current = String::new();
    for ch in trimmed.chars() {
        if ch.is_ascii_alphanumeric() {
            current.push(ch.to_ascii_lowercase());
        } else if ch == '\'' || ch == '\u{2019}' || !ch.is_ascii() && ch.is_alphanumeric() {
            // stripped, not a separator
        } else if !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    let mut normalized = words.join("_");
    if normalized.len() > MAX_COLUMN_NAME_LEN {
        tracing::warn!(raw, "column name truncated to {MAX_COLUMN_NAME_LEN} characters");
        normalized.truncate(MAX_COLUMN_NAME_LEN);
        while normalized.ends_with('_') {
            normalized.pop();
        }
    }
    if normalized.is_empty() {
        return Err(Error::Name {
            raw: raw.to_string(),
            reason: "nothing left after normalization".into(),
        });
    }
    Ok(ColumnName {
        raw: raw.to_string(),
        normalized,
    })
}

impl ColumnName {
    pub fn new(raw: &str) -> Result<Self> {
        normalize_column_name(raw)
    }

    pub fn as_str(&self) -> &str {
        &self.normalized
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// Underscore-separated word count, the measure of name complexity.
    pub fn word_count(&self) -> usize {
        self.normalized.split('_').count()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.normalized.split('_')
    }

    /// Checks the normalized-form invariant without normalizing.
    pub fn is_normalized(s: &str) -> bool {
        !s.is_empty()
            && s.len() <= MAX_COLUMN_NAME_LEN
            && s.split('_').all(|w| {
                !w.is_empty() && w.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
            })
    }
}

impl PartialEq for ColumnName {
    fn eq(&self, other: &Self) -> bool {
        self.normalized == other.normalized
    }
}
impl Eq for ColumnName {}
impl PartialOrd for ColumnName {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ColumnName {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.normalized.cmp(&other.normalized)
    }
}
impl std::hash::Hash for ColumnName {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.normalized.hash(state)
    }
}

impl fmt::Debug for ColumnName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.normalized)
    }
}

impl fmt::Display for ColumnName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.normalized)
    }
}

impl std::str::FromStr for ColumnName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        normalize_column_name(s)
    }
}

impl Serialize for ColumnName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.normalized)
    }
}

impl<'de> Deserialize<'de> for ColumnName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        normalize_column_name(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Number,
    Text,
    Boolean,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::Number => "number",
            ValueKind::Text => "text",
            ValueKind::Boolean => "boolean",
        })
    }
}

/// A typed cell value as seen by queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Number(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(t) => f.write_str(t),
        }
    }
}

/// Parse a cell as a boolean, accepting `true/false/yes/no` in any case.
pub fn parse_bool(cell: &str) -> Option<bool> {
    match cell.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" => Some(true),
        "false" | "no" => Some(false),
        _ => None,
    }
}

pub fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|n| n.is_finite())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: ColumnName,
    pub kind: ValueKind,
}

/// One row of raw cells aligned with [`ContextTable::columns`]; `None` is null.
pub type Row = Vec<Option<String>>;

/// The original table: a primary key, structured columns and free-text columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextTable {
    pub table_id: String,
    pub domain_id: String,
    pub primary_key: ColumnName,
    /// Every column in header order, primary key included.
    pub columns: Vec<ColumnDef>,
    /// Free-text columns chosen by the collect step; empty until then.
    #[serde(default)]
    pub text_columns: Vec<ColumnName>,
    pub rows: Vec<Row>,
}

impl ContextTable {
    pub fn column_index(&self, name: &ColumnName) -> Option<usize> {
        self.columns.iter().position(|c| &c.name == name)
    }

    pub fn column(&self, name: &ColumnName) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| &c.name == name)
    }

    pub fn pk_index(&self) -> usize {
        self.column_index(&self.primary_key)
            .expect("primary key is a declared column")
    }

    pub fn pk_values(&self) -> impl Iterator<Item = &str> + '_ {
        let idx = self.pk_index();
        self.rows
            .iter()
            .map(move |r| r[idx].as_deref().unwrap_or_default())
    }

    /// Columns that are neither collected free text: the primary key and the
    /// structured attributes.
    pub fn structured_columns(&self) -> impl Iterator<Item = &ColumnDef> + '_ {
        self.columns
            .iter()
            .filter(|c| !self.text_columns.contains(&c.name))
    }

    /// Typed view of a raw cell according to its column kind.
    ///
    /// Numeric cells that do not parse read as null; boolean cells read as
    /// the text `true` or `false`.
    pub fn typed_cell(&self, row: &Row, col: usize) -> Value {
        let Some(raw) = row[col].as_deref() else {
            return Value::Null;
        };
        match self.columns[col].kind {
            ValueKind::Number => parse_number(raw).map_or(Value::Null, Value::Number),
            ValueKind::Boolean => match parse_bool(raw) {
                Some(b) => Value::Text(b.to_string()),
                None => Value::Null,
            },
            ValueKind::Text => Value::Text(raw.to_string()),
        }
    }

    pub fn with_text_columns(mut self, text_columns: Vec<ColumnName>) -> Self {
        self.text_columns = text_columns;
        self
    }
}

/// One extracted fact: a categorization key and its enumerated value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyValueTuple {
    pub key: ColumnName,
    pub value: String,
}

impl KeyValueTuple {
    /// Builds a tuple, lowercasing and trimming the value. Over-long values are
    /// truncated to [`MAX_VALUE_LEN`] characters; the returned flag reports it.
    pub fn new(key: ColumnName, value: &str) -> Result<(Self, bool)> {
        let mut value = value.trim().to_lowercase();
        if value.is_empty() {
            return Err(Error::ExtractionParse(format!("empty value for key {key}")));
        }
        let truncated = value.chars().count() > MAX_VALUE_LEN;
        if truncated {
            value = value.chars().take(MAX_VALUE_LEN).collect::<String>();
            value = value.trim_end().to_string();
        }
        Ok((KeyValueTuple { key, value }, truncated))
    }
}

/// Outcome of discretizing one row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RowExtraction {
    pub tuples: Vec<KeyValueTuple>,
    /// Set when the row could not be extracted at all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Mandatory keys the model did not produce even after the retry.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unextracted: Vec<ColumnName>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RowExtraction {
    pub fn get(&self, key: &ColumnName) -> Option<&str> {
        self.tuples
            .iter()
            .find(|t| &t.key == key)
            .map(|t| t.value.as_str())
    }
}

/// Per-row key-value tuples for one table, keyed by primary-key value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSet {
    pub table_id: String,
    pub per_row: BTreeMap<String, RowExtraction>,
    /// Inferred keys renamed because they collided with a context column.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub renamed: BTreeMap<ColumnName, ColumnName>,
}

impl ExtractionSet {
    pub fn failed_rows(&self) -> impl Iterator<Item = (&String, &RowExtraction)> {
        self.per_row.iter().filter(|(_, r)| r.failure.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedKey {
    pub column: ColumnName,
    pub reason: String,
}

/// Enumerated value sets per inferred column.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnumerationCatalog {
    pub table_id: String,
    /// Column → sorted, distinct, non-empty value list.
    pub entries: BTreeMap<ColumnName, Vec<String>>,
    /// Number of rows in which each column was extracted.
    #[serde(default)]
    pub support: BTreeMap<ColumnName, usize>,
    /// Original key → surviving key. Surviving keys map to themselves.
    #[serde(default)]
    pub consolidation_map: BTreeMap<ColumnName, ColumnName>,
    #[serde(default)]
    pub dropped: Vec<DroppedKey>,
}

impl EnumerationCatalog {
    pub fn new(table_id: impl Into<String>) -> Self {
        EnumerationCatalog {
            table_id: table_id.into(),
            ..Default::default()
        }
    }

    pub fn values(&self, column: &ColumnName) -> Option<&[String]> {
        self.entries.get(column).map(Vec::as_slice)
    }

    /// Adds one observed value, keeping the list sorted and distinct.
    pub fn insert(&mut self, column: ColumnName, value: String) {
        let list = self.entries.entry(column).or_default();
        if let Err(pos) = list.binary_search(&value) {
            list.insert(pos, value);
        }
    }

    /// Surviving column for an original key, if the key was kept.
    pub fn resolve(&self, key: &ColumnName) -> Option<&ColumnName> {
        let target = self.consolidation_map.get(key).unwrap_or(key);
        self.entries.get_key_value(target).map(|(k, _)| k)
    }

    /// Merges another catalog's entries and supports into this one.
    pub fn merge(&mut self, other: &EnumerationCatalog) {
        for (col, values) in &other.entries {
            for v in values {
                self.insert(col.clone(), v.clone());
            }
        }
        for (col, n) in &other.support {
            *self.support.entry(col.clone()).or_default() += n;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let catalog: EnumerationCatalog = serde_json::from_str(s)?;
        for (col, values) in &catalog.entries {
            if values.is_empty() || values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Schema(format!(
                    "catalog entry {col} must be non-empty, sorted and distinct"
                )));
            }
        }
        Ok(catalog)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Eq,
    Neq,
    Lt,
    Lte,
    Gt,
    Gte,
    In,
    Like,
    /// Relaxation marker: the column may take any value.
    Any,
}

impl Operator {
    pub fn is_ordering(self) -> bool {
        matches!(self, Operator::Lt | Operator::Lte | Operator::Gt | Operator::Gte)
    }

    pub fn name(self) -> &'static str {
        match self {
            Operator::Eq => "eq",
            Operator::Neq => "neq",
            Operator::Lt => "lt",
            Operator::Lte => "lte",
            Operator::Gt => "gt",
            Operator::Gte => "gte",
            Operator::In => "in",
            Operator::Like => "like",
            Operator::Any => "any",
        }
    }

    pub fn from_name(s: &str) -> Option<Operator> {
        Some(match s {
            "eq" => Operator::Eq,
            "neq" => Operator::Neq,
            "lt" => Operator::Lt,
            "lte" => Operator::Lte,
            "gt" => Operator::Gt,
            "gte" => Operator::Gte,
            "in" => Operator::In,
            "like" => Operator::Like,
            "any" => Operator::Any,
            _ => return None,
        })
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

impl Literal {
    pub fn text(s: impl Into<String>) -> Self {
        Literal::Text(s.into())
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => write!(f, "{n}"),
            Literal::Text(t) => write!(f, "{t:?}"),
        }
    }
}

/// Right-hand side of a predicate atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Operand {
    None,
    Single(Literal),
    List(Vec<Literal>),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::None => Ok(()),
            Operand::Single(l) => write!(f, "{l}"),
            Operand::List(ls) => {
                f.write_str("[")?;
                for (i, l) in ls.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{l}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub op: Operator,
    pub operand: Operand,
    pub turn_index: usize,
}

/// Per-column constraints accumulated across conversation turns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogState {
    pub active_table: String,
    pub constraints: BTreeMap<ColumnName, Constraint>,
}

impl DialogState {
    pub fn new(active_table: impl Into<String>) -> Self {
        DialogState {
            active_table: active_table.into(),
            constraints: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }
}
