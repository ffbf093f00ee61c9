//! Materializes context and inference tables in an embedded SQLite store and
//! exposes their one-to-one join as the view `<table_id>__joined`.
//!
//! Inference columns are always `TEXT`: enumerated values such as `15 liter`
//! are surface strings, not scalars.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;
use rusqlite::{params_from_iter, Connection};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ColumnName, ContextTable, EnumerationCatalog, ExtractionSet, Value, ValueKind};

/// Default per-table column limit of the store.
pub const DEFAULT_MAX_COLUMNS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Context,
    Inference,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Context => "context",
            Origin::Inference => "inference",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinedColumn {
    pub name: ColumnName,
    pub kind: ValueKind,
    pub origin: Origin,
}

/// Schema of a context ⋈ inference view: context columns first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinedSchema {
    pub table_id: String,
    pub view: String,
    pub primary_key: ColumnName,
    pub columns: Vec<JoinedColumn>,
}

impl JoinedSchema {
    pub fn column(&self, name: &ColumnName) -> Option<&JoinedColumn> {
        self.columns.iter().find(|c| &c.name == name)
    }
}

pub fn context_table_name(table_id: &str) -> String {
    format!("{table_id}__context")
}

pub fn inference_table_name(table_id: &str) -> String {
    format!("{table_id}__inference")
}

pub fn view_name(table_id: &str) -> String {
    format!("{table_id}__joined")
}

pub(crate) fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn check_table_id(table_id: &str) -> Result<()> {
    if ColumnName::is_normalized(table_id) {
        Ok(())
    } else {
        Err(Error::Schema(format!(
            "table id {table_id:?} must be lowercase alphanumeric words joined by underscores"
        )))
    }
}

/// Rows returned by a query, with column names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultSet {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column, e.g. the primary keys of all returned rows.
    pub fn column_values(&self, name: &str) -> Vec<String> {
        let Some(i) = self.column_index(name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[i].to_string()).collect()
    }
}

/// Handle on one SQLite database file (or an in-memory database).
pub struct Store {
    conn: Connection,
    max_columns: usize,
    path: Option<PathBuf>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store")
            .field("path", &self.path)
            .field("max_columns", &self.max_columns)
            .finish()
    }
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        Ok(Store {
            conn: Connection::open(&path)?,
            max_columns: DEFAULT_MAX_COLUMNS,
            path: Some(path),
        })
    }

    pub fn in_memory() -> Result<Self> {
        Ok(Store {
            conn: Connection::open_in_memory()?,
            max_columns: DEFAULT_MAX_COLUMNS,
            path: None,
        })
    }

    pub fn with_max_columns(mut self, max_columns: usize) -> Self {
        self.max_columns = max_columns;
        self
    }

    pub fn max_columns(&self) -> usize {
        self.max_columns
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn object_names(&self) -> Result<Vec<String>> {
        let mut stmt = self
            .conn
            .prepare("SELECT name FROM sqlite_master WHERE type IN ('table','view') ORDER BY name")?;
        let names = stmt.query_map([], |r| r.get::<_, String>(0))?.collect::<rusqlite::Result<_>>()?;
        Ok(names)
    }

    pub fn has_object(&self, name: &str) -> Result<bool> {
        let n: i64 = self.conn.query_row(
            "SELECT count(*) FROM sqlite_master WHERE name = ?1",
            [name],
            |r| r.get(0),
        )?;
        Ok(n > 0)
    }

    /// Runs a read-only statement. Anything that could write is refused
    /// before execution.
    pub fn query(&self, sql: &str, params: &[Value]) -> Result<ResultSet> {
        let mut stmt = self.conn.prepare(sql)?;
        if !stmt.readonly() {
            return Err(Error::Contract("refusing to run a statement that writes".into()));
        }
        let columns: Vec<String> = stmt.column_names().into_iter().map(str::to_string).collect();
        let width = columns.len();
        let bound = params.iter().map(to_sql_value);
        let rows = stmt
            .query_map(params_from_iter(bound), |row| {
                (0..width).map(|i| row.get_ref(i).map(from_sql_ref)).collect::<rusqlite::Result<Vec<_>>>()
            })?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(ResultSet { columns, rows })
    }

    /// SHA-256 over the schema and every row of every table, in a fixed order.
    pub fn checksum(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        let mut stmt = self.conn.prepare(
            "SELECT type, name, coalesce(sql, '') FROM sqlite_master ORDER BY type, name",
        )?;
        let objects: Vec<(String, String, String)> = stmt
            .query_map([], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)))?
            .collect::<rusqlite::Result<_>>()?;
        for (kind, name, sql) in &objects {
            hasher.update(format!("{kind}\u{1}{name}\u{1}{sql}\u{2}"));
        }
        for (kind, name, _) in &objects {
            if kind != "table" {
                continue;
            }
            let rows = self.query(&format!("SELECT * FROM {} ORDER BY rowid", quote_ident(name)), &[])?;
            for row in rows.rows {
                for v in row {
                    let tagged = match v {
                        Value::Null => "n".to_string(),
                        Value::Number(n) => format!("f{n:?}"),
                        Value::Text(t) => format!("t{t}"),
                    };
                    hasher.update(tagged);
                    hasher.update([1u8]);
                }
                hasher.update([2u8]);
            }
        }
        Ok(hex::encode(hasher.finalize()))
    }

    fn replace_table(&self, name: &str, columns: &[(String, &str)], rows: &[Vec<Value>]) -> Result<()> {
        let tx = self.conn.unchecked_transaction()?;
        tx.execute_batch(&format!("DROP TABLE IF EXISTS {}", quote_ident(name)))?;
        let defs: Vec<String> = columns
            .iter()
            .map(|(c, ty)| format!("{} {ty}", quote_ident(c)))
            .collect();
        tx.execute_batch(&format!("CREATE TABLE {} ({})", quote_ident(name), defs.join(", ")))?;
        {
            let placeholders = vec!["?"; columns.len()].join(", ");
            let mut insert =
                tx.prepare(&format!("INSERT INTO {} VALUES ({placeholders})", quote_ident(name)))?;
            for row in rows {
                insert.execute(params_from_iter(row.iter().map(to_sql_value)))?;
            }
        }
        tx.commit()?;
        Ok(())
    }
}

fn to_sql_value(v: &Value) -> rusqlite::types::Value {
    match v {
        Value::Null => rusqlite::types::Value::Null,
        Value::Number(n) => rusqlite::types::Value::Real(*n),
        Value::Text(t) => rusqlite::types::Value::Text(t.clone()),
    }
}

fn from_sql_ref(v: ValueRef<'_>) -> Value {
    match v {
        ValueRef::Null => Value::Null,
        ValueRef::Integer(i) => Value::Number(i as f64),
        ValueRef::Real(f) => Value::Number(f),
        ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Value::Text(hex::encode(b)),
    }
}

/// Writes the context table as `<table_id>__context`, replacing any previous copy.
pub fn write_context_table(table: &ContextTable, store: &Store) -> Result<String> {
    check_table_id(&table.table_id)?;
    if table.columns.len() > store.max_columns {
        return Err(Error::StoreLimit {
            limit: store.max_columns,
            requested: table.columns.len(),
        });
    }
    let columns: Vec<(String, &str)> = table
        .columns
        .iter()
        .map(|c| {
            let ty = match c.kind {
                ValueKind::Number => "REAL",
                ValueKind::Text | ValueKind::Boolean => "TEXT",
            };
            let ty = if c.name == table.primary_key { "TEXT PRIMARY KEY" } else { ty };
            (c.name.to_string(), ty)
        })
        .collect();
    let rows: Vec<Vec<Value>> = table
        .rows
        .iter()
        .map(|r| (0..table.columns.len()).map(|i| table.typed_cell(r, i)).collect())
        .collect();
    let name = context_table_name(&table.table_id);
    store.replace_table(&name, &columns, &rows)?;
    Ok(name)
}

/// Creates `<table_id>__inference`: the primary key plus one text column per
/// catalog entry, one row per extraction entry in primary-key order.
///
/// Cells hold the extracted value after key consolidation, or null when the
/// row has no value in the catalog for that column.
pub fn generate_inference_table(
    catalog: &EnumerationCatalog,
    extractions: &ExtractionSet,
    primary_key: &ColumnName,
    store: &Store,
) -> Result<String> {
    check_table_id(&extractions.table_id)?;
    let requested = catalog.entries.len() + 1;
    if requested > store.max_columns {
        return Err(Error::StoreLimit {
            limit: store.max_columns,
            requested,
        });
    }
    if catalog.entries.contains_key(primary_key) {
        return Err(Error::Schema(format!(
            "inferred column {primary_key} collides with the primary key"
        )));
    }

    let inferred: Vec<&ColumnName> = catalog.entries.keys().collect();
    let mut columns: Vec<(String, &str)> = vec![(primary_key.to_string(), "TEXT PRIMARY KEY")];
    columns.extend(inferred.iter().map(|c| (c.to_string(), "TEXT")));

    let mut rows = Vec::with_capacity(extractions.per_row.len());
    for (pk, extraction) in &extractions.per_row {
        let mut row = vec![Value::Null; columns.len()];
        row[0] = Value::Text(pk.clone());
        for tuple in &extraction.tuples {
            let Some(column) = catalog.resolve(&tuple.key) else {
                continue;
            };
            let allowed = catalog.values(column).unwrap_or_default();
            if allowed.binary_search(&tuple.value).is_err() {
                continue;
            }
            let idx = inferred.binary_search(&column).expect("entry column") + 1;
            row[idx] = Value::Text(tuple.value.clone());
        }
        rows.push(row);
    }

    let name = inference_table_name(&extractions.table_id);
    store.replace_table(&name, &columns, &rows)?;
    Ok(name)
}

/// Creates the joined view over the context table and `inference_table` and
/// returns its schema.
pub fn materialize_joined_view(
    context: &ContextTable,
    inference_table: &str,
    store: &Store,
) -> Result<JoinedSchema> {
    check_table_id(&context.table_id)?;
    let context_name = context_table_name(&context.table_id);
    for name in [&context_name, &inference_table.to_string()] {
        if !store.has_object(name)? {
            return Err(Error::Schema(format!("table {name} does not exist")));
        }
    }
    let pk = &context.primary_key;

    let info = store.query(&format!("SELECT * FROM {} LIMIT 0", quote_ident(inference_table)), &[])?;
    let inferred: Vec<ColumnName> = info
        .columns
        .iter()
        .filter(|c| c.as_str() != pk.as_str())
        .map(|c| ColumnName::new(c))
        .collect::<Result<_>>()?;
    for col in &inferred {
        if context.column(col).is_some() {
            return Err(Error::Schema(format!(
                "inferred column {col} collides with a context column"
            )));
        }
    }
    let width = context.columns.len() + inferred.len();
    if width > store.max_columns {
        return Err(Error::StoreLimit {
            limit: store.max_columns,
            requested: width,
        });
    }

    let context_keys: BTreeSet<String> = context.pk_values().map(str::to_string).collect();
    let inference_keys: BTreeSet<String> = store
        .query(&format!("SELECT {} FROM {}", quote_ident(pk.as_str()), quote_ident(inference_table)), &[])?
        .column_values(pk.as_str())
        .into_iter()
        .collect();
    let mismatched: Vec<String> = context_keys.symmetric_difference(&inference_keys).cloned().collect();
    if !mismatched.is_empty() {
        return Err(Error::Integrity { keys: mismatched });
    }

    let view = view_name(&context.table_id);
    let mut select: Vec<String> = context
        .columns
        .iter()
        .map(|c| format!("c.{}", quote_ident(c.name.as_str())))
        .collect();
    select.extend(inferred.iter().map(|c| format!("i.{}", quote_ident(c.as_str()))));
    let ddl = format!(
        "DROP VIEW IF EXISTS {v}; CREATE VIEW {v} AS SELECT {cols} FROM {ctx} AS c JOIN {inf} AS i ON c.{k} = i.{k}",
        v = quote_ident(&view),
        cols = select.join(", "),
        ctx = quote_ident(&context_name),
        inf = quote_ident(inference_table),
        k = quote_ident(pk.as_str()),
    );
    store.conn.execute_batch(&ddl)?;

    let mut columns: Vec<JoinedColumn> = context
        .columns
        .iter()
        .map(|c| JoinedColumn {
            name: c.name.clone(),
            kind: c.kind,
            origin: Origin::Context,
        })
        .collect();
    columns.extend(inferred.into_iter().map(|name| JoinedColumn {
        name,
        kind: ValueKind::Text,
        origin: Origin::Inference,
    }));
    Ok(JoinedSchema {
        table_id: context.table_id.clone(),
        view,
        primary_key: pk.clone(),
        columns,
    })
}
