//! Staged table build (discretize, enumerate, generate) and the [`Engine`]
//! that holds built tables and answers questions over them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::discretize::discretize_table;
use crate::enumerate::{cap_columns, consolidate_keys, enumerate_catalog, CapPolicy};
use crate::error::{Error, Result};
use crate::llm::{Gateway, PromptTemplate};
use crate::model::{ContextTable, DialogState, EnumerationCatalog, ExtractionSet};
use crate::tablegen::{generate_inference_table, materialize_joined_view, write_context_table, JoinedSchema, ResultSet, Store};
use crate::text2sql::{execute, text_to_sql, GeneratedQuery};

#[derive(Debug, Clone)]
pub struct Templates {
    pub discretize: PromptTemplate,
    pub text2sql: PromptTemplate,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            discretize: PromptTemplate::default_discretize(),
            text2sql: PromptTemplate::default_text2sql(),
        }
    }
}

/// Everything produced for one table, in pipeline order.
#[derive(Debug, Clone, PartialEq)]
pub struct TableArtifacts {
    pub context: ContextTable,
    pub extractions: ExtractionSet,
    pub catalog: EnumerationCatalog,
    pub schema: JoinedSchema,
}

impl TableArtifacts {
    pub fn table_id(&self) -> &str {
        &self.context.table_id
    }
}

pub fn discretize_stage(
    context: &ContextTable,
    gateway: &Gateway,
    template: &PromptTemplate,
    cap: &CapPolicy,
) -> Result<ExtractionSet> {
    discretize_table(context, &context.text_columns, &cap.mandatory_keys, gateway, template)
}

/// Enumerate, consolidate and cap, in that order.
pub fn enumerate_stage(extractions: &ExtractionSet, row_count: usize, cap: &CapPolicy) -> Result<EnumerationCatalog> {
    cap_columns(&consolidate_keys(&enumerate_catalog(extractions)), cap, row_count)
}

pub fn generate_stage(
    context: &ContextTable,
    extractions: &ExtractionSet,
    catalog: &EnumerationCatalog,
    store: &Store,
) -> Result<JoinedSchema> {
    // Checked up front so an oversized catalog leaves the store untouched.
    let width = context.columns.len() + catalog.entries.len();
    if width > store.max_columns() {
        return Err(Error::StoreLimit { limit: store.max_columns(), requested: width });
    }
    write_context_table(context, store)?;
    let inference = generate_inference_table(catalog, extractions, &context.primary_key, store)?;
    materialize_joined_view(context, &inference, store)
}

/// Narrows the column cap so the joined view fits the store.
pub fn clamp_policy(policy: &CapPolicy, store_max_columns: usize, context_width: usize) -> CapPolicy {
    let room = store_max_columns.saturating_sub(context_width).max(1);
    CapPolicy {
        max_columns: policy.max_columns.min(room),
        ..policy.clone()
    }
}

/// Built tables behind one store, plus the model gateway used to query them.
///
/// The store connection is not shareable across threads, so it sits behind a
/// mutex; table metadata is read-mostly.
pub struct Engine {
    gateway: Gateway,
    templates: Templates,
    cap: CapPolicy,
    store: Mutex<Store>,
    tables: RwLock<BTreeMap<String, Arc<TableArtifacts>>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("tables", &self.table_ids()).finish_non_exhaustive()
    }
}

impl Engine {
    pub fn new(gateway: Gateway, templates: Templates, cap: CapPolicy, store: Store) -> Self {
        Engine {
            gateway,
            templates,
            cap,
            store: Mutex::new(store),
            tables: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    pub fn cap(&self) -> &CapPolicy {
        &self.cap
    }

    pub fn with_store<R>(&self, f: impl FnOnce(&Store) -> R) -> R {
        let guard = self.store.lock().unwrap_or_else(|e| e.into_inner());
        f(&guard)
    }

    pub fn checksum(&self) -> Result<String> {
        self.with_store(Store::checksum)
    }

    /// Runs every stage for `context` and registers the result. Extraction
    /// happens without holding the store.
    pub fn build_table(&self, context: ContextTable) -> Result<Arc<TableArtifacts>> {
        let extractions = discretize_stage(&context, &self.gateway, &self.templates.discretize, &self.cap)?;
        let max = self.with_store(Store::max_columns);
        let cap = clamp_policy(&self.cap, max, context.columns.len());
        let catalog = enumerate_stage(&extractions, context.rows.len(), &cap)?;
        let schema = self.with_store(|s| generate_stage(&context, &extractions, &catalog, s))?;
        let artifacts = Arc::new(TableArtifacts { context, extractions, catalog, schema });
        self.insert(artifacts.clone());
        Ok(artifacts)
    }

    /// Registers artifacts whose tables already exist in the store.
    pub fn register(&self, artifacts: TableArtifacts) -> Result<Arc<TableArtifacts>> {
        let view = artifacts.schema.view.clone();
        if !self.with_store(|s| s.has_object(&view))? {
            return Err(Error::Schema(format!("store has no view {view}; run generate first")));
        }
        let artifacts = Arc::new(artifacts);
        self.insert(artifacts.clone());
        Ok(artifacts)
    }

    fn insert(&self, artifacts: Arc<TableArtifacts>) {
        let mut tables = self.tables.write().unwrap_or_else(|e| e.into_inner());
        tables.insert(artifacts.table_id().to_string(), artifacts);
    }

    pub fn table(&self, table_id: &str) -> Result<Arc<TableArtifacts>> {
        self.tables
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(table_id)
            .cloned()
            .ok_or_else(|| Error::UnknownTable(table_id.to_string()))
    }

    pub fn table_ids(&self) -> Vec<String> {
        self.tables.read().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect()
    }

    pub fn tables(&self) -> Vec<Arc<TableArtifacts>> {
        self.tables.read().unwrap_or_else(|e| e.into_inner()).values().cloned().collect()
    }

    /// Compiles `question` against one table. Rows are present only when the
    /// query was valid or repaired.
    pub fn ask(&self, table_id: &str, question: &str, state: &DialogState) -> Result<Answer> {
        let table = self.table(table_id)?;
        let query = text_to_sql(
            question,
            &table.schema,
            &table.catalog,
            state,
            &self.gateway,
            &self.templates.text2sql,
        )?;
        let rows = if query.report.is_executable() {
            Some(self.with_store(|s| execute(&query, &table.schema, s))?)
        } else {
            None
        };
        Ok(Answer { table_id: table_id.to_string(), query, rows })
    }

    /// Loads every table whose artifacts are in `workdir`.
    pub fn load_artifacts(&self, workdir: &Path) -> Result<Vec<String>> {
        let mut loaded = Vec::new();
        if !workdir.is_dir() {
            return Ok(loaded);
        }
        let mut names: Vec<PathBuf> = std::fs::read_dir(workdir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".schema.json"))
            .collect();
        names.sort();
        for path in names {
            let file = path.file_name().unwrap_or_default().to_string_lossy();
            let table_id = file.trim_end_matches(".schema.json").to_string();
            let artifacts = read_artifacts(workdir, &table_id)?;
            self.register(artifacts)?;
            loaded.push(table_id);
        }
        Ok(loaded)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub table_id: String,
    pub query: GeneratedQuery,
    pub rows: Option<ResultSet>,
}

/// On-disk artifact kinds, written as `<table_id>.<kind>.json`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    Context,
    Extractions,
    Catalog,
    Schema,
}

impl ArtifactKind {
    fn suffix(self) -> &'static str {
        match self {
            ArtifactKind::Context => "context",
            ArtifactKind::Extractions => "extractions",
            ArtifactKind::Catalog => "catalog",
            ArtifactKind::Schema => "schema",
        }
    }
}

pub fn artifact_path(workdir: &Path, table_id: &str, kind: ArtifactKind) -> PathBuf {
    workdir.join(format!("{table_id}.{}.json", kind.suffix()))
}

pub fn write_artifact<T: Serialize>(workdir: &Path, table_id: &str, kind: ArtifactKind, value: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(workdir)?;
    let path = artifact_path(workdir, table_id, kind);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

pub fn read_artifact<T: serde::de::DeserializeOwned>(workdir: &Path, table_id: &str, kind: ArtifactKind) -> Result<T> {
    let path = artifact_path(workdir, table_id, kind);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Error::Config(format!("cannot read {}: {e} (run the earlier pipeline stage first)", path.display()))
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Catalogs go through their own writer so the sorted-entry check runs on load.
pub fn write_catalog(workdir: &Path, catalog: &EnumerationCatalog) -> Result<PathBuf> {
    std::fs::create_dir_all(workdir)?;
    let path = artifact_path(workdir, &catalog.table_id, ArtifactKind::Catalog);
    let mut text = catalog.to_json()?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

pub fn read_catalog(workdir: &Path, table_id: &str) -> Result<EnumerationCatalog> {
    let path = artifact_path(workdir, table_id, ArtifactKind::Catalog);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e} (run enumerate first)", path.display())))?;
    EnumerationCatalog::from_json(&text)
}

pub fn write_artifacts(workdir: &Path, artifacts: &TableArtifacts) -> Result<()> {
    let id = artifacts.table_id();
    write_artifact(workdir, id, ArtifactKind::Context, &artifacts.context)?;
    write_artifact(workdir, id, ArtifactKind::Extractions, &artifacts.extractions)?;
    write_catalog(workdir, &artifacts.catalog)?;
    write_artifact(workdir, id, ArtifactKind::Schema, &artifacts.schema)?;
    Ok(())
}

pub fn read_artifacts(workdir: &Path, table_id: &str) -> Result<TableArtifacts> {
    Ok(TableArtifacts {
        context: read_artifact(workdir, table_id, ArtifactKind::Context)?,
        extractions: read_artifact(workdir, table_id, ArtifactKind::Extractions)?,
        catalog: read_catalog(workdir, table_id)?,
        schema: read_artifact(workdir, table_id, ArtifactKind::Schema)?,
    })
}
