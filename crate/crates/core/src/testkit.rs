//! Small backpack table run through the whole build, shared by unit tests.

use std::sync::Arc;

use crate::discretize::discretize_table;
use crate::enumerate::{cap_columns, consolidate_keys, enumerate_catalog, CapPolicy};
use crate::ingest::{collect_text_fields, load_context_table, IngestConfig, SourceFormat};
use crate::llm::{Gateway, LexiconEntry, MockProvider, PromptTemplate, ProviderConfig};
use crate::model::{ColumnName, ContextTable, EnumerationCatalog, ExtractionSet};
use crate::tablegen::{generate_inference_table, materialize_joined_view, write_context_table, JoinedSchema, Store};

pub const BACKPACKS_CSV: &str = "product_id,title,price,description\n\
p1,Trail 15,120,\"A rugged 15 liter backpack in black nylon with a padded shoulder strap for day hikes.\"\n\
p2,City 22,310,\"A sleek navy 22 liter backpack in leather, carried by a top handle, with a laptop sleeve.\"\n\
p3,Summit 15,450,\"A premium red 15 liter backpack in canvas with a strap and black buckles throughout.\"\n\
p4,Metro 15,260,\"An onyx 15 liter backpack made of polyester with a grab loop and hidden pockets.\"\n\
p5,Voyager 30,380,\"A roomy green 30 liter backpack in nylon with a strap and a rain cover included.\"\n\
p6,Scout 15,199,\"A compact red 15 liter backpack in nylon with a top handle and reflective trim.\"\n";

pub fn col(s: &str) -> ColumnName {
    ColumnName::new(s).unwrap()
}

pub fn lexicon() -> Vec<LexiconEntry> {
    [
        ("backpack", "product_type", "backpack"),
        ("15 liter", "product_size", "15 liter"),
        ("22 liter", "product_size", "22 liter"),
        ("30 liter", "product_size", "30 liter"),
        ("black", "color", "black"),
        ("onyx", "color", "black"),
        ("black buckles", "hardware", "black buckles"),
        ("navy", "color", "navy"),
        ("red", "color", "red"),
        ("green", "color", "green"),
        ("nylon", "material", "nylon"),
        ("leather", "material", "leather"),
        ("canvas", "material", "canvas"),
        ("polyester", "material", "polyester"),
        ("strap", "handle_type", "strap"),
        ("top handle", "handle_type", "top handle"),
        ("grab loop", "handle_type", "grab loop"),
    ]
    .into_iter()
    .map(|(p, k, v)| LexiconEntry { phrase: p.into(), key: k.into(), value: v.into() })
    .collect()
}

pub fn gateway() -> Gateway {
    Gateway::new(Arc::new(MockProvider::new(lexicon())), ProviderConfig::mock(32_000))
}

pub struct Built {
    pub context: ContextTable,
    pub extractions: ExtractionSet,
    pub catalog: EnumerationCatalog,
    pub schema: JoinedSchema,
    pub store: Store,
}

pub fn build() -> Built {
    let cfg = IngestConfig::new(col("product_id"));
    let table = load_context_table(BACKPACKS_CSV.as_bytes(), SourceFormat::Csv, "backpacks", "backpacks", &cfg).unwrap();
    let text = collect_text_fields(&table, &cfg).unwrap();
    let context = table.with_text_columns(text);
    let gw = gateway();
    let extractions = discretize_table(
        &context,
        &context.text_columns,
        &[col("product_type")],
        &gw,
        &PromptTemplate::default_discretize(),
    )
    .unwrap();
    let policy = CapPolicy {
        min_row_support: 0.0,
        mandatory_keys: vec![col("product_type")],
        ..CapPolicy::default()
    };
    let catalog = cap_columns(&consolidate_keys(&enumerate_catalog(&extractions)), &policy, context.rows.len()).unwrap();
    let store = Store::in_memory().unwrap();
    write_context_table(&context, &store).unwrap();
    let inference = generate_inference_table(&catalog, &extractions, &context.primary_key, &store).unwrap();
    let schema = materialize_joined_view(&context, &inference, &store).unwrap();
    Built { context, extractions, catalog, schema, store }
}
