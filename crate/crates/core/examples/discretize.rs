//! Extracts key-value tuples from product descriptions with the lexicon mock
//! and enumerates the observed values per key.
//!
//! `cargo run -p dir-core --example discretize`

use std::sync::Arc;

use dir_core::discretize::{discretize_row, discretize_table};
use dir_core::enumerate::enumerate_catalog;
use dir_core::ingest::{collect_text_fields, load_context_table, IngestConfig, SourceFormat};
use dir_core::llm::{Gateway, LexiconEntry, MockProvider, PromptTemplate, ProviderConfig};
use dir_core::model::ColumnName;

fn main() -> dir_core::Result<()> {
    let lexicon = [
        ("backpack", "product_type", "backpack"),
        ("15 liter", "product_size", "15 liter"),
        ("22 liter", "product_size", "22 liter"),
        ("strap", "handle_type", "strap"),
        ("top handle", "handle_type", "top handle"),
    ]
    .into_iter()
    .map(|(p, k, v)| LexiconEntry { phrase: p.into(), key: k.into(), value: v.into() })
    .collect();
    let gateway = Gateway::new(Arc::new(MockProvider::new(lexicon)), ProviderConfig::mock(8000));
    let template = PromptTemplate::default_discretize();

    let row = discretize_row("This 15 liter backpack comes with a strap.", &[], &gateway, &template)?;
    for t in &row.tuples {
        println!("({}, {})", t.key, t.value);
    }

    let csv = "id,description\n\
               a,\"This 15 liter backpack comes with a strap.\"\n\
               b,\"A larger 22 liter backpack with a top handle.\"\n";
    let config = IngestConfig::new(ColumnName::new("id")?);
    let table = load_context_table(csv.as_bytes(), SourceFormat::Csv, "backpacks", "backpacks", &config)?;
    let text = collect_text_fields(&table, &config)?;
    let table = table.with_text_columns(text.clone());
    let mandatory = [ColumnName::new("product_type")?];
    let extractions = discretize_table(&table, &text, &mandatory, &gateway, &template)?;
    let catalog = enumerate_catalog(&extractions);
    println!("{}", catalog.to_json()?);
    Ok(())
}
