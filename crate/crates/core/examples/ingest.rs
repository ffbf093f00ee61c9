//! Loads a CSV product table and shows which columns the collect step picks
//! as free text.
//!
//! `cargo run -p dir-core --example ingest`

use dir_core::ingest::{collect_text_fields, load_context_table, IngestConfig, SourceFormat};
use dir_core::model::ColumnName;

const CSV: &str = "Product ID,Title,Price,In Stock,Description\n\
p1,Trail 15,120,yes,\"A rugged 15 liter backpack in black nylon with a padded shoulder strap.\"\n\
p2,City 22,310,no,\"A sleek navy 22 liter backpack in leather, carried by a top handle.\"\n\
p3,Summit 15,450,yes,\"A premium red 15 liter backpack in canvas with a strap and black buckles.\"\n";

fn main() -> dir_core::Result<()> {
    let config = IngestConfig::new(ColumnName::new("product_id")?);
    let table = load_context_table(CSV.as_bytes(), SourceFormat::Csv, "backpacks", "backpacks", &config)?;
    println!("{} rows, primary key {}", table.rows.len(), table.primary_key);
    for c in &table.columns {
        println!("  {} ({}) from header {:?}", c.name, c.kind, c.name.raw());
    }
    let text = collect_text_fields(&table, &config)?;
    let names: Vec<&str> = text.iter().map(ColumnName::as_str).collect();
    println!("text columns: {}", names.join(", "));
    Ok(())
}
