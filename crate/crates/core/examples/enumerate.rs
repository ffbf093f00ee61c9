//! Consolidates near-duplicate keys and caps the catalog by key complexity
//! and row support.
//!
//! `cargo run -p dir-core --example enumerate`

use dir_core::enumerate::{cap_columns, consolidate_keys, CapPolicy};
use dir_core::model::{ColumnName, EnumerationCatalog};

fn main() -> dir_core::Result<()> {
    let mut catalog = EnumerationCatalog::new("backpacks");
    for (key, value, support) in [
        ("product_brand", "acme", 40),
        ("no_of_pockets", "2", 12),
        ("number_of_pockets", "3", 9),
        ("color", "black", 80),
        ("color", "red", 80),
        ("laptop_sleeve_size_in_inches", "15", 3),
    ] {
        let column = ColumnName::new(key)?;
        catalog.insert(column.clone(), value.into());
        catalog.support.insert(column, support);
    }

    let merged = consolidate_keys(&catalog);
    for (from, to) in merged.consolidation_map.iter().filter(|(a, b)| a != b) {
        println!("consolidated {from} -> {to}");
    }
    let policy = CapPolicy { max_key_words: 2, min_row_support: 0.05, ..CapPolicy::default() };
    let capped = cap_columns(&merged, &policy, 100)?;
    for (column, values) in &capped.entries {
        println!("kept {column}: {values:?}");
    }
    for d in &capped.dropped {
        println!("dropped {}: {}", d.column, d.reason);
    }
    Ok(())
}
