//! Builds one table end to end and materializes the inference table and the
//! joined view in an embedded store.
//!
//! `cargo run -p dir-core --example generate`

use dir_core::eval::{generate_corpus, mock_engine, CorpusSpec};
use dir_core::tablegen::Store;

fn main() -> dir_core::Result<()> {
    let corpus = generate_corpus(&CorpusSpec::standard(50, 7))?;
    let engine = mock_engine(&corpus, Store::in_memory()?)?;
    let table = engine.table("watches")?;
    println!("view {} ({} rows)", table.schema.view, table.context.rows.len());
    for c in &table.schema.columns {
        println!("  {} {} ({})", c.name, c.kind, c.origin);
    }
    let sample = engine.with_store(|s| {
        s.query(&format!("SELECT product_id, movement, strap_material FROM {} LIMIT 3", table.schema.view), &[])
    })?;
    for row in &sample.rows {
        let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
        println!("  {}", cells.join(" | "));
    }
    println!("store checksum {}", engine.checksum()?);
    Ok(())
}
