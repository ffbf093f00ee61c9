//! Compiles questions to SQL, validates them against the catalog and repairs
//! near-miss values. The second question goes through a scripted model that
//! misspells a value on purpose.
//!
//! `cargo run -p dir-core --example text2sql`

use std::sync::Arc;

use dir_core::eval::{generate_corpus, mock_engine, CorpusSpec};
use dir_core::llm::{Gateway, PromptTemplate, ProviderConfig, ScriptedProvider};
use dir_core::model::DialogState;
use dir_core::tablegen::Store;
use dir_core::text2sql::{execute, text_to_sql};

fn main() -> dir_core::Result<()> {
    let corpus = generate_corpus(&CorpusSpec::standard(100, 7))?;
    let engine = mock_engine(&corpus, Store::in_memory()?)?;
    let state = DialogState::new("backpacks");

    let answer = engine.ask("backpacks", "non-black 15 liter backpacks under $400", &state)?;
    println!("{} [{}]", answer.query.raw_sql, answer.query.report.status);
    println!("{} rows", answer.rows.map_or(0, |r| r.rows.len()));

    let table = engine.table("backpacks")?;
    let typo = ScriptedProvider::new(["SELECT * FROM backpacks__joined WHERE product_size = '15 litre' AND color = 'nayv'"]);
    let gateway = Gateway::new(Arc::new(typo), ProviderConfig::mock(8000));
    let q = text_to_sql(
        "15 liter navy backpacks",
        &table.schema,
        &table.catalog,
        &state,
        &gateway,
        &PromptTemplate::default_text2sql(),
    )?;
    println!("model said: {}", q.completion);
    for r in &q.report.repairs {
        println!("repaired {}: {:?} -> {:?}", r.location, r.before, r.after);
    }
    println!("{} [{}]", q.raw_sql, q.report.status);
    let rows = engine.with_store(|s| execute(&q, &table.schema, s))?;
    println!("{} rows", rows.rows.len());
    Ok(())
}
