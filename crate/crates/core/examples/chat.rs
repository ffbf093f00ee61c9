//! A scripted multi-turn session: constraints accumulate across turns,
//! `any <column>` relaxes one, and a question about another product family
//! switches tables.
//!
//! `cargo run -p dir-core --example chat`

use dir_core::agent::{replay, step, AgentConfig, Session};
use dir_core::eval::{generate_corpus, mock_engine, CorpusSpec};
use dir_core::tablegen::Store;

fn main() -> dir_core::Result<()> {
    let corpus = generate_corpus(&CorpusSpec::standard(100, 7))?;
    let engine = mock_engine(&corpus, Store::in_memory()?)?;
    let config = AgentConfig::default();
    let mut session = Session::new("demo");
    for utterance in [
        "show me red backpacks",
        "only 15 liter ones",
        "any color is fine",
        "woody perfumes for men",
    ] {
        let turn = step(&session, utterance, &engine, &config)?;
        println!("> {utterance}");
        if let Some(o) = &turn.observation {
            println!("  {} [{}] -> {} rows", o.sql, o.status, o.row_count);
        }
        if let Some(r) = &turn.response {
            println!("  {r}");
        }
        session.push(turn);
    }
    assert_eq!(session.replayed_state(), session.dialog_state);
    assert_eq!(replay(&session, &engine, &config)?, session);
    println!("state after {} turns: {}", session.turns.len(), serde_json::to_string(&session.dialog_state)?);
    Ok(())
}
