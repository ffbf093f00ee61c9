//! Generates the synthetic corpus, builds every table with the lexicon mock
//! and prints recall and precision for dIR and both baselines.
//!
//! `cargo run -p dir-core --example evaluate -- [rows_per_domain] [queries] [seed]`

use dir_core::eval::{evaluate, generate_corpus, generate_suite, mock_engine, CorpusSpec, EvalReport, System};
use dir_core::tablegen::Store;

fn main() -> dir_core::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("numeric argument"));
    let rows = args.next().unwrap_or(400) as usize;
    let queries = args.next().unwrap_or(50) as usize;
    let seed = args.next().unwrap_or(7);

    let spec = CorpusSpec::standard(rows, seed);
    let corpus = generate_corpus(&spec)?;
    let engine = mock_engine(&corpus, Store::in_memory()?)?;
    let suite = generate_suite(&spec, &corpus, queries, seed)?;

    let systems = System::ALL
        .iter()
        .map(|s| evaluate(*s, &suite, &engine, &corpus))
        .collect::<dir_core::Result<Vec<_>>>()?;
    let report = EvalReport { rows_per_domain: rows, seed, systems };
    print!("{}", report.to_text());
    for q in &report.system(System::Dir).expect("dir was evaluated").queries {
        if q.recall < 1.0 || q.precision < 1.0 {
            println!("miss: {} -> {:?} ({:?})", q.description, q.sql, q.status);
        }
    }
    Ok(())
}
