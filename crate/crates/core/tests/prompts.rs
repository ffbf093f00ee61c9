//! Golden snapshots of the bundled prompt templates.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the snapshots after an intended change.

use std::path::PathBuf;
use std::sync::Arc;

use dir_core::enumerate::CapPolicy;
use dir_core::ingest::{collect_text_fields, load_context_table, IngestConfig, SourceFormat};
use dir_core::llm::{
    build_discretize_prompt, build_text2sql_prompt, Gateway, LexiconEntry, MockProvider, PromptTemplate,
    ProviderConfig,
};
use dir_core::model::{ColumnName, Constraint, DialogState, Literal, Operand, Operator};
use dir_core::tablegen::Store;
use dir_core::{Engine, Templates};

const CSV: &str = "product_id,title,price,description\n\
p1,Trail 15,120,\"A rugged 15 liter backpack in black nylon with a padded shoulder strap.\"\n\
p2,City 22,310,\"A sleek navy 22 liter backpack in leather, carried by a top handle.\"\n";

fn col(s: &str) -> ColumnName {
    ColumnName::new(s).unwrap()
}

fn check(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} drifted; rerun with UPDATE_GOLDEN=1 if intended");
}

fn engine() -> Engine {
    let lexicon = [
        ("backpack", "product_type", "backpack"),
        ("15 liter", "product_size", "15 liter"),
        ("22 liter", "product_size", "22 liter"),
        ("black", "color", "black"),
        ("navy", "color", "navy"),
        ("strap", "handle_type", "strap"),
        ("top handle", "handle_type", "top handle"),
    ]
    .into_iter()
    .map(|(p, k, v)| LexiconEntry { phrase: p.into(), key: k.into(), value: v.into() })
    .collect();
    let gateway = Gateway::new(Arc::new(MockProvider::new(lexicon)), ProviderConfig::mock(8000));
    let cap = CapPolicy { min_row_support: 0.0, mandatory_keys: vec![col("product_type")], ..CapPolicy::default() };
    let engine = Engine::new(gateway, Templates::default(), cap, Store::in_memory().unwrap());
    let cfg = IngestConfig::new(col("product_id"));
    let table = load_context_table(CSV.as_bytes(), SourceFormat::Csv, "backpacks", "backpacks", &cfg).unwrap();
    let text = collect_text_fields(&table, &cfg).unwrap();
    engine.build_table(table.with_text_columns(text)).unwrap();
    engine
}

#[test]
fn discretize_prompt_snapshot() {
    let prompt = build_discretize_prompt(
        "A rugged 15 liter backpack in black nylon with a padded shoulder strap.",
        &[col("product_type")],
        &PromptTemplate::default_discretize(),
    )
    .unwrap();
    check("discretize.txt", &prompt.text);
}

#[test]
fn text2sql_prompt_snapshot() {
    let engine = engine();
    let table = engine.table("backpacks").unwrap();
    let mut state = DialogState::new("backpacks");
    state.constraints.insert(
        col("color"),
        Constraint { op: Operator::Neq, operand: Operand::Single(Literal::text("black")), turn_index: 1 },
    );
    let prompt = build_text2sql_prompt(
        "only 22 liter ones under $400",
        &table.schema,
        &table.catalog,
        &state,
        &PromptTemplate::default_text2sql(),
    )
    .unwrap();
    check("text2sql.txt", &prompt.text);
}

#[test]
fn rendering_is_pure() {
    let t = PromptTemplate::default_discretize();
    let a = build_discretize_prompt("some text", &[], &t).unwrap();
    let b = build_discretize_prompt("some text", &[], &t).unwrap();
    assert_eq!(a, b);
    assert!(!t.exemplars.is_empty());
    assert!(!PromptTemplate::default_text2sql().exemplars.is_empty());
}
