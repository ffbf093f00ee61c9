//! Property tests over the public API, on a small synthetic corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use proptest::prelude::*;

use dir_core::enumerate::{cap_columns, consolidate_keys, enumerate_catalog, CapPolicy};
use dir_core::eval::{generate_corpus, mock_engine, Corpus, CorpusSpec};
use dir_core::ingest::{collect_text_fields, load_context_table, write_csv, IngestConfig, SourceFormat};
use dir_core::model::{ColumnName, EnumerationCatalog, ExtractionSet, KeyValueTuple, Literal, Operand, Operator, RowExtraction, Value};
use dir_core::reference::{self, JoinedRows};
use dir_core::sql::{Atom, Direction, OrderBy, Predicate, Projection, QueryAst};
use dir_core::tablegen::Store;
use dir_core::text2sql::{repair_query, to_sqlite, validate_query, ValidationStatus};
use dir_core::{Engine, TableArtifacts};

fn col(s: &str) -> ColumnName {
    ColumnName::new(s).unwrap()
}

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| generate_corpus(&CorpusSpec::standard(30, 11)).unwrap())
}

fn engine() -> &'static Engine {
    static E: OnceLock<Engine> = OnceLock::new();
    E.get_or_init(|| mock_engine(corpus(), Store::in_memory().unwrap()).unwrap())
}

fn backpacks() -> std::sync::Arc<TableArtifacts> {
    engine().table("backpacks").unwrap()
}

fn extraction(pairs: &[(String, String)]) -> RowExtraction {
    RowExtraction {
        tuples: pairs.iter().map(|(k, v)| KeyValueTuple::new(col(k), v).unwrap().0).collect(),
        ..RowExtraction::default()
    }
}

fn extraction_set(rows: &[Vec<(String, String)>]) -> ExtractionSet {
    ExtractionSet {
        table_id: "t".into(),
        per_row: rows.iter().enumerate().map(|(i, r)| (format!("r{i:03}"), extraction(r))).collect(),
        ..ExtractionSet::default()
    }
}

fn key() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("color".to_string()),
        Just("no_of_pockets".to_string()),
        Just("number_of_pockets".to_string()),
        Just("product_brand".to_string()),
        Just("strap_length_in_cm".to_string()),
        "[a-z]{3,6}",
    ]
}

fn rows() -> impl Strategy<Value = Vec<Vec<(String, String)>>> {
    proptest::collection::vec(proptest::collection::vec((key(), "[a-z0-9 ]{1,8}[a-z]"), 0..5), 1..12)
}

/// Keeps the literal if `column` is an enumerated column, else a price.
fn literal_for(column: &ColumnName, pick: usize, table: &TableArtifacts) -> Literal {
    match table.catalog.values(column) {
        Some(values) => Literal::text(values[pick % values.len()].clone()),
        None => Literal::Number((pick % 12) as f64 * 50.0),
    }
}

fn predicate(depth: u32) -> BoxedStrategy<Predicate> {
    let atom = (any::<prop::sample::Index>(), 0usize..1000, 0usize..7).prop_map(|(c, pick, op)| {
        let table = backpacks();
        let columns: Vec<ColumnName> = table
            .catalog
            .entries
            .keys()
            .cloned()
            .chain([col("price")])
            .collect();
        let column = c.get(&columns).clone();
        let enumerated = table.catalog.values(&column).is_some();
        let lit = literal_for(&column, pick, &table);
        let atom = match (op, enumerated) {
            (0, _) => Atom { column, op: Operator::Any, operand: Operand::None },
            (1, _) => Atom {
                column: column.clone(),
                op: Operator::In,
                operand: Operand::List(vec![lit, literal_for(&column, pick / 3 + 1, &table)]),
            },
            (2, true) => Atom::new(column, Operator::Neq, lit),
            (3, false) => Atom::new(column, Operator::Lt, lit),
            (4, false) => Atom::new(column, Operator::Gte, lit),
            _ => Atom::new(column, Operator::Eq, lit),
        };
        Predicate::Atom(atom)
    });
    if depth == 0 {
        return atom.boxed();
    }
    prop_oneof![
        3 => atom,
        1 => proptest::collection::vec(predicate(depth - 1), 2..4).prop_map(Predicate::And),
        1 => proptest::collection::vec(predicate(depth - 1), 2..4).prop_map(Predicate::Or),
        1 => predicate(depth - 1).prop_map(|p| Predicate::Not(Box::new(p))),
    ]
    .boxed()
}

fn query() -> impl Strategy<Value = QueryAst> {
    (proptest::option::of(predicate(2)), any::<bool>(), proptest::option::of(1u64..20), 0usize..3).prop_map(
        |(predicate, desc, limit, order)| {
            let order_by = match order {
                0 => None,
                1 => Some(col("price")),
                _ => Some(col("color")),
            }
            .map(|column| OrderBy { column, direction: if desc { Direction::Desc } else { Direction::Asc } });
            QueryAst {
                projection: Projection::Star,
                source: "backpacks__joined".into(),
                predicate,
                order_by,
                limit,
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn store_agrees_with_brute_force(ast in query()) {
        let table = backpacks();
        let (sql, params) = to_sqlite(&ast, &table.schema.primary_key);
        let got = engine().with_store(|s| s.query(&sql, &params)).unwrap();
        let joined = JoinedRows::build(&table.context, &table.extractions, &table.catalog);
        let want = reference::evaluate(&ast, &joined).unwrap();
        prop_assert_eq!(got, want, "{}", sql);
    }

    #[test]
    fn repair_never_leaves_the_catalog(pick in 0usize..1000, edit in 0usize..64, extra in "[a-z]") {
        let table = backpacks();
        let columns: Vec<&ColumnName> = table.catalog.entries.keys().collect();
        let column = columns[pick % columns.len()].clone();
        let values = table.catalog.values(&column).unwrap();
        let mut value: Vec<char> = values[pick % values.len()].chars().collect();
        match edit % 3 {
            0 => { value.insert(edit % (value.len() + 1), extra.chars().next().unwrap()); }
            1 if value.len() > 1 => { value.remove(edit % value.len()); }
            _ => { let i = edit % value.len(); value[i] = extra.chars().next().unwrap(); }
        }
        let mut ast = QueryAst::select_all("backpacks__joined");
        ast.predicate = Some(Predicate::Atom(Atom::new(column.clone(), Operator::Eq, Literal::text(value.iter().collect::<String>()))));
        let report = validate_query(&ast, &table.schema, &table.catalog);
        let (fixed, report) = repair_query(&ast, &report, &table.catalog);
        match report.status {
            ValidationStatus::Valid => prop_assert!(report.issues.is_empty()),
            ValidationStatus::Repaired => prop_assert!(!report.repairs.is_empty()),
            _ => {}
        }
        if report.is_executable() {
            for atom in fixed.predicate.as_ref().unwrap().top_level_atoms() {
                for lit in atom.literals() {
                    let Literal::Text(t) = lit else { continue };
                    prop_assert!(values.contains(t), "{} not in catalog", t);
                }
            }
        }
    }

    #[test]
    fn enumeration_ignores_row_order(rows in rows(), seed in any::<u64>()) {
        let mut shuffled = rows.clone();
        let n = shuffled.len();
        for i in 0..n {
            shuffled.swap(i, (seed as usize).wrapping_add(i * 7) % n);
        }
        let policy = CapPolicy { max_columns: 3, min_row_support: 0.0, ..CapPolicy::default() };
        let a = cap_columns(&consolidate_keys(&enumerate_catalog(&extraction_set(&rows))), &policy, n).unwrap();
        let b = cap_columns(&consolidate_keys(&enumerate_catalog(&extraction_set(&shuffled))), &policy, n).unwrap();
        prop_assert_eq!(&a.entries, &b.entries);
        prop_assert_eq!(&a.consolidation_map, &b.consolidation_map);
    }

    #[test]
    fn catalogs_stay_sorted_and_distinct(values in proptest::collection::vec("[a-z ]{1,6}", 0..30)) {
        let mut forward = EnumerationCatalog::new("t");
        let mut backward = EnumerationCatalog::new("t");
        for v in &values { forward.insert(col("color"), v.clone()); }
        for v in values.iter().rev() { backward.insert(col("color"), v.clone()); }
        prop_assert_eq!(&forward, &backward);
        if let Some(list) = forward.values(&col("color")) {
            prop_assert!(list.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn capping_respects_limits(rows in rows(), max in 1usize..5) {
        let set = extraction_set(&rows);
        let catalog = consolidate_keys(&enumerate_catalog(&set));
        let mandatory: Vec<ColumnName> = catalog.entries.keys().take(1).cloned().collect();
        let policy = CapPolicy { max_columns: max, min_row_support: 0.2, mandatory_keys: mandatory.clone(), ..CapPolicy::default() };
        let capped = cap_columns(&catalog, &policy, rows.len()).unwrap();
        prop_assert!(capped.entries.len() <= max);
        for m in &mandatory {
            prop_assert!(capped.entries.contains_key(m));
        }
    }

    #[test]
    fn consolidation_keeps_every_value(rows in rows()) {
        let raw = enumerate_catalog(&extraction_set(&rows));
        let merged = consolidate_keys(&raw);
        for (key, values) in &raw.entries {
            let target = merged.resolve(key).expect("every key survives consolidation");
            let kept = merged.values(target).unwrap();
            for v in values {
                prop_assert!(kept.contains(v), "{} lost {}", key, v);
            }
        }
        let before: BTreeSet<&String> = raw.entries.values().flatten().collect();
        let after: BTreeSet<&String> = merged.entries.values().flatten().collect();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn csv_round_trip_is_a_fixed_point(
        cells in proptest::collection::vec(("[a-z]{1,6}", 0u32..900, "[A-Za-z ,\"]{0,30}"), 1..10)
    ) {
        let mut csv = String::from("id,price,notes\n");
        for (i, (word, price, notes)) in cells.iter().enumerate() {
            csv.push_str(&format!("{word}{i},{price},\"{}\"\n", notes.replace('"', "\"\"")));
        }
        let cfg = IngestConfig::new(col("id"));
        let first = load_context_table(csv.as_bytes(), SourceFormat::Csv, "t", "t", &cfg).unwrap();
        let mut out = Vec::new();
        write_csv(&first, &mut out).unwrap();
        let second = load_context_table(out.as_slice(), SourceFormat::Csv, "t", "t", &cfg).unwrap();
        prop_assert_eq!(&first, &second);
        let text = collect_text_fields(&first, &cfg).unwrap();
        prop_assert!(!text.contains(&first.primary_key));
        prop_assert!(text.iter().all(|c| first.column(c).is_some()));
    }
}

#[test]
fn joined_view_keeps_cardinality_and_catalog_values() {
    for table in engine().tables() {
        let view = engine()
            .with_store(|s| s.query(&format!("SELECT * FROM {}", table.schema.view), &[]))
            .unwrap();
        assert_eq!(view.rows.len(), table.context.rows.len());
        for (column, values) in &table.catalog.entries {
            let i = view.column_index(column.as_str()).unwrap();
            for row in &view.rows {
                match &row[i] {
                    Value::Null => {}
                    Value::Text(t) => assert!(values.contains(t), "{column} = {t:?}"),
                    other => panic!("{column} holds {other:?}"),
                }
            }
        }
    }
}

#[test]
fn every_row_has_one_extraction() {
    for table in engine().tables() {
        let keys: BTreeSet<&str> = table.context.pk_values().collect();
        let extracted: BTreeSet<&str> = table.extractions.per_row.keys().map(String::as_str).collect();
        assert_eq!(keys, extracted);
        let context: BTreeMap<&str, ()> = table.context.columns.iter().map(|c| (c.name.as_str(), ())).collect();
        for column in table.catalog.entries.keys() {
            assert!(!context.contains_key(column.as_str()), "{column} collides with a context column");
        }
    }
}
