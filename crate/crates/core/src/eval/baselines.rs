//! Retrieval baselines over the context table only.

use std::collections::{BTreeMap, BTreeSet};

use crate::agent::tokens;
use crate::error::Result;
use crate::model::{ContextTable, Literal, Operator, Value, ValueKind};
use crate::tablegen::{context_table_name, Store};

use super::QueryIntent;

/// Keyword filter: each enumerated constraint becomes a substring match
/// (`LIKE '%value%'`, or `NOT LIKE` for inequality) over the free-text
/// columns; constraints on structured columns compare directly.
pub fn like_baseline(intent: &QueryIntent, context: &ContextTable, store: &Store) -> Result<BTreeSet<String>> {
    let mut clauses = Vec::new();
    let mut params = Vec::new();
    for c in &intent.constraints {
        if c.op == Operator::Any {
            continue;
        }
        let structured = context.column(&c.column).filter(|d| !context.text_columns.contains(&d.name));
        let value = match &c.value {
            Literal::Number(n) => Value::Number(*n),
            Literal::Text(t) => Value::Text(t.clone()),
        };
        if let Some(def) = structured {
            let sym = match c.op {
                Operator::Eq => "=",
                Operator::Neq => "!=",
                Operator::Lt => "<",
                Operator::Lte => "<=",
                Operator::Gt => ">",
                Operator::Gte => ">=",
                _ => continue,
            };
            clauses.push(format!("\"{}\" {sym} ?", def.name));
            params.push(value);
            continue;
        }
        let negate = matches!(c.op, Operator::Neq);
        let pattern = Value::Text(format!("%{value}%"));
        let any_text: Vec<String> = context
            .text_columns
            .iter()
            .map(|t| {
                params.push(pattern.clone());
                format!("coalesce(\"{t}\", '') LIKE ?")
            })
            .collect();
        if any_text.is_empty() {
            continue;
        }
        let joined = format!("({})", any_text.join(" OR "));
        clauses.push(if negate { format!("NOT {joined}") } else { joined });
    }
    let mut sql = format!(
        "SELECT \"{pk}\" FROM \"{table}\"",
        pk = context.primary_key,
        table = context_table_name(&context.table_id)
    );
    if !clauses.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&clauses.join(" AND "));
    }
    let rows = store.query(&sql, &params)?;
    Ok(rows.column_values(context.primary_key.as_str()).into_iter().collect())
}

/// Token-overlap ranking over every text-valued context column; the top `k`
/// rows with a non-zero score, ties broken by primary key.
pub fn lexical_baseline(intent: &QueryIntent, context: &ContextTable, k: usize) -> BTreeSet<String> {
    let query = tokens(&intent.description);
    let pk = context.pk_index();
    let text_cols: Vec<usize> = context
        .columns
        .iter()
        .enumerate()
        .filter(|(i, c)| *i != pk && c.kind == ValueKind::Text)
        .map(|(i, _)| i)
        .collect();
    let mut scored: BTreeMap<(std::cmp::Reverse<usize>, String), ()> = BTreeMap::new();
    for row in &context.rows {
        let Some(key) = row[pk].as_deref() else { continue };
        let text: Vec<&str> = text_cols.iter().filter_map(|&i| row[i].as_deref()).collect();
        let score = tokens(&text.join(" ")).intersection(&query).count();
        if score > 0 {
            scored.insert((std::cmp::Reverse(score), key.to_string()), ());
        }
    }
    scored.into_keys().take(k).map(|(_, key)| key).collect()
}
