//! Brute-force evaluation of a query AST over joined rows built in memory.
//!
//! Nothing here touches the SQL store: the joined rows are assembled from the
//! context table, the extractions and the catalog, and predicates are
//! evaluated with SQL three-valued logic. Tests compare this against what the
//! store returns for the same AST.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{ColumnName, ContextTable, EnumerationCatalog, ExtractionSet, Literal, Operand, Operator, Value};
use crate::sql::{Direction, Predicate, Projection, QueryAst};
use crate::tablegen::ResultSet;

/// The joined relation as plain rows: context columns, then one column per
/// catalog entry in name order.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedRows {
    pub columns: Vec<ColumnName>,
    pub primary_key: ColumnName,
    pub rows: Vec<Vec<Value>>,
}

impl JoinedRows {
    pub fn build(context: &ContextTable, extractions: &ExtractionSet, catalog: &EnumerationCatalog) -> Self {
        let mut columns: Vec<ColumnName> = context.columns.iter().map(|c| c.name.clone()).collect();
        let inferred: Vec<&ColumnName> = catalog.entries.keys().collect();
        columns.extend(inferred.iter().map(|c| (*c).clone()));
        let pk = context.pk_index();
        let rows = context
            .rows
            .iter()
            .filter_map(|row| {
                let key = row[pk].as_deref()?;
                let extraction = extractions.per_row.get(key)?;
                let mut out: Vec<Value> = (0..context.columns.len()).map(|i| context.typed_cell(row, i)).collect();
                for column in &inferred {
                    let value = extraction
                        .tuples
                        .iter()
                        .rev()
                        .filter(|t| catalog.resolve(&t.key) == Some(*column))
                        .find(|t| catalog.values(column).is_some_and(|vs| vs.contains(&t.value)))
                        .map_or(Value::Null, |t| Value::Text(t.value.clone()));
                    out.push(value);
                }
                Some(out)
            })
            .collect();
        JoinedRows { columns, primary_key: context.primary_key.clone(), rows }
    }

    fn index(&self, column: &ColumnName) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| Error::Contract(format!("no column {column} in the joined rows")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }

    fn from_bool(b: bool) -> Truth {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }
}

fn literal_value(l: &Literal) -> Value {
    match l {
        Literal::Number(n) => Value::Number(*n),
        Literal::Text(t) => Value::Text(t.clone()),
    }
}

/// Storage-class ordering: null, then numbers, then text (byte order).
fn sql_cmp(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Null, Value::Null) => Ordering::Equal,
        (Value::Null, _) => Ordering::Less,
        (_, Value::Null) => Ordering::Greater,
        (Value::Number(x), Value::Number(y)) => x.total_cmp(y),
        (Value::Number(_), Value::Text(_)) => Ordering::Less,
        (Value::Text(_), Value::Number(_)) => Ordering::Greater,
        (Value::Text(x), Value::Text(y)) => x.as_bytes().cmp(y.as_bytes()),
    }
}

fn compare(op: Operator, cell: &Value, lit: &Value) -> Truth {
    if cell.is_null() {
        return Truth::Unknown;
    }
    let ord = sql_cmp(cell, lit);
    Truth::from_bool(match op {
        Operator::Eq => ord == Ordering::Equal,
        Operator::Neq => ord != Ordering::Equal,
        Operator::Lt => ord == Ordering::Less,
        Operator::Lte => ord != Ordering::Greater,
        Operator::Gt => ord == Ordering::Greater,
        Operator::Gte => ord != Ordering::Less,
        _ => unreachable!("not a comparison"),
    })
}

/// SQL LIKE with `%` and `_`, case-insensitive for ASCII letters only.
pub fn like_matches(text: &str, pattern: &str) -> bool {
    let t: Vec<char> = text.chars().map(|c| c.to_ascii_lowercase()).collect();
    let p: Vec<char> = pattern.chars().map(|c| c.to_ascii_lowercase()).collect();
    // reachable[j]: pattern prefix of length j matches the text consumed so far
    let mut reachable = vec![false; p.len() + 1];
    reachable[0] = true;
    for j in 0..p.len() {
        if p[j] == '%' && reachable[j] {
            reachable[j + 1] = true;
        }
    }
    for &c in &t {
        let mut next = vec![false; p.len() + 1];
        for j in 0..p.len() {
            if !reachable[j] {
                continue;
            }
            match p[j] {
                '%' => {
                    next[j] = true;
                }
                '_' => next[j + 1] = true,
                pc if pc == c => next[j + 1] = true,
                _ => {}
            }
        }
        for j in 0..p.len() {
            if p[j] == '%' && next[j] {
                next[j + 1] = true;
            }
        }
        reachable = next;
    }
    reachable[p.len()]
}

fn eval(p: &Predicate, row: &[Value], joined: &JoinedRows) -> Result<Truth> {
    Ok(match p {
        Predicate::Atom(a) => {
            let cell = &row[joined.index(&a.column)?];
            match (a.op, &a.operand) {
                (Operator::Any, _) => Truth::True,
                (Operator::In, Operand::List(items)) => {
                    if cell.is_null() {
                        Truth::Unknown
                    } else {
                        Truth::from_bool(items.iter().any(|l| sql_cmp(cell, &literal_value(l)) == Ordering::Equal))
                    }
                }
                (Operator::Like, Operand::Single(l)) => match (cell, l) {
                    (Value::Null, _) => Truth::Unknown,
                    (v, Literal::Text(pat)) => Truth::from_bool(like_matches(&v.to_string(), pat)),
                    (v, Literal::Number(n)) => Truth::from_bool(like_matches(&v.to_string(), &n.to_string())),
                },
                (op, Operand::Single(l)) => compare(op, cell, &literal_value(l)),
                (op, operand) => return Err(Error::Contract(format!("malformed atom {op} {operand:?}"))),
            }
        }
        Predicate::And(cs) => {
            let mut acc = Truth::True;
            for c in cs {
                match eval(c, row, joined)? {
                    Truth::False => return Ok(Truth::False),
                    Truth::Unknown => acc = Truth::Unknown,
                    Truth::True => {}
                }
            }
            acc
        }
        Predicate::Or(cs) => {
            let mut acc = Truth::False;
            for c in cs {
                match eval(c, row, joined)? {
                    Truth::True => return Ok(Truth::True),
                    Truth::Unknown => acc = Truth::Unknown,
                    Truth::False => {}
                }
            }
            acc
        }
        Predicate::Not(c) => eval(c, row, joined)?.not(),
    })
}

/// Evaluates `ast` row by row. Ordering matches the store: the requested key
/// (nulls first ascending, last descending), then the primary key.
pub fn evaluate(ast: &QueryAst, joined: &JoinedRows) -> Result<ResultSet> {
    let pk = joined.index(&joined.primary_key)?;
    let mut kept: Vec<&Vec<Value>> = Vec::new();
    for row in &joined.rows {
        let keep = match &ast.predicate {
            None => true,
            Some(p) => eval(p, row, joined)? == Truth::True,
        };
        if keep {
            kept.push(row);
        }
    }
    let order = match &ast.order_by {
        Some(o) => Some((joined.index(&o.column)?, o.direction)),
        None => None,
    };
    kept.sort_by(|a, b| {
        let primary = match order {
            Some((i, Direction::Asc)) => sql_cmp(&a[i], &b[i]),
            Some((i, Direction::Desc)) => sql_cmp(&b[i], &a[i]),
            None => Ordering::Equal,
        };
        primary.then_with(|| sql_cmp(&a[pk], &b[pk]))
    });
    if let Some(n) = ast.limit {
        kept.truncate(usize::try_from(n).unwrap_or(usize::MAX));
    }

    let picks: Vec<usize> = match &ast.projection {
        Projection::Star => (0..joined.columns.len()).collect(),
        Projection::Columns(cols) => cols.iter().map(|c| joined.index(c)).collect::<Result<_>>()?,
    };
    Ok(ResultSet {
        columns: picks.iter().map(|&i| joined.columns[i].to_string()).collect(),
        rows: kept.iter().map(|r| picks.iter().map(|&i| r[i].clone()).collect()).collect(),
    })
}
