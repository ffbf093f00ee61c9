use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{ColumnName, Literal, Operand, Operator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    Star,
    Columns(Vec<ColumnName>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub column: ColumnName,
    pub op: Operator,
    pub operand: Operand,
}

impl Atom {
    pub fn new(column: ColumnName, op: Operator, literal: Literal) -> Self {
        Atom {
            column,
            op,
            operand: Operand::Single(literal),
        }
    }

    pub fn literals(&self) -> &[Literal] {
        match &self.operand {
            Operand::None => &[],
            Operand::Single(l) => std::slice::from_ref(l),
            Operand::List(ls) => ls,
        }
    }

    pub fn literals_mut(&mut self) -> &mut [Literal] {
        match &mut self.operand {
            Operand::None => &mut [],
            Operand::Single(l) => std::slice::from_mut(l),
            Operand::List(ls) => ls,
        }
    }
}

/// Boolean tree over atoms. `And`/`Or` always hold at least two children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicate {
    Atom(Atom),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    /// Conjunction of `parts`, collapsing the trivial cases.
    pub fn and(mut parts: Vec<Predicate>) -> Option<Predicate> {
        match parts.len() {
            0 => None,
            1 => parts.pop(),
            _ => Some(Predicate::And(parts)),
        }
    }

    /// Atoms joined to the root by AND only.
    pub fn top_level_atoms(&self) -> Vec<&Atom> {
        match self {
            Predicate::Atom(a) => vec![a],
            Predicate::And(children) => children.iter().flat_map(|c| c.top_level_atoms()).collect(),
            Predicate::Or(_) | Predicate::Not(_) => Vec::new(),
        }
    }

    /// Every atom with its location path, depth first.
    pub fn atoms_with_paths(&self) -> Vec<(String, &Atom)> {
        let mut out = Vec::new();
        self.walk("where".to_string(), &mut out);
        out
    }

    fn walk<'a>(&'a self, path: String, out: &mut Vec<(String, &'a Atom)>) {
        match self {
            Predicate::Atom(a) => out.push((path, a)),
            Predicate::And(cs) | Predicate::Or(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    c.walk(format!("{path}.{i}"), out);
                }
            }
            Predicate::Not(c) => c.walk(format!("{path}.not"), out),
        }
    }

    pub fn atoms_mut(&mut self) -> Vec<&mut Atom> {
        match self {
            Predicate::Atom(a) => vec![a],
            Predicate::And(cs) | Predicate::Or(cs) => cs.iter_mut().flat_map(|c| c.atoms_mut()).collect(),
            Predicate::Not(c) => c.atoms_mut(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderBy {
    pub column: ColumnName,
    pub direction: Direction,
}

/// A read-only single-source SELECT. No mutation is representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAst {
    pub projection: Projection,
    pub source: String,
    pub predicate: Option<Predicate>,
    pub order_by: Option<OrderBy>,
    pub limit: Option<u64>,
}

impl QueryAst {
    pub fn select_all(source: impl Into<String>) -> Self {
        QueryAst {
            projection: Projection::Star,
            source: source.into(),
            predicate: None,
            order_by: None,
            limit: None,
        }
    }

    /// Canonical SQL text; `parse_sql(&ast.to_string())` gives `ast` back.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

pub(crate) const KEYWORDS: &[&str] = &[
    "select", "from", "where", "and", "or", "not", "in", "like", "is", "any", "order", "by", "asc",
    "desc", "limit", "null", "true", "false",
];

/// Constructs that are valid SQL but deliberately outside the subset.
pub(crate) const UNSUPPORTED: &[&str] = &[
    "insert", "update", "delete", "drop", "create", "alter", "replace", "truncate", "attach",
    "detach", "pragma", "vacuum", "begin", "commit", "rollback", "with", "join", "inner", "left",
    "right", "outer", "cross", "natural", "union", "intersect", "except", "group", "having",
    "distinct", "offset", "between", "exists", "case", "null", "as", "glob", "regexp", "match",
    "escape", "collate", "returning", "into", "values", "set", "explain",
];

fn write_ident(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    let bare = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_lowercase() || c == '_')
        && name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        && !KEYWORDS.contains(&name)
        && !UNSUPPORTED.contains(&name);
    if bare {
        f.write_str(name)
    } else {
        write!(f, "\"{}\"", name.replace('"', "\"\""))
    }
}

fn write_literal(f: &mut fmt::Formatter<'_>, l: &Literal) -> fmt::Result {
    match l {
        Literal::Number(n) => write!(f, "{n}"),
        Literal::Text(t) => write!(f, "'{}'", t.replace('\'', "''")),
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_ident(f, self.column.as_str())?;
        let sym = match self.op {
            Operator::Eq => "=",
            Operator::Neq => "!=",
            Operator::Lt => "<",
            Operator::Lte => "<=",
            Operator::Gt => ">",
            Operator::Gte => ">=",
            Operator::Like => "LIKE",
            Operator::In => "IN",
            Operator::Any => return f.write_str(" IS ANY"),
        };
        write!(f, " {sym} ")?;
        match &self.operand {
            Operand::List(items) => {
                f.write_str("(")?;
                for (i, l) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write_literal(f, l)?;
                }
                f.write_str(")")
            }
            Operand::Single(l) => write_literal(f, l),
            Operand::None => Ok(()),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, c: &Predicate| match c {
            Predicate::And(_) | Predicate::Or(_) => write!(f, "({c})"),
            _ => write!(f, "{c}"),
        };
        match self {
            Predicate::Atom(a) => write!(f, "{a}"),
            Predicate::And(cs) | Predicate::Or(cs) => {
                let joiner = if matches!(self, Predicate::And(_)) { " AND " } else { " OR " };
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(joiner)?;
                    }
                    child(f, c)?;
                }
                Ok(())
            }
            Predicate::Not(c) => {
                f.write_str("NOT ")?;
                child(f, c)
            }
        }
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        match &self.projection {
            Projection::Star => f.write_str("*")?,
            Projection::Columns(cols) => {
                for (i, c) in cols.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write_ident(f, c.as_str())?;
                }
            }
        }
        f.write_str(" FROM ")?;
        write_ident(f, &self.source)?;
        if let Some(p) = &self.predicate {
            write!(f, " WHERE {p}")?;
        }
        if let Some(o) = &self.order_by {
            f.write_str(" ORDER BY ")?;
            write_ident(f, o.column.as_str())?;
            f.write_str(match o.direction {
                Direction::Asc => " ASC",
                Direction::Desc => " DESC",
            })?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}
