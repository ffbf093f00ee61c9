//! The read-only SQL subset accepted from the model.
//!
//! Grammar: `docs/sql-subset.ebnf` at the repository root. A single
//! SELECT over one source, with an optional boolean WHERE tree, one ORDER BY
//! key and a LIMIT. Anything else is refused as unsupported syntax.

mod ast;
mod parse;

use thiserror::Error;

pub use ast::{Atom, Direction, OrderBy, Predicate, Projection, QueryAst};
pub use parse::parse_sql;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("SQL parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("unsupported SQL at byte {position}: {construct}")]
    Unsupported { position: usize, construct: String },
}

impl SqlError {
    pub(crate) fn parse(position: usize, message: impl Into<String>) -> Self {
        SqlError::Parse {
            position,
            message: message.into(),
        }
    }

    pub(crate) fn unsupported(position: usize, construct: impl Into<String>) -> Self {
        SqlError::Unsupported {
            position,
            construct: construct.into(),
        }
    }
}
