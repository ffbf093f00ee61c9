use super::ast::{Atom, Direction, OrderBy, Predicate, Projection, QueryAst, KEYWORDS, UNSUPPORTED};
use super::SqlError;
use crate::model::{ColumnName, Literal, Operand, Operator};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Str(String),
    Num(f64),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(sql: &str) -> Result<Vec<Token>, SqlError> {
    let chars: Vec<(usize, char)> = sql.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '\'' || c == '"' {
            let quote = c;
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(SqlError::parse(pos, "unterminated quoted text")),
                    Some(&(_, ch)) if ch == quote => {
                        if chars.get(i + 1).map(|x| x.1) == Some(quote) {
                            s.push(quote);
                            i += 2;
                        } else {
                            i += 1;
                            break;
                        }
                    }
                    Some(&(_, ch)) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            let tok = if quote == '\'' { Tok::Str(s) } else { Tok::Quoted(s) };
            out.push(Token { tok, pos });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|x| x.1.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().map(|x| x.1).collect();
            let n = text
                .parse::<f64>()
                .map_err(|_| SqlError::parse(pos, format!("malformed number {text:?}")))?;
            out.push(Token { tok: Tok::Num(n), pos });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().map(|x| x.1).collect();
            out.push(Token { tok: Tok::Word(word), pos });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().map(|x| x.1).collect();
        let sym = match two.as_str() {
            "!=" => Some("!="),
            "<>" => Some("!="),
            "<=" => Some("<="),
            ">=" => Some(">="),
            "--" | "/*" => return Err(SqlError::unsupported(pos, "comments")),
            "||" => return Err(SqlError::unsupported(pos, "string concatenation")),
            _ => None,
        };
        if let Some(sym) = sym {
            out.push(Token { tok: Tok::Sym(sym), pos });
            i += 2;
            continue;
        }
        let sym = match c {
            '*' => "*",
            ',' => ",",
            '(' => "(",
            ')' => ")",
            '=' => "=",
            '<' => "<",
            '>' => ">",
            ';' => ";",
            '-' => "-",
            '.' => ".",
            '+' | '/' | '%' => return Err(SqlError::unsupported(pos, "arithmetic")),
            other => return Err(SqlError::parse(pos, format!("unexpected character {other:?}"))),
        };
        out.push(Token { tok: Tok::Sym(sym), pos });
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |t| t.pos)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected {}", kw.to_uppercase())))
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), SqlError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected {sym:?}")))
        }
    }

    /// Error for the current token: unsupported when it names a construct
    /// deliberately left out of the subset.
    fn unexpected(&self, what: &str) -> SqlError {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Word(w)) if UNSUPPORTED.contains(&w.to_ascii_lowercase().as_str()) => {
                SqlError::unsupported(pos, w.to_uppercase())
            }
            Some(Tok::Word(_)) if matches!(self.tokens.get(self.at + 1).map(|t| &t.tok), Some(Tok::Sym("("))) => {
                SqlError::unsupported(pos, "function calls")
            }
            Some(Tok::Sym(".")) => SqlError::unsupported(pos, "qualified names"),
            Some(t) => SqlError::parse(pos, format!("{what}, found {t:?}")),
            None => SqlError::parse(pos, format!("{what}, found end of input")),
        }
    }

    fn ident(&mut self) -> Result<String, SqlError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Word(w)) => {
                let lower = w.to_ascii_lowercase();
                if KEYWORDS.contains(&lower.as_str()) || UNSUPPORTED.contains(&lower.as_str()) {
                    return Err(self.unexpected("expected an identifier"));
                }
                self.at += 1;
                if matches!(self.peek(), Some(Tok::Sym("("))) {
                    return Err(SqlError::unsupported(pos, "function calls"));
                }
                if matches!(self.peek(), Some(Tok::Sym("."))) {
                    return Err(SqlError::unsupported(self.pos(), "qualified names"));
                }
                Ok(lower)
            }
            Some(Tok::Quoted(q)) => {
                self.at += 1;
                Ok(q)
            }
            _ => Err(self.unexpected("expected an identifier")),
        }
    }

    fn column(&mut self) -> Result<ColumnName, SqlError> {
        let pos = self.pos();
        let raw = self.ident()?;
        ColumnName::new(&raw).map_err(|e| SqlError::parse(pos, e.to_string()))
    }

    fn literal(&mut self) -> Result<Literal, SqlError> {
        let negative = self.eat_sym("-");
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.at += 1;
                Ok(Literal::Number(if negative { -n } else { n }))
            }
            Some(Tok::Str(s)) if !negative => {
                self.at += 1;
                Ok(Literal::Text(s))
            }
            _ => Err(self.unexpected("expected a literal")),
        }
    }

    fn query(&mut self) -> Result<QueryAst, SqlError> {
        if !self.is_kw("select") {
            return Err(match self.peek() {
                Some(Tok::Word(w)) => SqlError::unsupported(self.pos(), format!("{} statements", w.to_uppercase())),
                _ => self.unexpected("expected SELECT"),
            });
        }
        self.at += 1;
        let projection = if self.eat_sym("*") {
            Projection::Star
        } else {
            let mut cols = vec![self.column()?];
            while self.eat_sym(",") {
                cols.push(self.column()?);
            }
            Projection::Columns(cols)
        };
        self.expect_kw("from")?;
        if matches!(self.peek(), Some(Tok::Sym("("))) {
            return Err(SqlError::unsupported(self.pos(), "subqueries"));
        }
        let source = self.ident()?;
        if matches!(self.peek(), Some(Tok::Sym(","))) {
            return Err(SqlError::unsupported(self.pos(), "multiple sources"));
        }
        let predicate = if self.eat_kw("where") { Some(self.or_expr()?) } else { None };
        let order_by = if self.eat_kw("order") {
            self.expect_kw("by")?;
            let column = self.column()?;
            let direction = if self.eat_kw("desc") {
                Direction::Desc
            } else {
                self.eat_kw("asc");
                Direction::Asc
            };
            if matches!(self.peek(), Some(Tok::Sym(","))) {
                return Err(SqlError::unsupported(self.pos(), "multiple sort keys"));
            }
            Some(OrderBy { column, direction })
        } else {
            None
        };
        let limit = if self.eat_kw("limit") {
            let pos = self.pos();
            match self.peek().cloned() {
                Some(Tok::Num(n)) if n >= 1.0 && n.fract() == 0.0 && n <= u64::MAX as f64 => {
                    self.at += 1;
                    Some(n as u64)
                }
                _ => return Err(SqlError::parse(pos, "LIMIT needs a positive integer")),
            }
        } else {
            None
        };
        self.eat_sym(";");
        if self.at < self.tokens.len() {
            if matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case("select")) {
                return Err(SqlError::unsupported(self.pos(), "multiple statements"));
            }
            return Err(self.unexpected("expected end of statement"));
        }
        Ok(QueryAst {
            projection,
            source,
            predicate,
            order_by,
            limit,
        })
    }

    fn or_expr(&mut self) -> Result<Predicate, SqlError> {
        let mut parts = vec![self.and_expr()?];
        while self.eat_kw("or") {
            parts.push(self.and_expr()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Predicate::Or(parts) })
    }

    fn and_expr(&mut self) -> Result<Predicate, SqlError> {
        let mut parts = vec![self.not_expr()?];
        while self.eat_kw("and") {
            parts.push(self.not_expr()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Predicate::And(parts) })
    }

    fn not_expr(&mut self) -> Result<Predicate, SqlError> {
        if self.eat_kw("not") {
            return Ok(Predicate::Not(Box::new(self.not_expr()?)));
        }
        if self.eat_sym("(") {
            if self.is_kw("select") {
                return Err(SqlError::unsupported(self.pos(), "subqueries"));
            }
            let inner = self.or_expr()?;
            self.expect_sym(")")?;
            return Ok(inner);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Predicate, SqlError> {
        let column = self.column()?;
        let negated = self.eat_kw("not");
        let atom = if self.eat_kw("in") {
            self.expect_sym("(")?;
            if self.is_kw("select") {
                return Err(SqlError::unsupported(self.pos(), "subqueries"));
            }
            let mut items = vec![self.literal()?];
            while self.eat_sym(",") {
                items.push(self.literal()?);
            }
            self.expect_sym(")")?;
            Atom { column, op: Operator::In, operand: Operand::List(items) }
        } else if self.eat_kw("like") {
            let pos = self.pos();
            match self.literal()? {
                lit @ Literal::Text(_) => Atom::new(column, Operator::Like, lit),
                Literal::Number(_) => return Err(SqlError::parse(pos, "LIKE needs a text pattern")),
            }
        } else if negated {
            return Err(self.unexpected("expected IN or LIKE after NOT"));
        } else if self.eat_kw("is") {
            if self.eat_kw("any") {
                Atom { column, op: Operator::Any, operand: Operand::None }
            } else {
                return Err(self.unexpected("expected ANY after IS"));
            }
        } else {
            let op = match self.peek() {
                Some(Tok::Sym("=")) => Operator::Eq,
                Some(Tok::Sym("!=")) => Operator::Neq,
                Some(Tok::Sym("<")) => Operator::Lt,
                Some(Tok::Sym("<=")) => Operator::Lte,
                Some(Tok::Sym(">")) => Operator::Gt,
                Some(Tok::Sym(">=")) => Operator::Gte,
                _ => return Err(self.unexpected("expected a comparison")),
            };
            self.at += 1;
            Atom::new(column, op, self.literal()?)
        };
        let atom = Predicate::Atom(atom);
        Ok(if negated { Predicate::Not(Box::new(atom)) } else { atom })
    }
}

/// Parses one statement of the SELECT-only subset.
pub fn parse_sql(sql: &str) -> Result<QueryAst, SqlError> {
    let tokens = lex(sql)?;
    let mut parser = Parser {
        tokens,
        at: 0,
        end: sql.len(),
    };
    parser.query()
}
