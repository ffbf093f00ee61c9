//! Question to SQL over the joined view: prompt, extract, parse, validate,
//! repair, and a single retry with the validator's feedback.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{build_text2sql_prompt, estimate_tokens, Gateway, PromptTemplate};
use crate::model::{ColumnName, DialogState, EnumerationCatalog, Literal, Operand, Operator, Value, ValueKind};
use crate::sql::{parse_sql, Atom, Direction, Predicate, Projection, QueryAst};
use crate::tablegen::{quote_ident, JoinedSchema, Origin, ResultSet, Store};

/// Largest normalized edit distance at which a literal is rewritten to an
/// enumerated value.
pub const REPAIR_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationStatus {
    Valid,
    Repaired,
    Rejected,
}

impl std::fmt::Display for ValidationStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ValidationStatus::Valid => "valid",
            ValidationStatus::Repaired => "repaired",
            ValidationStatus::Rejected => "rejected",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    UnknownColumn,
    NonEnumValue,
    TypeMismatch,
    UnsupportedSyntax,
}

impl std::fmt::Display for IssueKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IssueKind::UnknownColumn => "unknown_column",
            IssueKind::NonEnumValue => "non_enum_value",
            IssueKind::TypeMismatch => "type_mismatch",
            IssueKind::UnsupportedSyntax => "unsupported_syntax",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub kind: IssueKind,
    /// Path into the query, e.g. `where.1.value.0` or `select.2`.
    pub location: String,
    pub detail: String,
    /// Nearest enumerated value, for `non_enum_value`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repair {
    pub location: String,
    pub before: String,
    pub after: String,
}

/// Outcome of checking a query against the schema and the enumerations.
/// `issues` holds only what is still unresolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub status: ValidationStatus,
    pub issues: Vec<Issue>,
    pub repairs: Vec<Repair>,
}

impl ValidationReport {
    pub fn is_executable(&self) -> bool {
        self.status != ValidationStatus::Rejected
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedQuery {
    pub question: String,
    /// Rendering of `ast`, after repairs.
    pub raw_sql: String,
    /// What the model actually answered.
    pub completion: String,
    pub ast: QueryAst,
    pub report: ValidationReport,
    pub prompt_tokens: usize,
    pub attempts: usize,
}

/// Normalized edit distance: optimal string alignment distance over the
/// length in characters of the longer string.
pub fn normalized_distance(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    strsim::osa_distance(a, b) as f64 / longest as f64
}

/// Closest value by [`normalized_distance`]; ties go to the smallest value.
pub fn nearest_value<'a>(literal: &str, values: &'a [String]) -> Option<(&'a str, f64)> {
    let needle = literal.trim().to_lowercase();
    values
        .iter()
        .map(|v| (v.as_str(), normalized_distance(&needle, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)))
}

fn kind_name(l: &Literal) -> &'static str {
    match l {
        Literal::Number(_) => "number",
        Literal::Text(_) => "text",
    }
}

/// Checks columns, operator/type compatibility and enumerated literals.
pub fn validate_query(ast: &QueryAst, schema: &JoinedSchema, catalog: &EnumerationCatalog) -> ValidationReport {
    let mut issues = Vec::new();
    let unknown = |location: String, column: &ColumnName, issues: &mut Vec<Issue>| {
        issues.push(Issue {
            kind: IssueKind::UnknownColumn,
            location,
            detail: format!("{column} is not a column of {}", schema.view),
            suggestion: None,
        });
    };

    if ast.source != schema.view {
        issues.push(Issue {
            kind: IssueKind::UnsupportedSyntax,
            location: "from".into(),
            detail: format!("queries must read {}, not {}", schema.view, ast.source),
            suggestion: None,
        });
    }
    if let Projection::Columns(cols) = &ast.projection {
        for (i, c) in cols.iter().enumerate() {
            if schema.column(c).is_none() {
                unknown(format!("select.{i}"), c, &mut issues);
            }
        }
    }
    if let Some(o) = &ast.order_by {
        if schema.column(&o.column).is_none() {
            unknown("order_by".into(), &o.column, &mut issues);
        }
    }

    let atoms = ast.predicate.as_ref().map(Predicate::atoms_with_paths).unwrap_or_default();
    for (path, atom) in atoms {
        let Some(column) = schema.column(&atom.column) else {
            unknown(path, &atom.column, &mut issues);
            continue;
        };
        if atom.op == Operator::Any {
            continue;
        }
        let mismatch = |detail: String| Issue {
            kind: IssueKind::TypeMismatch,
            location: path.clone(),
            detail,
            suggestion: None,
        };
        if atom.op.is_ordering() && column.kind != ValueKind::Number {
            issues.push(mismatch(format!("{} cannot be ordered with {} ({} column)", atom.column, atom.op, column.kind)));
            continue;
        }
        if atom.op == Operator::Like && column.kind == ValueKind::Number {
            issues.push(mismatch(format!("LIKE on numeric column {}", atom.column)));
            continue;
        }
        let expected = if column.kind == ValueKind::Number { "number" } else { "text" };
        let bad: Vec<_> = atom.literals().iter().filter(|l| kind_name(l) != expected).collect();
        if let Some(l) = bad.first() {
            issues.push(mismatch(format!(
                "{} is a {} column but {l} is a {}",
                atom.column,
                column.kind,
                kind_name(l)
            )));
            continue;
        }
        let enumerated = matches!(atom.op, Operator::Eq | Operator::Neq | Operator::In);
        if column.origin != Origin::Inference || !enumerated {
            continue;
        }
        let values = catalog.values(&atom.column).unwrap_or_default();
        for (i, l) in atom.literals().iter().enumerate() {
            let Literal::Text(text) = l else { continue };
            if values.binary_search(text).is_ok() {
                continue;
            }
            let nearest = nearest_value(text, values);
            let detail = match nearest {
                Some((v, d)) => format!("{text:?} is not a value of {}; nearest is {v:?} (distance {d:.3})", atom.column),
                None => format!("{text:?} is not a value of {}", atom.column),
            };
            issues.push(Issue {
                kind: IssueKind::NonEnumValue,
                location: format!("{path}.value.{i}"),
                detail,
                suggestion: nearest.map(|(v, _)| v.to_string()),
            });
        }
    }

    ValidationReport {
        status: if issues.is_empty() { ValidationStatus::Valid } else { ValidationStatus::Rejected },
        issues,
        repairs: Vec::new(),
    }
}

/// Rewrites non-enumerated literals to their nearest enumerated value when
/// within [`REPAIR_THRESHOLD`]. Other issues are left in place, in which case
/// the query stays rejected.
pub fn repair_query(
    ast: &QueryAst,
    report: &ValidationReport,
    catalog: &EnumerationCatalog,
) -> (QueryAst, ValidationReport) {
    if report.issues.is_empty() {
        return (ast.clone(), report.clone());
    }
    let mut fixed = ast.clone();
    let paths: Vec<String> = ast
        .predicate
        .as_ref()
        .map(|p| p.atoms_with_paths().into_iter().map(|(path, _)| path).collect())
        .unwrap_or_default();
    let mut atoms: Vec<&mut Atom> = fixed.predicate.as_mut().map(Predicate::atoms_mut).unwrap_or_default();

    let mut remaining = Vec::new();
    let mut repairs = report.repairs.clone();
    for issue in &report.issues {
        let target = (issue.kind == IssueKind::NonEnumValue)
            .then(|| locate_literal(&issue.location, &paths))
            .flatten();
        let Some((atom_idx, lit_idx)) = target else {
            remaining.push(issue.clone());
            continue;
        };
        let atom = &mut atoms[atom_idx];
        let values = catalog.values(&atom.column).unwrap_or_default();
        let Some(Literal::Text(before)) = atom.literals().get(lit_idx).cloned() else {
            remaining.push(issue.clone());
            continue;
        };
        match nearest_value(&before, values) {
            Some((after, d)) if d <= REPAIR_THRESHOLD => {
                atom.literals_mut()[lit_idx] = Literal::Text(after.to_string());
                repairs.push(Repair {
                    location: issue.location.clone(),
                    before,
                    after: after.to_string(),
                });
            }
            _ => remaining.push(issue.clone()),
        }
    }

    let status = if remaining.is_empty() { ValidationStatus::Repaired } else { ValidationStatus::Rejected };
    (fixed, ValidationReport { status, issues: remaining, repairs })
}

fn locate_literal(location: &str, paths: &[String]) -> Option<(usize, usize)> {
    let (path, index) = location.rsplit_once(".value.")?;
    let atom = paths.iter().position(|p| p == path)?;
    Some((atom, index.parse().ok()?))
}

/// The first SQL statement in a completion: fenced code is preferred, and the
/// statement ends at the first `;` outside quotes or at a blank line.
pub fn extract_statement(completion: &str) -> Option<String> {
    let mut body = completion;
    if let Some(start) = completion.find("```") {
        let after = &completion[start + 3..];
        let after = after.split_once('\n').map_or("", |(_, rest)| rest);
        body = after.split("```").next().unwrap_or(after);
    }
    let lower = body.to_ascii_lowercase();
    let start = [
        "select", "with", "insert", "update", "delete", "drop", "create", "alter", "replace", "pragma", "attach",
    ]
    .iter()
    .filter_map(|kw| {
        lower.match_indices(kw).map(|(i, _)| i).find(|&i| {
            let before = lower[..i].chars().next_back();
            let after = lower[i + kw.len()..].chars().next();
            !before.is_some_and(|c| c.is_alphanumeric() || c == '_') && !after.is_some_and(|c| c.is_alphanumeric() || c == '_')
        })
    })
    .min()?;

    let text = &body[start..];
    let mut quote: Option<char> = None;
    let mut end = text.len();
    let mut prev_newline = false;
    for (i, c) in text.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '\'' || c == '"' => quote = Some(c),
            None if c == ';' => {
                end = i;
                break;
            }
            None if c == '\n' && prev_newline => {
                end = i;
                break;
            }
            None => {}
        }
        if !c.is_whitespace() || c == '\n' {
            prev_newline = c == '\n';
        }
    }
    let stmt = text[..end].trim();
    (!stmt.is_empty()).then(|| stmt.to_string())
}

fn compile(completion: &str) -> std::result::Result<QueryAst, String> {
    let stmt = extract_statement(completion).ok_or_else(|| "no SQL statement found".to_string())?;
    parse_sql(&stmt).map_err(|e| e.to_string())
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").replace("###", "#")
}

/// Compiles `question` into a validated query. A rejected or unparseable
/// first answer is retried once with the problems appended to the prompt.
pub fn text_to_sql(
    question: &str,
    schema: &JoinedSchema,
    catalog: &EnumerationCatalog,
    state: &DialogState,
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Result<GeneratedQuery> {
    if question.trim().is_empty() {
        return Err(Error::Contract("question is empty".into()));
    }
    let prompt = build_text2sql_prompt(question, schema, catalog, state, template)?;
    let mut text = prompt.text;
    let mut rejected: Option<GeneratedQuery> = None;
    let mut failure: Option<(String, String)> = None;

    for attempt in 1..=2 {
        let completion = gateway.complete(&text)?;
        let feedback = match compile(&completion) {
            Err(reason) => {
                let fb = format!("it could not be parsed: {reason}");
                failure = Some((completion.clone(), reason));
                fb
            }
            Ok(ast) => {
                let report = validate_query(&ast, schema, catalog);
                let (ast, report) = if report.issues.is_empty() { (ast, report) } else { repair_query(&ast, &report, catalog) };
                let query = GeneratedQuery {
                    question: question.to_string(),
                    raw_sql: ast.render(),
                    completion: completion.clone(),
                    ast,
                    report,
                    prompt_tokens: estimate_tokens(&text),
                    attempts: attempt,
                };
                if query.report.is_executable() {
                    return Ok(query);
                }
                let fb = query
                    .report
                    .issues
                    .iter()
                    .map(|i| format!("- {}", single_line(&i.detail)))
                    .collect::<Vec<_>>()
                    .join("\n");
                rejected = Some(query);
                fb
            }
        };
        if attempt == 1 {
            text = format!(
                "{}\n### Feedback\nYour previous answer `{}` was rejected:\n{feedback}\nUse only the listed columns and enumerated values.\n### SQL\n",
                text.trim_end(),
                single_line(&completion)
            );
        }
    }
    match (rejected, failure) {
        (Some(q), _) => Ok(q),
        (None, Some((completion, reason))) => Err(Error::SemanticParse { completion, reason }),
        (None, None) => unreachable!("two attempts always leave an outcome"),
    }
}

/// SQLite text and bound parameters for `ast`. `IS ANY` lowers to true and
/// rows are ordered by the primary key after any requested ordering.
pub fn to_sqlite(ast: &QueryAst, primary_key: &ColumnName) -> (String, Vec<Value>) {
    let mut params = Vec::new();
    let projection = match &ast.projection {
        Projection::Star => "*".to_string(),
        Projection::Columns(cols) => cols.iter().map(|c| quote_ident(c.as_str())).collect::<Vec<_>>().join(", "),
    };
    let mut sql = format!("SELECT {projection} FROM {}", quote_ident(&ast.source));
    if let Some(p) = &ast.predicate {
        sql.push_str(" WHERE ");
        sql.push_str(&lower_predicate(p, &mut params));
    }
    let pk = quote_ident(primary_key.as_str());
    match &ast.order_by {
        Some(o) => {
            let dir = match o.direction {
                Direction::Asc => "ASC",
                Direction::Desc => "DESC",
            };
            sql.push_str(&format!(" ORDER BY {} {dir}, {pk} ASC", quote_ident(o.column.as_str())));
        }
        None => sql.push_str(&format!(" ORDER BY {pk} ASC")),
    }
    if let Some(n) = ast.limit {
        sql.push_str(&format!(" LIMIT {n}"));
    }
    (sql, params)
}

fn bind(l: &Literal, params: &mut Vec<Value>) -> &'static str {
    params.push(match l {
        Literal::Number(n) => Value::Number(*n),
        Literal::Text(t) => Value::Text(t.clone()),
    });
    "?"
}

fn lower_predicate(p: &Predicate, params: &mut Vec<Value>) -> String {
    match p {
        Predicate::Atom(a) => {
            let col = quote_ident(a.column.as_str());
            match (&a.op, &a.operand) {
                (Operator::Any, _) => "1 = 1".to_string(),
                (Operator::In, Operand::List(items)) => {
                    let marks: Vec<&str> = items.iter().map(|l| bind(l, params)).collect();
                    format!("{col} IN ({})", marks.join(", "))
                }
                (op, Operand::Single(l)) => {
                    let sym = match op {
                        Operator::Eq => "=",
                        Operator::Neq => "!=",
                        Operator::Lt => "<",
                        Operator::Lte => "<=",
                        Operator::Gt => ">",
                        Operator::Gte => ">=",
                        Operator::Like => "LIKE",
                        Operator::In | Operator::Any => unreachable!("handled above"),
                    };
                    format!("{col} {sym} {}", bind(l, params))
                }
                (op, operand) => unreachable!("parser never pairs {op} with {operand:?}"),
            }
        }
        Predicate::And(cs) | Predicate::Or(cs) => {
            let joiner = if matches!(p, Predicate::And(_)) { " AND " } else { " OR " };
            let parts: Vec<String> = cs.iter().map(|c| format!("({})", lower_predicate(c, params))).collect();
            parts.join(joiner)
        }
        Predicate::Not(c) => format!("NOT ({})", lower_predicate(c, params)),
    }
}

/// Runs a valid or repaired query against the joined view.
pub fn execute(query: &GeneratedQuery, schema: &JoinedSchema, store: &Store) -> Result<ResultSet> {
    if !query.report.is_executable() {
        return Err(Error::Contract(format!("query {:?} was rejected and cannot run", query.raw_sql)));
    }
    if query.ast.source != schema.view {
        return Err(Error::Contract(format!("query reads {} instead of {}", query.ast.source, schema.view)));
    }
    let (sql, params) = to_sqlite(&query.ast, &schema.primary_key);
    tracing::debug!(%sql, "executing");
    store.query(&sql, &params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedProvider;
    use crate::reference::{evaluate, JoinedRows};
    use crate::testkit::{build, col, gateway};
    use std::sync::Arc;

    fn lit(s: &str) -> Literal {
        Literal::text(s)
    }

    fn generate(question: &str) -> (crate::testkit::Built, GeneratedQuery) {
        let b = build();
        let q = text_to_sql(
            question,
            &b.schema,
            &b.catalog,
            &DialogState::new("backpacks"),
            &gateway(),
            &PromptTemplate::default_text2sql(),
        )
        .unwrap();
        (b, q)
    }

    fn check(sql: &str) -> ValidationReport {
        let b = build();
        validate_query(&parse_sql(sql).unwrap(), &b.schema, &b.catalog)
    }

    #[test]
    fn distance_matches_hand_count() {
        // one substitution ("re" -> "er" is a transposition) over eight characters
        assert_eq!(normalized_distance("15 litre", "15 liter"), 1.0 / 8.0);
        assert_eq!(normalized_distance("", ""), 0.0);
        assert_eq!(normalized_distance("abc", "abc"), 0.0);
    }

    #[test]
    fn enumerated_value_is_valid() {
        let r = check("SELECT * FROM backpacks__joined WHERE product_size = '15 liter'");
        assert_eq!(r.status, ValidationStatus::Valid);
        assert!(r.issues.is_empty());
    }

    #[test]
    fn unknown_column_is_flagged() {
        let r = check("SELECT * FROM backpacks__joined WHERE wingspan = '2m'");
        assert_eq!(r.issues.len(), 1);
        assert_eq!(r.issues[0].kind, IssueKind::UnknownColumn);
        assert_eq!(r.issues[0].location, "where");
    }

    #[test]
    fn non_enum_value_suggests_nearest() {
        let r = check("SELECT * FROM backpacks__joined WHERE price < 300 AND product_size = '15 litre'");
        assert_eq!(r.issues.len(), 1);
        assert_eq!(r.issues[0].kind, IssueKind::NonEnumValue);
        assert_eq!(r.issues[0].location, "where.1.value.0");
        assert_eq!(r.issues[0].suggestion.as_deref(), Some("15 liter"));
    }

    #[test]
    fn type_mismatches_and_wrong_source() {
        let r = check("SELECT * FROM backpacks__joined WHERE color < 'red' OR price = 'cheap' OR price LIKE '1%'");
        assert_eq!(r.issues.iter().filter(|i| i.kind == IssueKind::TypeMismatch).count(), 3);
        let r = check("SELECT * FROM perfumes__joined");
        assert_eq!(r.issues[0].kind, IssueKind::UnsupportedSyntax);
        let r = check("SELECT wingspan FROM backpacks__joined ORDER BY altitude DESC");
        assert_eq!(r.issues.len(), 2);
    }

    #[test]
    fn repair_rewrites_near_literal() {
        let b = build();
        let ast = parse_sql("SELECT * FROM backpacks__joined WHERE product_size = '15 litre'").unwrap();
        let report = validate_query(&ast, &b.schema, &b.catalog);
        let (fixed, report) = repair_query(&ast, &report, &b.catalog);
        assert_eq!(report.status, ValidationStatus::Repaired);
        assert_eq!(
            report.repairs,
            vec![Repair { location: "where.value.0".into(), before: "15 litre".into(), after: "15 liter".into() }]
        );
        assert_eq!(fixed.render(), "SELECT * FROM backpacks__joined WHERE product_size = '15 liter'");
        assert_eq!(validate_query(&fixed, &b.schema, &b.catalog).status, ValidationStatus::Valid);
    }

    #[test]
    fn repair_leaves_far_literals_and_unknown_columns() {
        let b = build();
        let ast = parse_sql("SELECT * FROM backpacks__joined WHERE product_size = 'banana' AND wingspan = 'x'").unwrap();
        let report = validate_query(&ast, &b.schema, &b.catalog);
        let (fixed, report) = repair_query(&ast, &report, &b.catalog);
        assert_eq!(report.status, ValidationStatus::Rejected);
        assert_eq!(report.issues.len(), 2);
        assert_eq!(fixed, ast);

        let ok = parse_sql("SELECT * FROM backpacks__joined").unwrap();
        let report = validate_query(&ok, &b.schema, &b.catalog);
        assert_eq!(repair_query(&ok, &report, &b.catalog), (ok, report));
    }

    #[test]
    fn repairs_inside_in_lists() {
        let b = build();
        let ast = parse_sql("SELECT * FROM backpacks__joined WHERE color IN ('red', 'grene', 'nayv')").unwrap();
        let report = validate_query(&ast, &b.schema, &b.catalog);
        assert_eq!(report.issues.len(), 2);
        let (fixed, report) = repair_query(&ast, &report, &b.catalog);
        assert_eq!(report.status, ValidationStatus::Repaired);
        assert_eq!(fixed.render(), "SELECT * FROM backpacks__joined WHERE color IN ('red', 'green', 'navy')");
    }

    #[test]
    fn extracts_first_statement() {
        assert_eq!(extract_statement("```sql\nSELECT * FROM v;\n```").as_deref(), Some("SELECT * FROM v"));
        assert_eq!(
            extract_statement("Here you go: SELECT * FROM v WHERE a = 'x;y'; DROP TABLE v").as_deref(),
            Some("SELECT * FROM v WHERE a = 'x;y'")
        );
        assert_eq!(extract_statement("SELECT *\nFROM v\n\nThis returns rows.").as_deref(), Some("SELECT *\nFROM v"));
        assert_eq!(extract_statement("no sql here"), None);
        assert_eq!(extract_statement("selection: none"), None);
    }

    #[test]
    fn backpack_question_compiles_to_expected_predicate() {
        let (b, q) = generate("Do you have a non-black 15-liter backpack under $400?");
        assert_eq!(q.report.status, ValidationStatus::Valid);
        let atoms = q.ast.predicate.as_ref().unwrap().top_level_atoms();
        let has = |c: &str, op: Operator, l: Literal| {
            atoms.iter().any(|a| a.column == col(c) && a.op == op && a.operand == Operand::Single(l.clone()))
        };
        assert!(has("price", Operator::Lt, Literal::Number(400.0)));
        assert!(has("product_size", Operator::Eq, lit("15 liter")));
        assert!(has("color", Operator::Neq, lit("black")));

        let rows = execute(&q, &b.schema, &b.store).unwrap();
        // p1 and p4 are black, p3 costs 450, p5 is 30 liter, p2 is 22 liter.
        assert_eq!(rows.column_values("product_id"), vec!["p6"]);
        let joined = JoinedRows::build(&b.context, &b.extractions, &b.catalog);
        assert_eq!(evaluate(&q.ast, &joined).unwrap(), rows);
    }

    #[test]
    fn show_everything_has_no_predicate() {
        let (b, q) = generate("show everything");
        assert!(q.ast.predicate.is_none());
        assert_eq!(q.ast.projection, Projection::Star);
        assert_eq!(execute(&q, &b.schema, &b.store).unwrap().rows.len(), 6);
    }

    #[test]
    fn unknown_literal_is_rejected_and_not_executable() {
        let (b, q) = generate("backpacks whose color is purple");
        assert_eq!(q.report.status, ValidationStatus::Rejected);
        assert_eq!(q.report.issues[0].kind, IssueKind::NonEnumValue);
        assert_eq!(q.attempts, 2);
        assert!(matches!(execute(&q, &b.schema, &b.store), Err(Error::Contract(_))));
    }

    #[test]
    fn near_literal_is_repaired_end_to_end() {
        let (b, q) = generate("product size is 15 litre");
        assert_eq!(q.report.status, ValidationStatus::Repaired);
        assert_eq!(q.raw_sql, "SELECT * FROM backpacks__joined WHERE product_size = '15 liter'");
        assert!(q.completion.contains("15 litre"));
        assert_eq!(parse_sql(&q.raw_sql).unwrap(), q.ast);
        assert_eq!(execute(&q, &b.schema, &b.store).unwrap().rows.len(), 4);
    }

    #[test]
    fn unparseable_twice_is_a_semantic_parse_error() {
        let b = build();
        let gw = Gateway::new(Arc::new(ScriptedProvider::new(["I am not sure."])), crate::llm::ProviderConfig::mock(32_000));
        let err = text_to_sql("x", &b.schema, &b.catalog, &DialogState::new("backpacks"), &gw, &PromptTemplate::default_text2sql())
            .unwrap_err();
        assert!(matches!(err, Error::SemanticParse { ref completion, .. } if completion == "I am not sure."));
    }

    #[test]
    fn feedback_retry_can_recover() {
        let b = build();
        let provider = Arc::new(ScriptedProvider::new([
            "DELETE FROM backpacks__joined",
            "SELECT title FROM backpacks__joined WHERE color = 'red'",
        ]));
        let gw = Gateway::new(provider.clone(), crate::llm::ProviderConfig::mock(32_000));
        let q = text_to_sql("red ones", &b.schema, &b.catalog, &DialogState::new("backpacks"), &gw, &PromptTemplate::default_text2sql())
            .unwrap();
        assert_eq!(provider.calls(), 2);
        assert_eq!(q.attempts, 2);
        let rows = execute(&q, &b.schema, &b.store).unwrap();
        assert_eq!(rows.columns, vec!["title"]);
        assert_eq!(rows.rows.len(), 2);
    }

    #[test]
    fn limit_and_order_are_respected() {
        let (b, q) = generate("top 2 cheapest backpacks");
        let rows = execute(&q, &b.schema, &b.store).unwrap();
        assert_eq!(rows.column_values("product_id"), vec!["p1", "p6"]);
        let (_, q) = generate("red backpacks over $1000");
        assert!(execute(&q, &b.schema, &b.store).unwrap().rows.is_empty());
    }

    #[test]
    fn execution_never_writes() {
        let b = build();
        let before = b.store.checksum().unwrap();
        for question in ["show everything", "red backpacks", "non-black nylon backpacks under $300"] {
            let q = text_to_sql(question, &b.schema, &b.catalog, &DialogState::new("backpacks"), &gateway(), &PromptTemplate::default_text2sql())
                .unwrap();
            execute(&q, &b.schema, &b.store).unwrap();
        }
        assert_eq!(b.store.checksum().unwrap(), before);
    }
}
