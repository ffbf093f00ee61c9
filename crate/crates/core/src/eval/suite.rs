//! Query suite generation and the ground-truth oracle.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::{AttributeSpec, Corpus, CorpusSpec, DomainSpec};
use super::{IntentConstraint, IntentKind, QueryIntent, ENUM_DIRECT, EXPLORATORY, NEGATION_PARAPHRASE};
use crate::error::{Error, Result};
use crate::model::{ColumnName, Literal, Operator, Value};

fn eq(column: &str, value: &str) -> Result<IntentConstraint> {
    Ok(IntentConstraint { column: ColumnName::new(column)?, op: Operator::Eq, value: Literal::text(value) })
}

/// A value of `attr` that occurs in the corpus, so the question is answerable.
fn present_value(rng: &mut ChaCha8Rng, corpus: &Corpus, domain: &str, attr: &AttributeSpec) -> Option<String> {
    let seen: BTreeSet<&str> = corpus
        .truth
        .get(domain)?
        .values()
        .filter_map(|row| match row.get(&attr.key) {
            Some(Value::Text(t)) => Some(t.as_str()),
            _ => None,
        })
        .collect();
    let seen: Vec<&str> = seen.into_iter().collect();
    seen.choose(rng).map(|s| s.to_string())
}

struct Phrase {
    before: Vec<String>,
    after: Vec<String>,
}

impl Phrase {
    fn new() -> Self {
        Phrase { before: Vec::new(), after: Vec::new() }
    }

    fn mention(&mut self, attr: &AttributeSpec, value: &str) {
        let text = attr.mention.replace("{v}", value);
        if attr.mention.starts_with("{v}") {
            self.before.push(text);
        } else {
            self.after.push(text);
        }
    }

    fn render(&self, noun: &str, tail: &str) -> String {
        let mut words: Vec<&str> = self.before.iter().map(String::as_str).collect();
        words.push(noun);
        words.extend(self.after.iter().map(String::as_str));
        if !tail.is_empty() {
            words.push(tail);
        }
        words.join(" ")
    }
}

fn price_bound(rng: &mut ChaCha8Rng, d: &DomainSpec) -> u32 {
    let lo = d.price_range[0].div_ceil(50).max(1) * 50;
    let hi = (d.price_range[1] / 50 * 50).max(lo);
    rng.gen_range(lo / 50..=hi / 50) * 50
}

fn direct(rng: &mut ChaCha8Rng, corpus: &Corpus, d: &DomainSpec) -> Result<QueryIntent> {
    let mut attrs: Vec<&AttributeSpec> = d.attributes.iter().collect();
    attrs.shuffle(rng);
    let mut constraints = vec![eq("product_type", &d.product_type.value)?];
    let mut phrase = Phrase::new();
    for a in attrs.into_iter().take(2) {
        if let Some(v) = present_value(rng, corpus, &d.name, a) {
            phrase.mention(a, &v);
            constraints.push(eq(&a.key, &v)?);
        }
    }
    let mut tail = String::new();
    if rng.gen_bool(0.5) {
        let n = price_bound(rng, d);
        tail = format!("under ${n}");
        constraints.push(IntentConstraint {
            column: ColumnName::new("price")?,
            op: Operator::Lt,
            value: Literal::Number(f64::from(n)),
        });
    }
    Ok(QueryIntent {
        description: phrase.render(&d.plural, &tail),
        constraints,
        kind: IntentKind::Direct,
        table_id: d.name.clone(),
        subsuite: ENUM_DIRECT.into(),
    })
}

fn negation(rng: &mut ChaCha8Rng, corpus: &Corpus, d: &DomainSpec) -> Result<QueryIntent> {
    let others: Vec<&AttributeSpec> = d.attributes.iter().filter(|a| a.key != "color").collect();
    let mut constraints = vec![
        eq("product_type", &d.product_type.value)?,
        IntentConstraint { column: ColumnName::new("color")?, op: Operator::Neq, value: Literal::text("black") },
    ];
    let mut phrase = Phrase::new();
    if let Some(a) = others.choose(rng) {
        if let Some(v) = present_value(rng, corpus, &d.name, a) {
            phrase.mention(a, &v);
            constraints.push(eq(&a.key, &v)?);
        }
    }
    let description = if rng.gen_bool(0.5) {
        phrase.before.insert(0, "non-black".into());
        phrase.render(&d.plural, "")
    } else {
        format!("{}, except black ones", phrase.render(&d.plural, ""))
    };
    Ok(QueryIntent {
        description,
        constraints,
        kind: IntentKind::Direct,
        table_id: d.name.clone(),
        subsuite: NEGATION_PARAPHRASE.into(),
    })
}

fn exploratory(rng: &mut ChaCha8Rng, corpus: &Corpus, d: &DomainSpec) -> Result<QueryIntent> {
    let mut constraints = vec![eq("product_type", &d.product_type.value)?];
    let description = match (rng.gen_bool(0.5), d.attributes.choose(rng)) {
        (true, Some(a)) => match present_value(rng, corpus, &d.name, a) {
            Some(v) => {
                let mut phrase = Phrase::new();
                phrase.mention(a, &v);
                constraints.push(eq(&a.key, &v)?);
                format!("show me some {}", phrase.render(&d.plural, ""))
            }
            None => format!("I am looking for a {}", d.product_type.value),
        },
        _ => format!("I am looking for a {}", d.product_type.value),
    };
    Ok(QueryIntent {
        description,
        constraints,
        kind: IntentKind::Exploratory,
        table_id: d.name.clone(),
        subsuite: EXPLORATORY.into(),
    })
}

/// `n` queries cycling over domains and over the three sub-suites.
pub fn generate_suite(spec: &CorpusSpec, corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<QueryIntent>> {
    if spec.domains.is_empty() {
        return Err(Error::Spec("no domains".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domains = spec.domains.len();
    (0..n)
        .map(|i| {
            let d = &spec.domains[i % domains];
            match (i / domains) % 3 {
                0 => direct(&mut rng, corpus, d),
                1 => negation(&mut rng, corpus, d),
                _ => exploratory(&mut rng, corpus, d),
            }
        })
        .collect()
}

fn satisfies(c: &IntentConstraint, cell: Option<&Value>) -> bool {
    let Some(cell) = cell.filter(|v| !v.is_null()) else {
        return c.op == Operator::Any;
    };
    match (c.op, cell, &c.value) {
        (Operator::Any, _, _) => true,
        (Operator::Eq, Value::Text(a), Literal::Text(b)) => a == b,
        (Operator::Neq, Value::Text(a), Literal::Text(b)) => a != b,
        (op, Value::Number(a), Literal::Number(b)) => match op {
            Operator::Eq => a == b,
            Operator::Neq => a != b,
            Operator::Lt => a < b,
            Operator::Lte => a <= b,
            Operator::Gt => a > b,
            Operator::Gte => a >= b,
            _ => false,
        },
        _ => false,
    }
}

/// Primary keys whose ground-truth attributes satisfy every constraint.
pub fn oracle_answer(intent: &QueryIntent, corpus: &Corpus) -> BTreeSet<String> {
    let Some(rows) = corpus.truth.get(&intent.table_id) else {
        return BTreeSet::new();
    };
    rows.iter()
        .filter(|(_, attrs)| intent.constraints.iter().all(|c| satisfies(c, attrs.get(c.column.as_str()))))
        .map(|(pk, _)| pk.clone())
        .collect()
}

/// Reads a suite file: one JSON query intent per line, blank lines ignored.
pub fn read_suite(source: impl std::io::Read) -> Result<Vec<QueryIntent>> {
    use std::io::BufRead;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let intent = serde_json::from_str(&line).map_err(|e| Error::Spec(format!("suite line {}: {e}", i + 1)))?;
        out.push(intent);
    }
    Ok(out)
}

pub fn write_suite(suite: &[QueryIntent], mut sink: impl std::io::Write) -> Result<()> {
    for intent in suite {
        serde_json::to_writer(&mut sink, intent)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::corpus::generate_corpus;

    #[test]
    fn suite_shape() {
        let spec = CorpusSpec::standard(100, 5);
        let corpus = generate_corpus(&spec).unwrap();
        let suite = generate_suite(&spec, &corpus, 50, 9).unwrap();
        assert_eq!(suite.len(), 50);
        for sub in [ENUM_DIRECT, NEGATION_PARAPHRASE, EXPLORATORY] {
            assert!(suite.iter().filter(|q| q.subsuite == sub).count() >= 15, "{sub}");
        }
        let tables: BTreeSet<&str> = suite.iter().map(|q| q.table_id.as_str()).collect();
        assert_eq!(tables.len(), 3);
        assert_eq!(suite, generate_suite(&spec, &corpus, 50, 9).unwrap());
        let mut buf = Vec::new();
        write_suite(&suite, &mut buf).unwrap();
        assert_eq!(read_suite(buf.as_slice()).unwrap(), suite);
        assert!(read_suite("{\"description\": 1}".as_bytes()).is_err());
        let neg = suite.iter().find(|q| q.subsuite == NEGATION_PARAPHRASE).unwrap();
        assert!(neg.description.contains("black"));
        assert!(neg.constraints.iter().any(|c| c.op == Operator::Neq));
    }

    #[test]
    fn oracle_filters_on_truth() {
        let spec = CorpusSpec::standard(80, 2);
        let corpus = generate_corpus(&spec).unwrap();
        let all = QueryIntent {
            description: "backpacks".into(),
            constraints: vec![eq("product_type", "backpack").unwrap()],
            kind: IntentKind::Exploratory,
            table_id: "backpacks".into(),
            subsuite: EXPLORATORY.into(),
        };
        assert_eq!(oracle_answer(&all, &corpus).len(), 80);
        let mut black = all.clone();
        black.constraints.push(eq("color", "black").unwrap());
        let mut not_black = all.clone();
        not_black.constraints.push(IntentConstraint {
            column: ColumnName::new("color").unwrap(),
            op: Operator::Neq,
            value: Literal::text("black"),
        });
        let (b, nb) = (oracle_answer(&black, &corpus), oracle_answer(&not_black, &corpus));
        assert_eq!(b.len() + nb.len(), 80);
        assert!(b.is_disjoint(&nb));
        let mut cheap = all.clone();
        cheap.constraints.push(IntentConstraint {
            column: ColumnName::new("price").unwrap(),
            op: Operator::Lt,
            value: Literal::Number(0.0),
        });
        assert!(oracle_answer(&cheap, &corpus).is_empty());
        let mut other = all;
        other.table_id = "nothing".into();
        assert!(oracle_answer(&other, &corpus).is_empty());
    }
}
