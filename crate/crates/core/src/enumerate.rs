//! The enumerate step and the column policies applied to its output:
//! consolidation of near-duplicate keys and capping by name complexity,
//! row support and the store's column limit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ColumnName, DroppedKey, EnumerationCatalog, ExtractionSet};

/// Static abbreviation table used when comparing keys.
const ABBREVIATIONS: &[(&str, &str)] = &[("no", "number"), ("qty", "quantity"), ("amt", "amount")];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapPolicy {
    #[serde(default = "default_max_columns")]
    pub max_columns: usize,
    #[serde(default = "default_max_key_words")]
    pub max_key_words: usize,
    #[serde(default = "default_min_row_support")]
    pub min_row_support: f64,
    #[serde(default)]
    pub mandatory_keys: Vec<ColumnName>,
}

fn default_max_columns() -> usize {
    2048
}
fn default_max_key_words() -> usize {
    2
}
fn default_min_row_support() -> f64 {
    0.05
}

impl Default for CapPolicy {
    fn default() -> Self {
        CapPolicy {
            max_columns: default_max_columns(),
            max_key_words: default_max_key_words(),
            min_row_support: default_min_row_support(),
            mandatory_keys: Vec::new(),
        }
    }
}

impl CapPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_columns < 1 {
            return Err(Error::Config("max_columns must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_row_support) {
            return Err(Error::Config("min_row_support must lie in [0, 1]".into()));
        }
        if self.mandatory_keys.len() > self.max_columns {
            return Err(Error::Config("more mandatory keys than max_columns".into()));
        }
        Ok(())
    }
}

/// Collects every extracted value per key: sorted, distinct, no policy applied.
pub fn enumerate_catalog(extractions: &ExtractionSet) -> EnumerationCatalog {
    let mut catalog = EnumerationCatalog::new(extractions.table_id.clone());
    for row in extractions.per_row.values() {
        for tuple in &row.tuples {
            catalog.insert(tuple.key.clone(), tuple.value.clone());
            *catalog.support.entry(tuple.key.clone()).or_default() += 1;
        }
    }
    catalog
}

fn singularize(word: &str) -> String {
    if word.len() <= 3 || word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for suffix in ["ches", "shes", "xes", "sses", "zes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    word.strip_suffix('s').unwrap_or(word).to_string()
}

fn expand(word: &str) -> &str {
    ABBREVIATIONS
        .iter()
        .find(|(short, _)| *short == word)
        .map_or(word, |(_, long)| long)
}

/// Comparison form of a key: abbreviations expanded, final word singularized.
pub fn canonical_key(key: &ColumnName) -> String {
    let mut words: Vec<String> = key.words().map(|w| expand(w).to_string()).collect();
    if let Some(last) = words.last_mut() {
        *last = singularize(last);
    }
    words.join("_")
}

fn uses_abbreviation(key: &ColumnName) -> bool {
    key.words().any(|w| expand(w) != w)
}

/// Merges keys whose canonical forms coincide.
///
/// The survivor is the most frequently extracted original; ties go to a
/// spelled-out name over an abbreviated one, then to the lexicographically
/// smallest. Idempotent.
pub fn consolidate_keys(catalog: &EnumerationCatalog) -> EnumerationCatalog {
    let mut groups: BTreeMap<String, Vec<&ColumnName>> = BTreeMap::new();
    for key in catalog.entries.keys() {
        groups.entry(canonical_key(key)).or_default().push(key);
    }

    let mut out = EnumerationCatalog::new(catalog.table_id.clone());
    out.dropped = catalog.dropped.clone();
    let mut renamed: BTreeMap<ColumnName, ColumnName> = BTreeMap::new();
    for members in groups.values() {
        let survivor = members
            .iter()
            .copied()
            .min_by(|a, b| {
                let sa = catalog.support.get(*a).copied().unwrap_or(0);
                let sb = catalog.support.get(*b).copied().unwrap_or(0);
                sb.cmp(&sa)
                    .then_with(|| uses_abbreviation(a).cmp(&uses_abbreviation(b)))
                    .then_with(|| a.cmp(b))
            })
            .expect("group is non-empty");
        for member in members {
            for v in &catalog.entries[*member] {
                out.insert(survivor.clone(), v.clone());
            }
            if let Some(n) = catalog.support.get(*member) {
                *out.support.entry(survivor.clone()).or_default() += n;
            }
            renamed.insert((*member).clone(), survivor.clone());
        }
    }

    for (original, target) in &catalog.consolidation_map {
        let target = renamed.get(target).unwrap_or(target);
        out.consolidation_map.insert(original.clone(), target.clone());
    }
    for (member, survivor) in renamed {
        out.consolidation_map.insert(member, survivor);
    }
    out
}

/// Applies the column policy. Drops, in order: names with more than
/// `max_key_words` words, keys extracted in fewer than `min_row_support` of
/// `row_count` rows, then the lowest-support keys until at most
/// `max_columns` remain (ties: more words first, then the larger name).
/// Mandatory keys are never dropped and must be present.
pub fn cap_columns(catalog: &EnumerationCatalog, policy: &CapPolicy, row_count: usize) -> Result<EnumerationCatalog> {
    policy.validate()?;
    let mandatory: Vec<ColumnName> = policy
        .mandatory_keys
        .iter()
        .map(|k| catalog.resolve(k).cloned().unwrap_or_else(|| k.clone()))
        .collect();
    let missing: Vec<String> = mandatory
        .iter()
        .filter(|k| !catalog.entries.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Grounding { missing });
    }

    let mut out = catalog.clone();
    let drop = |out: &mut EnumerationCatalog, key: &ColumnName, reason: String| {
        out.entries.remove(key);
        out.support.remove(key);
        out.dropped.push(DroppedKey {
            column: key.clone(),
            reason,
        });
    };
    let support = |out: &EnumerationCatalog, key: &ColumnName| out.support.get(key).copied().unwrap_or(0);

    let keys: Vec<ColumnName> = out.entries.keys().cloned().collect();
    for key in &keys {
        if !mandatory.contains(key) && key.word_count() > policy.max_key_words {
            let reason = format!("name has {} words (max {})", key.word_count(), policy.max_key_words);
            drop(&mut out, key, reason);
        }
    }

    if row_count > 0 {
        let keys: Vec<ColumnName> = out.entries.keys().cloned().collect();
        for key in &keys {
            let share = support(&out, key) as f64 / row_count as f64;
            if !mandatory.contains(key) && share < policy.min_row_support {
                let reason = format!("row support {share:.3} below {}", policy.min_row_support);
                drop(&mut out, key, reason);
            }
        }
    }

    if out.entries.len() > policy.max_columns {
        let mut candidates: Vec<ColumnName> = out
            .entries
            .keys()
            .filter(|k| !mandatory.contains(*k))
            .cloned()
            .collect();
        candidates.sort_by(|a, b| {
            support(&out, a)
                .cmp(&support(&out, b))
                .then_with(|| b.word_count().cmp(&a.word_count()))
                .then_with(|| b.cmp(a))
        });
        let excess = out.entries.len() - policy.max_columns;
        for key in candidates.into_iter().take(excess) {
            let reason = format!("over the {} column cap", policy.max_columns);
            drop(&mut out, &key, reason);
        }
    }
    Ok(out)
}
