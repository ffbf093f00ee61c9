//! Seeded synthetic product corpus with ground truth.
//!
//! Each row samples one value per attribute and renders a free-text
//! description from sentence templates, picking a paraphrase for every value
//! ("onyx" for black, "15-liter" for 15 liter) and sometimes adding a
//! distractor phrase ("black buckles") that mentions a value without meaning
//! it. The lexicon returned alongside maps every phrase back to its value, so
//! a lexicon extractor recovers the ground truth exactly.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::LexiconEntry;
use crate::model::{ColumnDef, ColumnName, ContextTable, Value, ValueKind};

pub const PRIMARY_KEY: &str = "product_id";
const RESERVED: &[&str] = &["product_id", "title", "price", "description", "product_type"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSpec {
    pub value: String,
    pub phrases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub key: String,
    pub values: Vec<ValueSpec>,
    /// Sentence templates with a `{p}` slot for the phrase.
    pub sentences: Vec<String>,
    /// How a question names a value, with a `{v}` slot.
    #[serde(default = "default_mention")]
    pub mention: String,
}

fn default_mention() -> String {
    "{v}".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    pub sentence: String,
    pub phrase: String,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub product_type: ValueSpec,
    pub plural: String,
    /// Opening sentences with a `{p}` slot for the product-type phrase.
    pub openers: Vec<String>,
    pub title_words: Vec<String>,
    pub price_range: [u32; 2],
    pub attributes: Vec<AttributeSpec>,
    #[serde(default)]
    pub distractors: Vec<Distractor>,
    #[serde(default = "default_distractor_rate")]
    pub distractor_rate: f64,
}

fn default_distractor_rate() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub domains: Vec<DomainSpec>,
    pub rows_per_domain: usize,
    pub seed: u64,
}

/// Per table, per primary key: the sampled attributes, including
/// `product_type` and `price`.
pub type GroundTruth = BTreeMap<String, BTreeMap<String, BTreeMap<String, Value>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub tables: Vec<ContextTable>,
    pub truth: GroundTruth,
    pub lexicon: Vec<LexiconEntry>,
}

fn vs(value: &str, phrases: &[&str]) -> ValueSpec {
    ValueSpec {
        value: value.into(),
        phrases: phrases.iter().map(|p| p.to_string()).collect(),
    }
}

fn attr(key: &str, sentences: &[&str], mention: &str, values: Vec<ValueSpec>) -> AttributeSpec {
    AttributeSpec {
        key: key.into(),
        values,
        sentences: sentences.iter().map(|s| s.to_string()).collect(),
        mention: mention.into(),
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl CorpusSpec {
    /// Backpacks, perfumes and watches.
    pub fn standard(rows_per_domain: usize, seed: u64) -> Self {
        let black = || vs("black", &["black", "onyx", "jet"]);
        let backpacks = DomainSpec {
            name: "backpacks".into(),
            product_type: vs("backpack", &["backpack", "rucksack", "daypack"]),
            plural: "backpacks".into(),
            openers: strings(&[
                "Meet our {p}, built for daily use.",
                "This {p} is ready for the trail.",
                "A dependable {p} for work and travel.",
            ]),
            title_words: strings(&["Ridge", "Summit", "Harbor", "Canyon", "Metro", "Trail", "Atlas", "Nomad"]),
            price_range: [60, 600],
            attributes: vec![
                attr(
                    "product_size",
                    &["It holds {p} of gear.", "Capacity: {p}.", "Sized at {p} for longer days."],
                    "{v}",
                    vec![
                        vs("15 liter", &["15 liter", "15-liter", "15 litre"]),
                        vs("22 liter", &["22 liter", "22-liter", "22 litre"]),
                        vs("30 liter", &["30 liter", "30-liter", "30 litre"]),
                        vs("45 liter", &["45 liter", "45-liter", "45 litre"]),
                    ],
                ),
                attr(
                    "color",
                    &["Finished in {p}.", "The shell comes in {p}.", "Shown here in {p}."],
                    "{v}",
                    vec![
                        black(),
                        vs("navy", &["navy", "navy blue"]),
                        vs("red", &["red", "crimson"]),
                        vs("green", &["green", "olive"]),
                        vs("grey", &["grey", "gray", "charcoal"]),
                    ],
                ),
                attr(
                    "handle_type",
                    &["Carry it by the {p}.", "It features a {p}."],
                    "{v}",
                    vec![
                        vs("strap", &["shoulder strap", "strap"]),
                        vs("top handle", &["top handle", "carry handle"]),
                        vs("grab loop", &["grab loop", "haul loop"]),
                    ],
                ),
                attr(
                    "material",
                    &["Made from {p}.", "The body is {p}."],
                    "{v}",
                    vec![
                        vs("nylon", &["nylon", "ripstop nylon"]),
                        vs("canvas", &["canvas", "waxed canvas"]),
                        vs("leather", &["leather", "full-grain leather"]),
                        vs("polyester", &["polyester", "recycled polyester"]),
                    ],
                ),
            ],
            distractors: vec![Distractor {
                sentence: "Trimmed with black buckles.".into(),
                phrase: "black buckles".into(),
                key: "hardware".into(),
                value: "black buckles".into(),
            }],
            distractor_rate: 0.5,
        };
        let perfumes = DomainSpec {
            name: "perfumes".into(),
            product_type: vs("perfume", &["perfume", "fragrance"]),
            plural: "perfumes".into(),
            openers: strings(&[
                "An elegant {p} for every season.",
                "This {p} lingers all day.",
                "A signature {p} in a sculpted bottle.",
            ]),
            title_words: strings(&["Velvet", "Aurora", "Muse", "Solstice", "Iris", "Nocturne", "Lumen", "Bloom"]),
            price_range: [30, 300],
            attributes: vec![
                attr(
                    "scent_family",
                    &["Its heart is {p}.", "Expect {p} notes."],
                    "{v}",
                    vec![
                        vs("floral", &["floral", "flowery"]),
                        vs("woody", &["woody", "sandalwood"]),
                        vs("citrus", &["citrus", "zesty"]),
                        vs("oriental", &["oriental", "amber"]),
                        vs("fresh", &["fresh", "aquatic"]),
                    ],
                ),
                attr(
                    "volume",
                    &["The bottle holds {p}.", "Volume: {p}."],
                    "{v}",
                    vec![
                        vs("30 ml", &["30 ml", "30ml", "30 milliliter"]),
                        vs("50 ml", &["50 ml", "50ml", "50 milliliter"]),
                        vs("100 ml", &["100 ml", "100ml", "100 milliliter"]),
                    ],
                ),
                attr(
                    "concentration",
                    &["Concentration: {p}.", "Blended as {p}."],
                    "{v}",
                    vec![
                        vs("eau de parfum", &["eau de parfum", "edp"]),
                        vs("eau de toilette", &["eau de toilette", "edt"]),
                        vs("cologne", &["cologne", "eau de cologne"]),
                    ],
                ),
                attr(
                    "gender",
                    &["Created {p}.", "Designed {p}."],
                    "for {v}",
                    vec![
                        vs("women", &["for women", "for her"]),
                        vs("men", &["for men", "for him"]),
                        vs("unisex", &["unisex", "for everyone"]),
                    ],
                ),
                attr(
                    "color",
                    &["The bottle is {p}.", "Bottled in {p} glass."],
                    "{v}",
                    vec![
                        black(),
                        vs("clear", &["clear", "transparent"]),
                        vs("gold", &["gold", "golden"]),
                        vs("pink", &["pink", "blush"]),
                    ],
                ),
            ],
            distractors: vec![Distractor {
                sentence: "Presented in a black gift box.".into(),
                phrase: "black gift box".into(),
                key: "packaging".into(),
                value: "black gift box".into(),
            }],
            distractor_rate: 0.5,
        };
        let watches = DomainSpec {
            name: "watches".into(),
            product_type: vs("watch", &["watch", "timepiece", "wristwatch"]),
            plural: "watches".into(),
            openers: strings(&[
                "A refined {p} for daily wear.",
                "This {p} keeps perfect time.",
                "A rugged {p} built to last.",
            ]),
            title_words: strings(&["Chrono", "Meridian", "Pilot", "Vector", "Regent", "Tide", "Orbit", "Sentinel"]),
            price_range: [80, 900],
            attributes: vec![
                attr(
                    "movement",
                    &["It runs on a {p} movement.", "Powered by a {p} movement."],
                    "{v}",
                    vec![
                        vs("quartz", &["quartz"]),
                        vs("automatic", &["automatic", "self-winding"]),
                        vs("mechanical", &["mechanical", "hand-wound"]),
                        vs("solar", &["solar", "light-powered"]),
                    ],
                ),
                attr(
                    "strap_material",
                    &["It sits on a {p}.", "Worn on a {p}."],
                    "{v}",
                    vec![
                        vs("leather", &["leather strap", "leather band"]),
                        vs("steel", &["steel bracelet", "stainless bracelet"]),
                        vs("rubber", &["rubber strap", "silicone strap"]),
                        vs("nylon", &["nylon strap", "fabric strap"]),
                    ],
                ),
                attr(
                    "case_size",
                    &["The case measures {p}.", "Case diameter: {p}."],
                    "{v}",
                    vec![
                        vs("38 mm", &["38 mm", "38mm"]),
                        vs("42 mm", &["42 mm", "42mm"]),
                        vs("44 mm", &["44 mm", "44mm"]),
                    ],
                ),
                attr(
                    "water_resistance",
                    &["Water resistant to {p}.", "Rated to {p} underwater."],
                    "with {v} water resistance",
                    vec![
                        vs("50 m", &["50 m", "50 meters"]),
                        vs("100 m", &["100 m", "100 meters"]),
                        vs("200 m", &["200 m", "200 meters"]),
                    ],
                ),
                attr(
                    "color",
                    &["The dial is {p}.", "It has a {p} dial."],
                    "{v}",
                    vec![
                        black(),
                        vs("white", &["white", "ivory"]),
                        vs("blue", &["blue", "cobalt"]),
                        vs("silver", &["silver"]),
                    ],
                ),
            ],
            distractors: vec![Distractor {
                sentence: "Ships in a black presentation case.".into(),
                phrase: "black presentation case".into(),
                key: "packaging".into(),
                value: "black presentation case".into(),
            }],
            distractor_rate: 0.5,
        };
        CorpusSpec {
            domains: vec![backpacks, perfumes, watches],
            rows_per_domain,
            seed,
        }
    }

    /// Rejects specs whose ground truth could not be recovered from text.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        if self.domains.is_empty() {
            return fail("no domains".into());
        }
        let mut names = BTreeSet::new();
        let mut phrases: BTreeMap<String, (String, String)> = BTreeMap::new();
        for d in &self.domains {
            if !ColumnName::is_normalized(&d.name) {
                return fail(format!("domain name {:?} must be lowercase words joined by underscores", d.name));
            }
            if !names.insert(d.name.clone()) {
                return fail(format!("domain {} is declared twice", d.name));
            }
            if d.price_range[0] > d.price_range[1] {
                return fail(format!("{}: price range is empty", d.name));
            }
            if d.openers.is_empty() || d.title_words.is_empty() {
                return fail(format!("{}: needs openers and title words", d.name));
            }
            if !(0.0..=1.0).contains(&d.distractor_rate) {
                return fail(format!("{}: distractor rate must be in [0, 1]", d.name));
            }
            let mut entries: Vec<(String, &str, &str)> = Vec::new();
            for p in &d.product_type.phrases {
                entries.push((p.to_lowercase(), "product_type", &d.product_type.value));
            }
            let mut keys = BTreeSet::new();
            for a in &d.attributes {
                if !ColumnName::is_normalized(&a.key) || RESERVED.contains(&a.key.as_str()) {
                    return fail(format!("{}: attribute key {:?} is not usable", d.name, a.key));
                }
                if !keys.insert(&a.key) {
                    return fail(format!("{}: attribute {} declared twice", d.name, a.key));
                }
                if a.values.is_empty() || a.sentences.is_empty() {
                    return fail(format!("{}: attribute {} needs values and sentences", d.name, a.key));
                }
                if a.sentences.iter().any(|s| !s.contains("{p}")) || !a.mention.contains("{v}") {
                    return fail(format!("{}: attribute {} has a template without its slot", d.name, a.key));
                }
                for v in &a.values {
                    if v.phrases.is_empty() || v.value.trim().is_empty() || v.value != v.value.to_lowercase() {
                        return fail(format!("{}: value {:?} of {} needs phrases and a lowercase name", d.name, v.value, a.key));
                    }
                    for p in &v.phrases {
                        entries.push((p.to_lowercase(), &a.key, &v.value));
                    }
                }
            }
            for x in &d.distractors {
                if !x.sentence.to_lowercase().contains(&x.phrase.to_lowercase()) {
                    return fail(format!("{}: distractor sentence lacks its phrase", d.name));
                }
                entries.push((x.phrase.to_lowercase(), &x.key, &x.value));
            }
            for (phrase, key, value) in entries {
                let mapped = (key.to_string(), value.to_string());
                match phrases.get(&phrase) {
                    Some(existing) if *existing != mapped => {
                        return fail(format!(
                            "phrase {phrase:?} means both {}={} and {key}={value}",
                            existing.0, existing.1
                        ));
                    }
                    _ => {
                        phrases.insert(phrase, mapped);
                    }
                }
            }
        }
        Ok(())
    }

    /// Phrase lexicon covering every paraphrase and distractor.
    pub fn lexicon(&self) -> Vec<LexiconEntry> {
        let mut out: BTreeMap<String, LexiconEntry> = BTreeMap::new();
        let mut add = |phrase: &str, key: &str, value: &str| {
            out.entry(phrase.to_lowercase()).or_insert_with(|| LexiconEntry {
                phrase: phrase.to_lowercase(),
                key: key.into(),
                value: value.into(),
            });
        };
        for d in &self.domains {
            for p in &d.product_type.phrases {
                add(p, "product_type", &d.product_type.value);
            }
            for a in &d.attributes {
                for v in &a.values {
                    for p in &v.phrases {
                        add(p, &a.key, &v.value);
                    }
                }
            }
            for x in &d.distractors {
                add(&x.phrase, &x.key, &x.value);
            }
        }
        out.into_values().collect()
    }
}

fn domain_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.gen_range(0..items.len())]
}

/// Generates one context table per domain plus the ground truth.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut tables = Vec::new();
    let mut truth = GroundTruth::new();
    for (index, d) in spec.domains.iter().enumerate() {
        let mut rng = domain_rng(spec.seed, index);
        let columns = vec![
            ColumnDef { name: ColumnName::new(PRIMARY_KEY)?, kind: ValueKind::Text },
            ColumnDef { name: ColumnName::new("title")?, kind: ValueKind::Text },
            ColumnDef { name: ColumnName::new("price")?, kind: ValueKind::Number },
            ColumnDef { name: ColumnName::new("description")?, kind: ValueKind::Text },
        ];
        let mut rows = Vec::with_capacity(spec.rows_per_domain);
        let mut table_truth = BTreeMap::new();
        for i in 0..spec.rows_per_domain {
            let pk = format!("{}-{:04}", d.name, i + 1);
            let mut attrs: BTreeMap<String, Value> = BTreeMap::new();
            attrs.insert("product_type".into(), Value::Text(d.product_type.value.clone()));

            let type_phrase = pick(&mut rng, &d.product_type.phrases).clone();
            let opener = pick(&mut rng, &d.openers).replace("{p}", &type_phrase);
            let mut sentences = Vec::new();
            for a in &d.attributes {
                let v = pick(&mut rng, &a.values);
                let phrase = pick(&mut rng, &v.phrases);
                let sentence = pick(&mut rng, &a.sentences).replace("{p}", phrase);
                sentences.push(sentence);
                attrs.insert(a.key.clone(), Value::Text(v.value.clone()));
            }
            if !d.distractors.is_empty() && rng.gen_bool(d.distractor_rate) {
                sentences.push(pick(&mut rng, &d.distractors).sentence.clone());
            }
            sentences.shuffle(&mut rng);
            let description = std::iter::once(opener).chain(sentences).collect::<Vec<_>>().join(" ");

            let price = rng.gen_range(d.price_range[0]..=d.price_range[1]);
            attrs.insert("price".into(), Value::Number(f64::from(price)));
            let title = format!("{} {}", pick(&mut rng, &d.title_words), rng.gen_range(10..100));

            rows.push(vec![Some(pk.clone()), Some(title), Some(price.to_string()), Some(description)]);
            table_truth.insert(pk, attrs);
        }
        truth.insert(d.name.clone(), table_truth);
        tables.push(ContextTable {
            table_id: d.name.clone(),
            domain_id: d.name.clone(),
            primary_key: ColumnName::new(PRIMARY_KEY)?,
            columns,
            text_columns: vec![ColumnName::new("description")?],
            rows,
        });
    }
    Ok(Corpus { tables, truth, lexicon: spec.lexicon() })
}
