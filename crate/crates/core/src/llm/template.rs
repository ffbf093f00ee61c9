//! Few-shot prompt templates for extraction and text-to-SQL.
//!
//! A template asset is a TOML document with a `layout` string containing
//! `{{slot}}` placeholders. Slots: `preamble`, `exemplars`, `grounding`,
//! `text` (discretize) and `preamble`, `exemplars`, `table`, `schema`,
//! `enums`, `state`, `question` (text2sql). Rendering is a pure function of
//! its inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::estimate_tokens;
use crate::error::{Error, Result};
use crate::model::{ColumnName, DialogState, EnumerationCatalog, Operand};
use crate::tablegen::JoinedSchema;

const DEFAULT_DISCRETIZE: &str = include_str!("../../templates/discretize.toml");
const DEFAULT_TEXT2SQL: &str = include_str!("../../templates/text2sql.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    Discretize,
    Text2sql,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: TemplateKind,
    pub system_preamble: String,
    pub exemplars: Vec<Exemplar>,
    pub rendered_budget: usize,
    pub layout: String,
}

/// A rendered prompt and its token estimate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    pub estimated_tokens: usize,
}

impl PromptTemplate {
    pub fn default_discretize() -> Self {
        Self::parse(DEFAULT_DISCRETIZE).expect("bundled discretize template is valid")
    }

    pub fn default_text2sql() -> Self {
        Self::parse(DEFAULT_TEXT2SQL).expect("bundled text2sql template is valid")
    }

    pub fn parse(source: &str) -> Result<Self> {
        let template: PromptTemplate =
            toml::from_str(source).map_err(|e| Error::Config(format!("template: {e}")))?;
        if template.exemplars.is_empty() {
            return Err(Error::Config("template needs at least one exemplar".into()));
        }
        if template.rendered_budget == 0 {
            return Err(Error::Config("template rendered_budget must be positive".into()));
        }
        Ok(template)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn expect_kind(&self, kind: TemplateKind) -> Result<()> {
        if self.name != kind {
            return Err(Error::Config(format!(
                "expected a {kind:?} template, got {:?}",
                self.name
            )));
        }
        Ok(())
    }

    fn render_exemplars(&self, input_label: &str, output_label: &str) -> String {
        let mut out = String::new();
        for (i, ex) in self.exemplars.iter().enumerate() {
            out.push_str(&format!(
                "Example {}\n{input_label}: {}\n{output_label}: {}\n\n",
                i + 1,
                ex.input.trim(),
                ex.output.trim()
            ));
        }
        out
    }

    fn render(&self, slots: &[(&str, &str)], hint: &str) -> Result<Prompt> {
        let mut text = self.layout.clone();
        for (slot, value) in slots {
            text = text.replace(&format!("{{{{{slot}}}}}"), value);
        }
        let text = collapse_blank_lines(text.trim_start());
        let estimated_tokens = estimate_tokens(&text);
        if estimated_tokens > self.rendered_budget {
            return Err(Error::Budget {
                estimate: estimated_tokens,
                limit: self.rendered_budget,
                hint: hint.to_string(),
            });
        }
        Ok(Prompt {
            text,
            estimated_tokens,
        })
    }
}

fn collapse_blank_lines(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut blank_run = 0;
    for line in text.split('\n') {
        if line.trim().is_empty() {
            blank_run += 1;
            if blank_run > 1 {
                continue;
            }
        } else {
            blank_run = 0;
        }
        out.push_str(line);
        out.push('\n');
    }
    while out.ends_with("\n\n") {
        out.pop();
    }
    out
}

/// Extraction prompt for one row's collected text.
pub fn build_discretize_prompt(
    text: &str,
    mandatory_keys: &[ColumnName],
    template: &PromptTemplate,
) -> Result<Prompt> {
    template.expect_kind(TemplateKind::Discretize)?;
    let grounding = if mandatory_keys.is_empty() {
        String::new()
    } else {
        let keys: Vec<&str> = mandatory_keys.iter().map(ColumnName::as_str).collect();
        format!("Always extract these keys: {}.", keys.join(", "))
    };
    template.render(
        &[
            ("preamble", template.system_preamble.trim()),
            ("exemplars", &template.render_exemplars("Input", "Output")),
            ("grounding", &grounding),
            ("text", text.trim()),
        ],
        "",
    )
}

/// Text-to-SQL prompt grounded in the joined schema, the enumerations and the
/// current dialog state.
pub fn build_text2sql_prompt(
    question: &str,
    schema: &JoinedSchema,
    catalog: &EnumerationCatalog,
    state: &DialogState,
    template: &PromptTemplate,
) -> Result<Prompt> {
    template.expect_kind(TemplateKind::Text2sql)?;
    for column in state.constraints.keys() {
        if schema.column(column).is_none() {
            return Err(Error::Contract(format!(
                "dialog state column {column} is not in {}",
                schema.view
            )));
        }
    }

    let mut columns = String::new();
    for col in &schema.columns {
        let pk = if col.name == schema.primary_key { ", primary key" } else { "" };
        columns.push_str(&format!("- {}: {} ({}{pk})\n", col.name, col.kind, col.origin));
    }

    let mut enums = String::new();
    for col in &schema.columns {
        if let Some(values) = catalog.values(&col.name) {
            let list = serde_json::to_string(values)?;
            enums.push_str(&format!("- {}: {list}\n", col.name));
        }
    }
    if enums.is_empty() {
        enums.push_str("(none)\n");
    }

    let state_section = if state.is_empty() {
        String::new()
    } else {
        let mut s = String::from("### Dialog State\n");
        for (column, c) in &state.constraints {
            s.push_str(&format!(
                "- {column} {} {} (turn {})\n",
                c.op,
                render_operand(&c.operand)?,
                c.turn_index
            ));
        }
        s
    };

    template.render(
        &[
            ("preamble", template.system_preamble.trim()),
            ("exemplars", &template.render_exemplars("Question", "SQL")),
            ("table", &schema.view),
            ("schema", columns.trim_end()),
            ("enums", enums.trim_end()),
            ("state", state_section.trim_end()),
            ("question", question.trim()),
        ],
        " (reduce the column cap or max_key_words so the enumerations fit)",
    )
}

fn render_operand(operand: &Operand) -> Result<String> {
    Ok(match operand {
        Operand::None => "*".into(),
        other => serde_json::to_string(other)?,
    })
}
