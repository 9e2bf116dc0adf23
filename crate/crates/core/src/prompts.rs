//! Agent prompt templates.
//!
//! Each template has a `=== system ===` and a `=== user ===` section. The
//! user section holds every `${name}` placeholder before the
//! `## Instructions` heading, so retrieved context always precedes the
//! instructions. Built-in templates live in `prompts/`; a directory of
//! same-named `.txt` files overrides them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

pub const INSTRUCTIONS_MARKER: &str = "## Instructions";

const BUILTIN: [(&str, &str); 8] = [
    ("single_agent", include_str!("../prompts/single_agent.txt")),
    ("openapi_agent", include_str!("../prompts/openapi_agent.txt")),
    ("header_agent", include_str!("../prompts/header_agent.txt")),
    ("parameter_agent", include_str!("../prompts/parameter_agent.txt")),
    ("value_agent", include_str!("../prompts/value_agent.txt")),
    ("planner", include_str!("../prompts/planner.txt")),
    ("writer", include_str!("../prompts/writer.txt")),
    ("repair", include_str!("../prompts/repair.txt")),
];

/// Reference text for the test format, inserted as `${dsl_reference}`.
pub const DSL_REFERENCE: &str = include_str!("../prompts/dsl_reference.txt");

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PromptError {
    #[error("template `{name}`: {message}")]
    Template { name: String, message: String },
    #[error("template `{name}` has no value for `{placeholder}`")]
    MissingValue { name: String, placeholder: String },
    #[error("unknown template `{0}`")]
    Unknown(String),
    #[error("cannot read template override `{path}`: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: String,
    pub system: String,
    pub user: String,
    pub placeholders: BTreeSet<String>,
}

fn placeholders(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut rest = text;
    let mut offset = 0;
    while let Some(start) = rest.find("${") {
        let after = &rest[start + 2..];
        let Some(end) = after.find('}') else { break };
        out.push((offset + start, after[..end].to_string()));
        offset += start + 2 + end + 1;
        rest = &after[end + 1..];
    }
    out
}

impl PromptTemplate {
    pub fn parse(name: &str, text: &str) -> Result<Self, PromptError> {
        let err = |message: &str| PromptError::Template {
            name: name.to_string(),
            message: message.to_string(),
        };
        let text = text.replace("\r\n", "\n");
        let body = text
            .strip_prefix("=== system ===\n")
            .ok_or_else(|| err("must start with `=== system ===`"))?;
        let (system, user) = body
            .split_once("\n=== user ===\n")
            .ok_or_else(|| err("missing `=== user ===` section"))?;
        if !placeholders(system).is_empty() {
            return Err(err("placeholders belong in the user section"));
        }
        let marker = user
            .find(INSTRUCTIONS_MARKER)
            .ok_or_else(|| err("user section lacks the `## Instructions` heading"))?;
        let found = placeholders(user);
        if let Some((_, late)) = found.iter().find(|(pos, _)| *pos > marker) {
            return Err(err(&format!("placeholder `{late}` appears after the instructions")));
        }
        if let Some((_, bad)) = found
            .iter()
            .find(|(_, n)| !crate::dsl::is_identifier(n))
        {
            return Err(err(&format!("invalid placeholder `{bad}`")));
        }
        Ok(PromptTemplate {
            name: name.to_string(),
            system: system.trim_end().to_string(),
            user: user.trim_end().to_string(),
            placeholders: found.into_iter().map(|(_, n)| n).collect(),
        })
    }

    /// `(system, user)` with every placeholder substituted.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<(String, String), PromptError> {
        let mut user = self.user.clone();
        for name in &self.placeholders {
            let value = values.get(name.as_str()).ok_or_else(|| PromptError::MissingValue {
                name: self.name.clone(),
                placeholder: name.clone(),
            })?;
            user = user.replace(&format!("${{{name}}}"), value.trim_end());
        }
        Ok((self.system.clone(), user))
    }
}

#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<String, PromptTemplate>,
}

impl PromptSet {
    pub fn builtin() -> Self {
        Self::load(None).expect("built-in templates are valid")
    }

    /// Built-ins, replaced by `<dir>/<name>.txt` where such files exist.
    pub fn load(dir: Option<&Path>) -> Result<Self, PromptError> {
        let mut templates = BTreeMap::new();
        for (name, text) in BUILTIN {
            let override_path = dir.map(|d| d.join(format!("{name}.txt")));
            let template = match override_path.filter(|p| p.is_file()) {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Io {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })?;
                    let t = PromptTemplate::parse(name, &text)?;
                    let builtin = PromptTemplate::parse(name, text_of(name))?;
                    if t.placeholders != builtin.placeholders {
                        return Err(PromptError::Template {
                            name: name.into(),
                            message: format!(
                                "override must use exactly the placeholders {:?}",
                                builtin.placeholders
                            ),
                        });
                    }
                    t
                }
                None => PromptTemplate::parse(name, text)?,
            };
            templates.insert(name.to_string(), template);
        }
        Ok(PromptSet { templates })
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .get(name)
            .ok_or_else(|| PromptError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

fn text_of(name: &str) -> &'static str {
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .expect("known template")
}
