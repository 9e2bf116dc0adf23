use std::fmt::Write as _;

use serde::Serialize;

use super::{OperationEntry, SchemaDigest, SpecIndex};

/// Default character budget for retriever output.
pub const DEFAULT_DIGEST_BUDGET: usize = 4000;

/// Structured and prompt-ready description of one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointDigest {
    pub path: String,
    pub operations: Vec<OperationEntry>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EndpointLookup {
    Found(EndpointDigest),
    /// Message returned to the agent as tool output.
    NotFound(String),
}

impl EndpointLookup {
    pub fn text(&self) -> &str {
        match self {
            EndpointLookup::Found(d) => &d.text,
            EndpointLookup::NotFound(msg) => msg,
        }
    }

    pub fn found(&self) -> Option<&EndpointDigest> {
        match self {
            EndpointLookup::Found(d) => Some(d),
            EndpointLookup::NotFound(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DefinitionLookup {
    Found { digest: SchemaDigest, text: String },
    NotFound(String),
}

impl DefinitionLookup {
    pub fn text(&self) -> &str {
        match self {
            DefinitionLookup::Found { text, .. } => text,
            DefinitionLookup::NotFound(msg) => msg,
        }
    }

    pub fn found(&self) -> Option<&SchemaDigest> {
        match self {
            DefinitionLookup::Found { digest, .. } => Some(digest),
            DefinitionLookup::NotFound(_) => None,
        }
    }
}

pub(super) fn describe_endpoint(index: &SpecIndex, path: &str, budget: usize) -> EndpointLookup {
    if !path.starts_with('/') {
        return EndpointLookup::NotFound(format!(
            "`{path}` is not an endpoint path; endpoint paths begin with '/'"
        ));
    }
    let Some(entry) = index.path(path) else {
        let known = index.list_paths().join(", ");
        return EndpointLookup::NotFound(format!(
            "unknown endpoint `{path}`; documented paths: {known}"
        ));
    };

    let mut text = format!("Endpoint {}\n", entry.template);
    for op in entry.operations.values() {
        write!(text, "{}", op.method).unwrap();
        if let Some(id) = &op.operation_id {
            write!(text, " {id}").unwrap();
        }
        if let Some(summary) = &op.summary {
            write!(text, ": {summary}").unwrap();
        }
        text.push('\n');
        if op.parameters.is_empty() {
            text.push_str("  parameters: none\n");
        } else {
            text.push_str("  parameters:\n");
            for p in &op.parameters {
                let req = if p.required { "required" } else { "optional" };
                writeln!(text, "    {} ({}, {}): {}", p.name, p.location, req, p.value_kind).unwrap();
            }
        }
        if op.request_types.is_empty() {
            text.push_str("  request types: none\n");
        } else {
            let types: Vec<_> = op.request_types.iter().map(String::as_str).collect();
            write!(text, "  request types: {}", types.join(", ")).unwrap();
            if let Some(schema) = &op.request_schema_ref {
                write!(text, " | schema {schema}").unwrap();
            }
            text.push('\n');
        }
        text.push_str("  responses:\n");
        for r in op.responses.values() {
            write!(text, "    {} {}", r.status, r.description).unwrap();
            if !r.content_types.is_empty() {
                let types: Vec<_> = r.content_types.iter().map(String::as_str).collect();
                write!(text, " | {}", types.join(", ")).unwrap();
            }
            if let Some(schema) = &r.schema_ref {
                write!(text, " | schema {schema}").unwrap();
            }
            text.push('\n');
        }
    }

    EndpointLookup::Found(EndpointDigest {
        path: entry.template.clone(),
        operations: entry.operations.values().cloned().collect(),
        text: truncate(text, budget),
    })
}

pub(super) fn describe_definition(index: &SpecIndex, name: &str, budget: usize) -> DefinitionLookup {
    let Some(digest) = index.definitions.get(name) else {
        let known: Vec<_> = index.definitions.keys().map(String::as_str).collect();
        return DefinitionLookup::NotFound(format!(
            "definition `{name}` not found; known definitions: {}",
            known.join(", ")
        ));
    };
    let mut text = format!("Definition {}\n", digest.name);
    for p in &digest.properties {
        let req = if p.required { " (required)" } else { "" };
        write!(text, "  {}: {}{}", p.name, p.kind, req).unwrap();
        if let Some(example) = digest.example_values.get(&p.name) {
            write!(text, " example {example}").unwrap();
        }
        text.push('\n');
    }
    DefinitionLookup::Found {
        digest: digest.clone(),
        text: truncate(text, budget),
    }
}

/// Cap `text` at `budget` characters, marker included.
fn truncate(text: String, budget: usize) -> String {
    let total = text.chars().count();
    if total <= budget {
        return text;
    }
    let marker_for = |dropped: usize| format!("\n...[truncated {dropped} characters]");
    // The marker length depends on the number it reports; two passes settle it.
    let mut keep = budget.saturating_sub(marker_for(total).chars().count());
    keep = budget.saturating_sub(marker_for(total - keep).chars().count());
    let mut out: String = text.chars().take(keep).collect();
    out.push_str(&marker_for(total - keep));
    out
}
