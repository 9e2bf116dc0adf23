//! Queryable model of an OpenAPI document.
//!
//! Swagger 2.0 and OpenAPI 3.x documents are normalized into one internal
//! model: `consumes`/`produces` (2.0) and `requestBody`/`content` (3.x) both
//! become request and response content-type sets, `formData` parameters become
//! form parameters, and local `$ref` indirections are resolved at load time.

mod digest;
mod load;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use digest::{DefinitionLookup, EndpointDigest, EndpointLookup, DEFAULT_DIGEST_BUDGET};
pub use load::{load_spec, load_spec_file, DocumentFormat};

/// Errors raised while loading a document into a [`SpecIndex`].
#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("duplicate path template `{0}`")]
    DuplicatePath(String),
    #[error("unsupported dialect: {0}")]
    UnsupportedDialect(String),
    #[error("invalid document: {0}")]
    Invalid(String),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HttpMethod {
    Get,
    Put,
    Post,
    Delete,
    Options,
    Head,
    Patch,
    Trace,
}

impl HttpMethod {
    pub const ALL: [HttpMethod; 8] = [
        HttpMethod::Get,
        HttpMethod::Put,
        HttpMethod::Post,
        HttpMethod::Delete,
        HttpMethod::Options,
        HttpMethod::Head,
        HttpMethod::Patch,
        HttpMethod::Trace,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HttpMethod::Get => "GET",
            HttpMethod::Put => "PUT",
            HttpMethod::Post => "POST",
            HttpMethod::Delete => "DELETE",
            HttpMethod::Options => "OPTIONS",
            HttpMethod::Head => "HEAD",
            HttpMethod::Patch => "PATCH",
            HttpMethod::Trace => "TRACE",
        }
    }

    /// Methods whose requests carry a payload.
    pub fn bears_body(self) -> bool {
        matches!(self, HttpMethod::Post | HttpMethod::Put | HttpMethod::Patch)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamLocation {
    Path,
    Query,
    Header,
    Form,
}

impl ParamLocation {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamLocation::Path => "path",
            ParamLocation::Query => "query",
            ParamLocation::Header => "header",
            ParamLocation::Form => "form",
        }
    }
}

impl fmt::Display for ParamLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scalar kind plus the constraints the retriever reports to agents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValueKind {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub enum_values: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maximum: Option<f64>,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.kind)?;
        if let Some(format) = &self.format {
            write!(f, " {format}")?;
        }
        if !self.enum_values.is_empty() {
            write!(f, " enum [{}]", self.enum_values.join(", "))?;
        }
        match (self.minimum, self.maximum) {
            (Some(lo), Some(hi)) => write!(f, " range [{lo}, {hi}]")?,
            (Some(lo), None) => write!(f, " min {lo}")?,
            (None, Some(hi)) => write!(f, " max {hi}")?,
            (None, None) => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub location: ParamLocation,
    pub required: bool,
    pub value_kind: ValueKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseEntry {
    pub status: u16,
    pub description: String,
    pub content_types: BTreeSet<String>,
    /// Named definition the response body refers to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationEntry {
    pub method: HttpMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operation_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    pub parameters: Vec<ParameterEntry>,
    pub request_types: BTreeSet<String>,
    /// Named definition the request body refers to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_schema_ref: Option<String>,
    pub responses: BTreeMap<u16, ResponseEntry>,
}

impl OperationEntry {
    pub fn parameter(&self, name: &str, location: ParamLocation) -> Option<&ParameterEntry> {
        self.parameters
            .iter()
            .find(|p| p.location == location && p.name == name)
    }

    /// Union of every documented response content type.
    pub fn response_types(&self) -> BTreeSet<&str> {
        self.responses
            .values()
            .flat_map(|r| r.content_types.iter().map(String::as_str))
            .collect()
    }

    pub fn status_classes(&self) -> BTreeSet<u16> {
        self.responses.keys().map(|s| s / 100).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub template: String,
    pub operations: BTreeMap<HttpMethod, OperationEntry>,
}

impl PathEntry {
    /// Template segments, without the leading empty segment.
    pub fn segments(&self) -> Vec<&str> {
        split_segments(&self.template)
    }

    pub fn parameter_names(&self) -> Vec<&str> {
        self.segments()
            .into_iter()
            .filter_map(placeholder_name)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyDigest {
    pub name: String,
    pub kind: ValueKind,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDigest {
    pub name: String,
    pub properties: Vec<PropertyDigest>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub example_values: BTreeMap<String, String>,
}

impl SchemaDigest {
    pub fn property(&self, name: &str) -> Option<&PropertyDigest> {
        self.properties.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceVersion {
    #[serde(rename = "2.0")]
    Swagger2,
    #[serde(rename = "3.x")]
    OpenApi3,
}

/// Immutable, queryable view of an OpenAPI document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecIndex {
    pub title: String,
    pub source_version: SourceVersion,
    pub paths: Vec<PathEntry>,
    pub definitions: BTreeMap<String, SchemaDigest>,
}

impl SpecIndex {
    /// Path templates in document order.
    pub fn list_paths(&self) -> Vec<String> {
        self.paths.iter().map(|p| p.template.clone()).collect()
    }

    pub fn path(&self, template: &str) -> Option<&PathEntry> {
        self.paths.iter().find(|p| p.template == template)
    }

    pub fn operation(&self, template: &str, method: HttpMethod) -> Option<&OperationEntry> {
        self.path(template)?.operations.get(&method)
    }

    /// All `(template, operation)` pairs in document order.
    pub fn operations(&self) -> impl Iterator<Item = (&str, &OperationEntry)> {
        self.paths.iter().flat_map(|p| {
            p.operations
                .values()
                .map(move |op| (p.template.as_str(), op))
        })
    }

    pub fn operation_count(&self) -> usize {
        self.paths.iter().map(|p| p.operations.len()).sum()
    }

    pub fn describe_endpoint(&self, path: &str) -> EndpointLookup {
        digest::describe_endpoint(self, path, DEFAULT_DIGEST_BUDGET)
    }

    pub fn describe_endpoint_with_budget(&self, path: &str, budget: usize) -> EndpointLookup {
        digest::describe_endpoint(self, path, budget)
    }

    pub fn describe_definition(&self, name: &str) -> DefinitionLookup {
        digest::describe_definition(self, name, DEFAULT_DIGEST_BUDGET)
    }

    /// Stable fingerprint of the documented surface, used to check that two
    /// coverage reports come from the same document.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(&self.paths).expect("index serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

pub(crate) fn split_segments(path: &str) -> Vec<&str> {
    path.trim_start_matches('/')
        .split('/')
        .filter(|s| !s.is_empty())
        .collect()
}

/// `{name}` segment → `name`.
pub(crate) fn placeholder_name(segment: &str) -> Option<&str> {
    segment
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .filter(|s| !s.is_empty() && !s.contains(['{', '}']))
}

/// Media type without parameters, lower-cased.
pub fn normalize_media_type(raw: &str) -> String {
    raw.split(';').next().unwrap_or("").trim().to_ascii_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_parse_is_case_insensitive() {
        assert_eq!(HttpMethod::parse("delete"), Some(HttpMethod::Delete));
        assert_eq!(HttpMethod::parse("FETCH"), None);
    }

    #[test]
    fn media_type_drops_parameters() {
        assert_eq!(
            normalize_media_type("Application/JSON; charset=utf-8"),
            "application/json"
        );
    }

    #[test]
    fn placeholder_segments() {
        assert_eq!(placeholder_name("{id}"), Some("id"));
        assert_eq!(placeholder_name("{}"), None);
        assert_eq!(placeholder_name("pets"), None);
        assert_eq!(placeholder_name("{{petId}}"), None);
        assert_eq!(split_segments("/pets/{id}"), vec!["pets", "{id}"]);
        assert!(split_segments("/").is_empty());
    }
}
