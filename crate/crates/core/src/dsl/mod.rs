//! Declarative test-suite documents.
//!
//! A suite is a JSON document (schema version 1):
//!
//! ```json
//! {
//!   "version": 1,
//!   "name": "minipet-seed",
//!   "base_headers": {"Accept": "application/json"},
//!   "cases": [{
//!     "name": "testListPets",
//!     "description": "lists pets",
//!     "origin": "seed",
//!     "steps": [{
//!       "method": "GET",
//!       "path": "/pets",
//!       "assertions": [{"kind": "status_equals", "expected": 200}]
//!     }]
//!   }]
//! }
//! ```
//!
//! `{{var}}` inside any literal is replaced by a value captured by an
//! earlier step of the same case. Asset files referenced by bodies live in
//! an `assets/` directory beside the suite file.

mod lint;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::spec_index::HttpMethod;

pub use lint::{lint_suite, LintCriterion, LintFinding};
pub use parse::{
    parse_suite, parse_suite_lenient, serialize_suite, validate_suite, Diagnostic, LenientParse,
    ParseError, SUITE_SCHEMA_VERSION,
};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TestSuite {
    pub name: String,
    pub base_headers: BTreeMap<String, String>,
    pub cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn case(&self, name: &str) -> Option<&TestCase> {
        self.cases.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    #[default]
    Seed,
    SingleAgent,
    MultiAgent,
    Repair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub origin: Origin,
    pub steps: Vec<TestStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestStep {
    pub method: HttpMethod,
    pub path: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub path_params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub query_params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub form_params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub headers: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<RequestBody>,
    /// Variable name → response selector.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub captures: BTreeMap<String, String>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

impl TestStep {
    pub fn new(method: HttpMethod, path: impl Into<String>) -> Self {
        TestStep {
            method,
            path: path.into(),
            path_params: BTreeMap::new(),
            query_params: BTreeMap::new(),
            form_params: BTreeMap::new(),
            headers: BTreeMap::new(),
            body: None,
            captures: BTreeMap::new(),
            assertions: Vec::new(),
        }
    }

    /// `{name}` placeholders in the step path.
    pub fn path_placeholders(&self) -> Vec<&str> {
        crate::spec_index::split_segments(&self.path)
            .into_iter()
            .filter_map(crate::spec_index::placeholder_name)
            .collect()
    }
}

/// Payload: inline text, or an asset file sent raw or as a multipart part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestBody {
    pub content_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// Multipart field name for `file`; defaults to `file`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl RequestBody {
    pub fn text(content_type: impl Into<String>, text: impl Into<String>) -> Self {
        RequestBody {
            content_type: content_type.into(),
            text: Some(text.into()),
            file: None,
            field: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssertionKind {
    StatusEquals,
    StatusClassEquals,
    /// `expected` is `Header-Name: substring`.
    HeaderContains,
    ContentTypeEquals,
    BodyFieldEquals,
    /// `expected` is `true` or `false`.
    BodyFieldExists,
}

impl AssertionKind {
    pub fn is_body(self) -> bool {
        matches!(self, AssertionKind::BodyFieldEquals | AssertionKind::BodyFieldExists)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AssertionKind::StatusEquals => "status_equals",
            AssertionKind::StatusClassEquals => "status_class_equals",
            AssertionKind::HeaderContains => "header_contains",
            AssertionKind::ContentTypeEquals => "content_type_equals",
            AssertionKind::BodyFieldEquals => "body_field_equals",
            AssertionKind::BodyFieldExists => "body_field_exists",
        }
    }
}

impl fmt::Display for AssertionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub kind: AssertionKind,
    #[serde(deserialize_with = "parse::literal")]
    pub expected: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<String>,
}

impl Assertion {
    pub fn status(code: u16) -> Self {
        Assertion {
            kind: AssertionKind::StatusEquals,
            expected: code.to_string(),
            selector: None,
        }
    }

    pub fn body_equals(selector: impl Into<String>, expected: impl Into<String>) -> Self {
        Assertion {
            kind: AssertionKind::BodyFieldEquals,
            expected: expected.into(),
            selector: Some(selector.into()),
        }
    }

    /// Expected status code, for status assertions with a valid literal.
    pub fn expected_status(&self) -> Option<u16> {
        match self.kind {
            AssertionKind::StatusEquals => self.expected.trim().parse().ok(),
            _ => None,
        }
    }

    /// Expected hundreds class (`4xx` → 4), for class assertions.
    pub fn expected_class(&self) -> Option<u16> {
        if self.kind != AssertionKind::StatusClassEquals {
            return None;
        }
        let e = self.expected.trim().to_ascii_lowercase();
        let digit = e.strip_suffix("xx")?;
        digit.parse().ok().filter(|d| (1..=5).contains(d))
    }
}

/// `{{name}}` references inside a literal.
pub fn variables_in(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                out.push(after[..end].trim());
                rest = &after[end + 2..];
            }
            None => break,
        }
    }
    out
}

/// Replace `{{name}}` references; unknown names are reported.
pub fn interpolate(text: &str, vars: &BTreeMap<String, String>) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else {
            out.push_str(&rest[start..]);
            return Ok(out);
        };
        let name = after[..end].trim();
        let value = vars
            .get(name)
            .ok_or_else(|| format!("variable `{name}` is not bound"))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// `[A-Za-z][A-Za-z0-9_]*`
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Concatenate two suites; colliding case names get `_2`, `_3`, ... suffixes.
pub fn merge_suites(base: &TestSuite, generated: &TestSuite) -> TestSuite {
    let mut merged = base.clone();
    for (k, v) in &generated.base_headers {
        merged.base_headers.entry(k.clone()).or_insert_with(|| v.clone());
    }
    let mut taken: BTreeSet<String> = merged.cases.iter().map(|c| c.name.clone()).collect();
    for case in &generated.cases {
        let mut case = case.clone();
        if taken.contains(&case.name) {
            let stem = case.name.clone();
            let mut n = 2;
            while taken.contains(&format!("{stem}_{n}")) {
                n += 1;
            }
            case.name = format!("{stem}_{n}");
        }
        taken.insert(case.name.clone());
        merged.cases.push(case);
    }
    merged
}
