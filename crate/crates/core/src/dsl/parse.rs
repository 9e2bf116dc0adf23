use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use super::{is_identifier, variables_in, AssertionKind, TestCase, TestSuite};

pub const SUITE_SCHEMA_VERSION: u32 = 1;

/// Machine-readable problem report, consumed by the repair agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
}

impl Diagnostic {
    fn semantic(code: &str, case: &str, step: Option<usize>, message: String) -> Self {
        Diagnostic {
            code: code.into(),
            message,
            line: None,
            column: None,
            case: Some(case.into()),
            step,
        }
    }

    pub fn is_syntax(&self) -> bool {
        self.code == "syntax"
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.code)?;
        if let (Some(line), Some(col)) = (self.line, self.column) {
            write!(f, " {line}:{col}")?;
        }
        if let Some(case) = &self.case {
            write!(f, " case `{case}`")?;
        }
        if let Some(step) = self.step {
            write!(f, " step {step}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteDocument {
    version: u32,
    name: String,
    #[serde(default)]
    base_headers: BTreeMap<String, String>,
    cases: Vec<TestCase>,
}

/// Accepts a string, number or boolean literal and keeps its text.
pub(super) fn literal<'de, D: Deserializer<'de>>(deserializer: D) -> Result<String, D::Error> {
    match serde_json::Value::deserialize(deserializer)? {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        serde_json::Value::Bool(b) => Ok(b.to_string()),
        other => Err(de::Error::custom(format!(
            "expected a string, number or boolean literal, found {other}"
        ))),
    }
}

pub fn parse_suite(text: &str) -> Result<TestSuite, ParseError> {
    let parsed = parse_suite_lenient(text);
    match parsed.suite {
        Some(suite) if parsed.diagnostics.is_empty() => Ok(suite),
        _ => Err(ParseError {
            diagnostics: parsed.diagnostics,
        }),
    }
}

/// Result of a parse that drops invalid cases instead of failing outright.
#[derive(Debug, Clone)]
pub struct LenientParse {
    /// `None` when the document itself is unreadable.
    pub suite: Option<TestSuite>,
    pub diagnostics: Vec<Diagnostic>,
}

impl LenientParse {
    /// Names of cases removed because of semantic diagnostics.
    pub fn rejected_cases(&self) -> BTreeSet<String> {
        self.diagnostics.iter().filter_map(|d| d.case.clone()).collect()
    }
}

pub fn parse_suite_lenient(text: &str) -> LenientParse {
    let doc: SuiteDocument = match serde_json::from_str(text) {
        Ok(doc) => doc,
        Err(e) => {
            return LenientParse {
                suite: None,
                diagnostics: vec![Diagnostic {
                    code: "syntax".into(),
                    message: strip_position(&e.to_string()),
                    line: Some(e.line()),
                    column: Some(e.column()),
                    case: None,
                    step: None,
                }],
            }
        }
    };
    let mut diagnostics = Vec::new();
    if doc.version != SUITE_SCHEMA_VERSION {
        diagnostics.push(Diagnostic {
            code: "unsupported-version".into(),
            message: format!(
                "suite schema version {} is not supported (expected {SUITE_SCHEMA_VERSION})",
                doc.version
            ),
            line: None,
            column: None,
            case: None,
            step: None,
        });
    }
    let suite = TestSuite {
        name: doc.name,
        base_headers: doc.base_headers,
        cases: doc.cases,
    };
    let mut semantic = validate_suite(&suite);
    for d in &mut semantic {
        if let Some(case) = &d.case {
            if let Some((line, col)) = locate_case(text, case) {
                d.line = Some(line);
                d.column = Some(col);
            }
        }
    }
    let rejected: BTreeSet<String> = semantic.iter().filter_map(|d| d.case.clone()).collect();
    diagnostics.extend(semantic);

    // Drop every case carrying a diagnostic; duplicates keep their first occurrence.
    let mut kept = Vec::new();
    let mut seen = BTreeSet::new();
    for case in suite.cases {
        if seen.insert(case.name.clone()) && !rejected.contains(&case.name) {
            kept.push(case);
        }
    }
    LenientParse {
        suite: Some(TestSuite {
            name: suite.name,
            base_headers: suite.base_headers,
            cases: kept,
        }),
        diagnostics,
    }
}

pub fn serialize_suite(suite: &TestSuite) -> String {
    #[derive(Serialize)]
    struct View<'a> {
        version: u32,
        name: &'a str,
        base_headers: &'a BTreeMap<String, String>,
        cases: &'a [TestCase],
    }
    let mut out = serde_json::to_string_pretty(&View {
        version: SUITE_SCHEMA_VERSION,
        name: &suite.name,
        base_headers: &suite.base_headers,
        cases: &suite.cases,
    })
    .expect("suite serializes");
    out.push('\n');
    out
}

/// Semantic checks over an already structured suite.
pub fn validate_suite(suite: &TestSuite) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    for case in &suite.cases {
        let name = case.name.as_str();
        if !names.insert(name) {
            out.push(Diagnostic::semantic(
                "duplicate-case-name",
                name,
                None,
                format!("case name `{name}` is used more than once"),
            ));
        }
        if !is_identifier(name) {
            out.push(Diagnostic::semantic(
                "invalid-case-name",
                name,
                None,
                "case names must match [A-Za-z][A-Za-z0-9_]*".into(),
            ));
        }
        if case.steps.is_empty() {
            out.push(Diagnostic::semantic(
                "empty-steps",
                name,
                None,
                "a case needs at least one step".into(),
            ));
            continue;
        }
        if case.steps.last().is_some_and(|s| s.assertions.is_empty()) {
            out.push(Diagnostic::semantic(
                "missing-final-assertion",
                name,
                Some(case.steps.len() - 1),
                "the last step must carry at least one assertion".into(),
            ));
        }

        let mut captured: BTreeSet<&str> = BTreeSet::new();
        for (i, step) in case.steps.iter().enumerate() {
            let mut flag = |code: &str, message: String| {
                out.push(Diagnostic::semantic(code, name, Some(i), message));
            };
            if !step.path.starts_with('/') {
                flag("invalid-path", format!("path `{}` must begin with '/'", step.path));
            }
            for placeholder in step.path_placeholders() {
                if !step.path_params.contains_key(placeholder) && !captured.contains(placeholder) {
                    flag(
                        "unbound-path-param",
                        format!("path parameter `{placeholder}` has no binding in path_params or an earlier capture"),
                    );
                }
            }
            let literals = step
                .path_params
                .values()
                .chain(step.query_params.values())
                .chain(step.form_params.values())
                .chain(step.headers.values())
                .chain(step.body.iter().filter_map(|b| b.text.as_ref()))
                .chain(step.assertions.iter().map(|a| &a.expected));
            let mut unbound = BTreeSet::new();
            for literal in literals {
                for var in variables_in(literal) {
                    if !captured.contains(var) {
                        unbound.insert(var.to_string());
                    }
                }
            }
            for var in unbound {
                flag(
                    "unbound-variable",
                    format!("variable `{var}` is used before any step captures it"),
                );
            }
            if let Some(body) = &step.body {
                match (&body.text, &body.file) {
                    (Some(_), Some(_)) | (None, None) => flag(
                        "invalid-body",
                        "a body carries exactly one of `text` or `file`".into(),
                    ),
                    (None, Some(file)) if !is_safe_asset(file) => flag(
                        "invalid-file-reference",
                        format!("file `{file}` must be a relative path inside the asset directory"),
                    ),
                    (Some(_), None) if body.field.is_some() => {
                        flag("invalid-body", "`field` applies only to file bodies".into())
                    }
                    _ => {}
                }
                if body.content_type.trim().is_empty() {
                    flag("invalid-body", "body content_type is empty".into());
                }
            }
            for var in step.captures.keys() {
                if !is_identifier(var) {
                    flag(
                        "invalid-capture",
                        format!("capture variable `{var}` is not an identifier"),
                    );
                }
            }
            for (j, a) in step.assertions.iter().enumerate() {
                if a.kind.is_body() != a.selector.is_some() {
                    flag(
                        "selector-mismatch",
                        format!(
                            "assertion {j} ({}): selectors are required on body assertions and forbidden elsewhere",
                            a.kind
                        ),
                    );
                }
                let bad = match a.kind {
                    AssertionKind::StatusEquals => a
                        .expected_status()
                        .filter(|s| (100..=599).contains(s))
                        .is_none(),
                    AssertionKind::StatusClassEquals => a.expected_class().is_none(),
                    AssertionKind::HeaderContains => !a.expected.contains(':'),
                    AssertionKind::BodyFieldExists => {
                        !matches!(a.expected.as_str(), "true" | "false")
                    }
                    AssertionKind::ContentTypeEquals | AssertionKind::BodyFieldEquals => false,
                };
                if bad && variables_in(&a.expected).is_empty() {
                    flag(
                        "invalid-expected",
                        format!("assertion {j} ({}): `{}` is not a valid expectation", a.kind, a.expected),
                    );
                }
            }
            captured.extend(step.captures.keys().map(String::as_str));
        }
    }
    out
}

fn is_safe_asset(file: &str) -> bool {
    !file.is_empty()
        && !file.starts_with('/')
        && !file.starts_with('\\')
        && !file.contains(':')
        && file.split(['/', '\\']).all(|part| part != "..")
}

/// Line/column of the first `"name"` occurrence of a case in the source text.
fn locate_case(text: &str, case: &str) -> Option<(usize, usize)> {
    let needle = serde_json::to_string(case).ok()?;
    let cases_at = text.find("\"cases\"")?;
    let offset = cases_at + text[cases_at..].find(&needle)?;
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = offset - before.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
    Some((line, column))
}

/// serde_json appends " at line X column Y"; positions are reported separately.
fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(idx) => message[..idx].to_string(),
        None => message.to_string(),
    }
}
