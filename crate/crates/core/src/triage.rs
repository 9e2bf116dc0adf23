//! Rule-based categorization of failed test cases.
//!
//! Rules apply in order and the first match wins:
//!
//! 1. the case errored: `runtime_error`;
//! 2. a failing assertion expects something the document does not list for
//!    the matched operation, or the request matched no operation:
//!    `semantically_incorrect`;
//! 3. the failing request addresses a resource id that no earlier step
//!    provisioned: `missing_information`;
//! 4. otherwise the live response contradicts documented behavior:
//!    `bug_exposed`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::{variables_in, AssertionKind, TestStep, TestSuite};
use crate::runner::{match_path, AssertionFailure, CaseResult, ExecutionReport, Verdict};
use crate::spec_index::{
    normalize_media_type, placeholder_name, split_segments, HttpMethod, OperationEntry, SpecIndex,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    BugExposed,
    MissingInformation,
    SemanticallyIncorrect,
    RuntimeError,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::BugExposed,
        Category::MissingInformation,
        Category::SemanticallyIncorrect,
        Category::RuntimeError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::BugExposed => "bug_exposed",
            Category::MissingInformation => "missing_information",
            Category::SemanticallyIncorrect => "semantically_incorrect",
            Category::RuntimeError => "runtime_error",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Category::BugExposed => "API Bug Exposed",
            Category::MissingInformation => "Missing Information",
            Category::SemanticallyIncorrect => "Semantically Incorrect",
            Category::RuntimeError => "Runtime/Syntactical Error",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageLabel {
    pub case: String,
    pub label: Category,
    pub rationale: String,
    #[serde(default)]
    pub overridden: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triage {
    pub labels: Vec<TriageLabel>,
}

impl Triage {
    pub fn get(&self, case: &str) -> Option<&TriageLabel> {
        self.labels.iter().find(|l| l.case == case)
    }

    pub fn count(&self, category: Category) -> usize {
        self.labels.iter().filter(|l| l.label == category).count()
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("triage serializes");
        text.push('\n');
        text
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TriageError {
    #[error("override names unknown case `{0}`")]
    UnknownCase(String),
    #[error("invalid overrides: {0}")]
    Invalid(String),
}

pub fn classify(report: &ExecutionReport, suite: &TestSuite, index: &SpecIndex) -> Triage {
    let mut labels = Vec::new();
    for (position, result) in report.cases.iter().enumerate() {
        let (label, rationale) = match result.verdict {
            Verdict::Passed => continue,
            Verdict::Errored => (
                Category::RuntimeError,
                format!(
                    "rule 1: case errored ({})",
                    result.fault.as_deref().unwrap_or("no detail")
                ),
            ),
            Verdict::Failed => classify_failed(report, position, result, suite, index),
        };
        labels.push(TriageLabel {
            case: result.name.clone(),
            label,
            rationale,
            overridden: false,
        });
    }
    Triage { labels }
}

fn classify_failed(
    report: &ExecutionReport,
    position: usize,
    result: &CaseResult,
    suite: &TestSuite,
    index: &SpecIndex,
) -> (Category, String) {
    let Some(first) = result.failures.first() else {
        return (
            Category::BugExposed,
            "rule 4: failed without recorded assertion detail".into(),
        );
    };
    let outcome = result.steps.get(first.step);
    let matched = outcome.and_then(|o| {
        let template = match_path(index, o.method, &o.url)?;
        Some((template.clone(), index.operation(&template, o.method)?))
    });
    let Some((template, op)) = matched else {
        return (Category::SemanticallyIncorrect, "rule 2: unmatched path".into());
    };
    let method = outcome.map(|o| o.method).expect("matched implies outcome");

    for failure in &result.failures {
        if let Some(why) = undocumented(failure, op, index) {
            return (
                Category::SemanticallyIncorrect,
                format!("rule 2: {why}, not documented for {method} {template}"),
            );
        }
    }

    let step = suite
        .case(&result.name)
        .and_then(|c| c.steps.get(first.step));
    if let Some(step) = step {
        for (name, literal) in path_literals(step) {
            if !provisioned(&literal, report, position, first.step, suite) {
                return (
                    Category::MissingInformation,
                    format!(
                        "rule 3: path parameter {name}={literal} of {method} {template} was not provisioned by an earlier step"
                    ),
                );
            }
        }
    }

    (
        Category::BugExposed,
        format!(
            "rule 4: documented expectation {} {} contradicted by actual {}",
            first.kind, first.expected, first.actual
        ),
    )
}

/// Why `failure` expects something outside the documented behavior of `op`.
fn undocumented(failure: &AssertionFailure, op: &OperationEntry, index: &SpecIndex) -> Option<String> {
    let expected = failure.expected.trim();
    match failure.kind {
        AssertionKind::StatusEquals => {
            let documented = expected
                .parse::<u16>()
                .is_ok_and(|s| op.responses.contains_key(&s));
            (!documented).then(|| format!("expected status {expected}"))
        }
        AssertionKind::StatusClassEquals => {
            let class = expected
                .to_ascii_lowercase()
                .strip_suffix("xx")
                .and_then(|d| d.parse::<u16>().ok());
            let documented = class.is_some_and(|c| op.status_classes().contains(&c));
            (!documented).then(|| format!("expected status class {expected}"))
        }
        AssertionKind::ContentTypeEquals => {
            let media = normalize_media_type(expected);
            (!op.response_types().contains(media.as_str()))
                .then(|| format!("expected content type {expected}"))
        }
        AssertionKind::HeaderContains => Some(format!("header expectation `{expected}`")),
        AssertionKind::BodyFieldEquals | AssertionKind::BodyFieldExists => {
            let selector = failure.selector.as_deref().unwrap_or("$");
            let field = selector
                .trim_start_matches('$')
                .split(['.', '[', ']'])
                .find(|s| !s.is_empty() && s.parse::<usize>().is_err());
            let documented = match field {
                None => op.responses.values().any(|r| !r.content_types.is_empty()),
                Some(field) => op
                    .responses
                    .values()
                    .filter_map(|r| r.schema_ref.as_deref())
                    .filter_map(|name| index.definitions.get(name))
                    .any(|def| def.property(field).is_some()),
            };
            (!documented).then(|| format!("body field `{selector}`"))
        }
    }
}

/// `(name, literal)` for path placeholders given as literal values.
fn path_literals(step: &TestStep) -> Vec<(String, String)> {
    split_segments(&step.path)
        .into_iter()
        .filter_map(placeholder_name)
        .filter_map(|name| {
            let value = step.path_params.get(name)?;
            variables_in(value)
                .is_empty()
                .then(|| (name.to_string(), value.clone()))
        })
        .collect()
}

fn tokens(text: &str) -> BTreeSet<&str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '_'))
        .filter(|t| !t.is_empty())
        .collect()
}

/// `literal` appears in the payload or asserted body of a successful
/// POST/PUT that ran before step `step` of case `position`.
fn provisioned(
    literal: &str,
    report: &ExecutionReport,
    position: usize,
    step: usize,
    suite: &TestSuite,
) -> bool {
    for (i, result) in report.cases.iter().enumerate().take(position + 1) {
        let Some(case) = suite.case(&result.name) else {
            continue;
        };
        let limit = if i == position { step } else { case.steps.len() };
        for (j, s) in case.steps.iter().enumerate().take(limit) {
            if !matches!(s.method, HttpMethod::Post | HttpMethod::Put) {
                continue;
            }
            let succeeded = result
                .steps
                .get(j)
                .and_then(|o| o.status)
                .is_some_and(|st| (200..300).contains(&st));
            if !succeeded {
                continue;
            }
            let in_body = s
                .body
                .as_ref()
                .and_then(|b| b.text.as_deref())
                .is_some_and(|t| tokens(t).contains(literal));
            let in_assertion = s.assertions.iter().any(|a| {
                a.kind == AssertionKind::BodyFieldEquals && tokens(&a.expected).contains(literal)
            });
            if in_body || in_assertion {
                return true;
            }
        }
    }
    false
}

/// Replace labels per `overrides` (case name → category).
pub fn apply_overrides(
    triage: &Triage,
    overrides: &BTreeMap<String, Category>,
) -> Result<Triage, TriageError> {
    let mut out = triage.clone();
    for (case, category) in overrides {
        let entry = out
            .labels
            .iter_mut()
            .find(|l| &l.case == case)
            .ok_or_else(|| TriageError::UnknownCase(case.clone()))?;
        entry.label = *category;
        entry.overridden = true;
        entry.rationale = format!("manual override ({})", entry.rationale);
    }
    Ok(out)
}

/// Parse an overrides file: a JSON object mapping case names to labels.
pub fn parse_overrides(text: &str) -> Result<BTreeMap<String, Category>, TriageError> {
    serde_json::from_str(text).map_err(|e| TriageError::Invalid(e.to_string()))
}
