use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AssertionKind, TestSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LintCriterion {
    MeaningfulNaming,
    StructuralCoherence,
    IdiomaticCorrectness,
}

impl fmt::Display for LintCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LintCriterion::MeaningfulNaming => "meaningful-naming",
            LintCriterion::StructuralCoherence => "structural-coherence",
            LintCriterion::IdiomaticCorrectness => "idiomatic-correctness",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFinding {
    pub criterion: LintCriterion,
    pub case: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub message: String,
}

/// Words of an identifier: `_`-separated chunks split at lower→upper case
/// boundaries, digit-only chunks dropped.
fn camel_words(name: &str) -> Vec<String> {
    let mut words = Vec::new();
    for chunk in name.split('_') {
        let mut current = String::new();
        let mut prev_lower = false;
        for c in chunk.chars() {
            if c.is_ascii_uppercase() && prev_lower && !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            prev_lower = c.is_ascii_lowercase() || c.is_ascii_digit();
            current.push(c);
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words.retain(|w| w.chars().any(|c| c.is_ascii_alphabetic()));
    words
}

/// Mechanical readability checks; an empty result means the suite is clean.
pub fn lint_suite(suite: &TestSuite) -> Vec<LintFinding> {
    let mut findings = Vec::new();
    for case in &suite.cases {
        let mut push = |criterion, step, message: String| {
            findings.push(LintFinding {
                criterion,
                case: case.name.clone(),
                step,
                message,
            })
        };

        let words = camel_words(&case.name);
        if !case.name.starts_with("test") || words.len() < 2 {
            push(
                LintCriterion::MeaningfulNaming,
                None,
                format!(
                    "`{}` should start with `test` and name the behavior in at least two camel-case words",
                    case.name
                ),
            );
        }
        if case.description.trim().is_empty() {
            push(
                LintCriterion::StructuralCoherence,
                None,
                "case has no description of the scenario it checks".into(),
            );
        }

        let last = case.steps.len().saturating_sub(1);
        for (i, step) in case.steps.iter().enumerate() {
            for var in step.captures.keys() {
                if var.len() < 3 {
                    push(
                        LintCriterion::MeaningfulNaming,
                        Some(i),
                        format!("capture variable `{var}` is too short to be descriptive"),
                    );
                }
            }
            if i < last && !step.assertions.is_empty() {
                push(
                    LintCriterion::StructuralCoherence,
                    Some(i),
                    "assertions appear before the final request; keep arrange steps free of assertions (arrange-act-assert)".into(),
                );
            }
            if step.path.contains('?') {
                push(
                    LintCriterion::IdiomaticCorrectness,
                    Some(i),
                    "query string embedded in the path; use query_params".into(),
                );
            }
            if step.body.is_some()
                && step
                    .headers
                    .keys()
                    .any(|h| h.eq_ignore_ascii_case("content-type"))
            {
                push(
                    LintCriterion::IdiomaticCorrectness,
                    Some(i),
                    "Content-Type header duplicates the body content_type".into(),
                );
            }
            let mut seen = BTreeSet::new();
            for a in &step.assertions {
                if !seen.insert((a.kind.as_str(), a.selector.as_deref(), a.expected.as_str())) {
                    push(
                        LintCriterion::IdiomaticCorrectness,
                        Some(i),
                        format!("duplicate {} assertion", a.kind),
                    );
                }
            }
            let has_status = step
                .assertions
                .iter()
                .any(|a| a.kind == AssertionKind::StatusEquals);
            let has_class = step
                .assertions
                .iter()
                .any(|a| a.kind == AssertionKind::StatusClassEquals);
            if has_status && has_class {
                push(
                    LintCriterion::IdiomaticCorrectness,
                    Some(i),
                    "status class assertion is redundant next to an exact status assertion".into(),
                );
            }
        }
    }
    findings
}
