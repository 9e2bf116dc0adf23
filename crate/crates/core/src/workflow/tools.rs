use serde_json::Value;

use crate::dsl::{parse_suite, parse_suite_lenient, TestSuite};
use crate::gateway::{ToolCall, ToolParam, ToolSpec};
use crate::runner::{SuiteRunner, Verdict};
use crate::spec_index::{DefinitionLookup, SpecIndex};

pub const RETRIEVER: &str = "openapi_retriever";
pub const EXECUTOR: &str = "local_executor";

/// What agents can call, bound to one document and one target.
pub struct Toolbox<'a> {
    pub index: &'a SpecIndex,
    pub runner: &'a SuiteRunner<'a>,
}

pub fn retriever_spec() -> ToolSpec {
    ToolSpec {
        name: RETRIEVER.into(),
        description: "Documentation of one endpoint (give `path`) or one schema definition (give `definition`).".into(),
        parameters: vec![
            ToolParam {
                name: "path".into(),
                kind: "string".into(),
                description: "Path template such as /pets/{id}".into(),
                required: false,
            },
            ToolParam {
                name: "definition".into(),
                kind: "string".into(),
                description: "Schema definition name such as Pet".into(),
                required: false,
            },
        ],
    }
}

pub fn executor_spec() -> ToolSpec {
    ToolSpec {
        name: EXECUTOR.into(),
        description: "Parse a test suite document and run it against the API under test.".into(),
        parameters: vec![ToolParam {
            name: "suite".into(),
            kind: "string".into(),
            description: "The complete suite as JSON text".into(),
            required: true,
        }],
    }
}

/// Result of parsing and running a candidate suite.
pub struct Execution {
    pub suite: Option<TestSuite>,
    /// Parse errors or errored cases were found.
    pub fault: bool,
    /// Names of cases that errored at runtime.
    pub errored: Vec<String>,
    pub feedback: String,
}

impl<'a> Toolbox<'a> {
    pub fn call(&self, call: &ToolCall) -> String {
        let args: Value = match serde_json::from_str(&call.arguments) {
            Ok(v) => v,
            Err(e) => return format!("error: arguments are not valid JSON ({e})"),
        };
        let text_arg = |k: &str| args.get(k).and_then(Value::as_str).map(str::to_string);
        match call.name.as_str() {
            RETRIEVER => match (text_arg("definition"), text_arg("path")) {
                (Some(def), _) => match self.index.describe_definition(&def) {
                    DefinitionLookup::Found { text, .. } => text,
                    DefinitionLookup::NotFound(msg) => format!("error: {msg}"),
                },
                (None, Some(path)) => self.index.describe_endpoint(&path).text().to_string(),
                (None, None) => "error: give `path` or `definition`".into(),
            },
            EXECUTOR => match text_arg("suite") {
                Some(text) => self.execute(&text).feedback,
                None => "error: `suite` is required".into(),
            },
            other => format!("error: unknown tool `{other}`"),
        }
    }

    /// Parse `text` and, when it parses, run it.
    pub fn execute(&self, text: &str) -> Execution {
        let suite = match parse_suite(text) {
            Ok(s) => s,
            Err(e) => {
                let mut feedback = String::from("parse failed; diagnostics:\n");
                for d in &e.diagnostics {
                    feedback.push_str(&serde_json::to_string(d).expect("diagnostic serializes"));
                    feedback.push('\n');
                }
                return Execution {
                    suite: None,
                    fault: true,
                    errored: Vec::new(),
                    feedback,
                };
            }
        };
        let (report, _) = self.runner.run(&suite);
        let errored: Vec<String> = report
            .cases
            .iter()
            .filter(|c| c.verdict == Verdict::Errored)
            .map(|c| c.name.clone())
            .collect();
        Execution {
            suite: Some(suite),
            fault: !errored.is_empty(),
            errored,
            feedback: report.render_compact(),
        }
    }
}

/// The suite document inside an agent reply: the first fenced block, or the
/// outermost braces.
pub fn extract_suite_text(reply: &str) -> Option<String> {
    if let Some(start) = reply.find("```") {
        let after = &reply[start + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
        let body = &after[body_start..];
        if let Some(end) = body.find("```") {
            return Some(body[..end].trim().to_string());
        }
    }
    let open = reply.find('{')?;
    let close = reply.rfind('}')?;
    (close > open).then(|| reply[open..=close].to_string())
}

/// Keep the cases of `text` that parse and did not error; names of the rest.
pub fn salvage(text: &str, errored: &[String]) -> (Option<TestSuite>, Vec<String>) {
    let lenient = parse_suite_lenient(text);
    let mut excised: Vec<String> = lenient.rejected_cases().into_iter().collect();
    let Some(mut suite) = lenient.suite else {
        excised.push("<entire document>".into());
        return (None, excised);
    };
    suite.cases.retain(|c| {
        let bad = errored.contains(&c.name);
        if bad {
            excised.push(c.name.clone());
        }
        !bad
    });
    (Some(suite), excised)
}
