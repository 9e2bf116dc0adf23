//! Sequential execution of test suites against a live target.
//!
//! Every request that receives a response is appended to the
//! [`InteractionLog`], whether its case passes, fails or errors later.

mod log;
mod matcher;
mod select;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsl::{interpolate, Assertion, AssertionKind, TestCase, TestStep, TestSuite};
use crate::spec_index::{normalize_media_type, placeholder_name, split_segments, HttpMethod, SpecIndex};

pub use log::{InteractionLog, InteractionRecord, LogError, SuppliedParams};
pub use matcher::{match_path, url_path, UNMATCHED};
pub use select::ResponseBody;

const MULTIPART_BOUNDARY: &str = "restamp-part-boundary";
const MAX_BODY_BYTES: u64 = 16 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Per-request timeout.
    pub timeout: Duration,
    /// Directory that `file` bodies resolve against.
    pub asset_dir: Option<PathBuf>,
    /// Report every duration as 0 ms so reports are byte-comparable.
    pub zero_durations: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            timeout: Duration::from_secs(10),
            asset_dir: None,
            zero_durations: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Passed,
    Failed,
    Errored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionFailure {
    pub step: usize,
    pub kind: AssertionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<String>,
    pub expected: String,
    pub actual: String,
}

impl AssertionFailure {
    pub fn describe(&self) -> String {
        match &self.selector {
            Some(sel) => format!(
                "{} `{sel}` expected {}, actual {}",
                self.kind, self.expected, self.actual
            ),
            None => format!("{} expected {}, actual {}", self.kind, self.expected, self.actual),
        }
    }
}

/// What one attempted request observed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub method: HttpMethod,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResult {
    pub name: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<AssertionFailure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
    pub duration_ms: u64,
    #[serde(default)]
    pub steps: Vec<StepOutcome>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub passed: usize,
    pub failed: usize,
    pub errored: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub cases: Vec<CaseResult>,
    pub totals: Totals,
}

impl ExecutionReport {
    pub fn push(&mut self, result: CaseResult) {
        match result.verdict {
            Verdict::Passed => self.totals.passed += 1,
            Verdict::Failed => self.totals.failed += 1,
            Verdict::Errored => self.totals.errored += 1,
        }
        self.cases.push(result);
    }

    pub fn case(&self, name: &str) -> Option<&CaseResult> {
        self.cases.iter().find(|c| c.name == name)
    }

    /// Console-style summary fed back to agents. Contains no timings and no
    /// host names, so it is stable across runs against fresh targets.
    pub fn render_compact(&self) -> String {
        let t = self.totals;
        let mut out = format!(
            "cases: {} | passed: {} | failed: {} | errored: {}\n",
            self.cases.len(),
            t.passed,
            t.failed,
            t.errored
        );
        for case in &self.cases {
            match case.verdict {
                Verdict::Passed => writeln!(out, "PASS {}", case.name).unwrap(),
                Verdict::Failed => {
                    writeln!(out, "FAIL {}", case.name).unwrap();
                    for f in &case.failures {
                        let step = case.steps.get(f.step);
                        let call = step
                            .map(|s| format!("{} {}", s.method, s.url))
                            .unwrap_or_default();
                        writeln!(out, "  step {} {call}: {}", f.step, f.describe()).unwrap();
                    }
                }
                Verdict::Errored => writeln!(
                    out,
                    "ERROR {}: {}",
                    case.name,
                    case.fault.as_deref().unwrap_or("unknown fault")
                )
                .unwrap(),
            }
        }
        out
    }
}

/// Executes suites against one target, attributing requests to `index` when given.
pub struct SuiteRunner<'a> {
    target: String,
    options: RunOptions,
    index: Option<&'a SpecIndex>,
    agent: ureq::Agent,
}

impl<'a> SuiteRunner<'a> {
    pub fn new(target: impl Into<String>, options: RunOptions) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(options.timeout)
            .redirects(0)
            .max_idle_connections(0)
            .build();
        SuiteRunner {
            target: target.into().trim_end_matches('/').to_string(),
            options,
            index: None,
            agent,
        }
    }

    pub fn with_index(mut self, index: &'a SpecIndex) -> Self {
        self.index = Some(index);
        self
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn run(&self, suite: &TestSuite) -> (ExecutionReport, InteractionLog) {
        let mut report = ExecutionReport::default();
        let mut log = InteractionLog::new(self.target.clone());
        for case in &suite.cases {
            report.push(self.run_case(suite, case, &mut log));
        }
        (report, log)
    }

    fn run_case(&self, suite: &TestSuite, case: &TestCase, log: &mut InteractionLog) -> CaseResult {
        let started = Instant::now();
        let mut vars = BTreeMap::new();
        let mut steps = Vec::new();
        let mut verdict = Verdict::Passed;
        let mut failures = Vec::new();
        let mut fault = None;

        for (i, step) in case.steps.iter().enumerate() {
            let request = match self.prepare(suite, step, &vars) {
                Ok(r) => r,
                Err(msg) => {
                    verdict = Verdict::Errored;
                    fault = Some(format!("step {i}: {msg}"));
                    break;
                }
            };
            let response = match self.send(&request) {
                Ok(r) => r,
                Err(msg) => {
                    steps.push(StepOutcome {
                        method: step.method,
                        url: request.relative_url.clone(),
                        status: None,
                    });
                    verdict = Verdict::Errored;
                    fault = Some(format!("step {i}: {msg}"));
                    break;
                }
            };
            steps.push(StepOutcome {
                method: step.method,
                url: request.relative_url.clone(),
                status: Some(response.status),
            });
            log.push(self.record(step.method, &request, &response));

            let body = ResponseBody::parse(response.content_type.as_deref(), &response.body);
            let mut step_failures = Vec::new();
            for assertion in &step.assertions {
                match check(assertion, &response, &body, &vars) {
                    Ok(None) => {}
                    Ok(Some((expected, actual))) => step_failures.push(AssertionFailure {
                        step: i,
                        kind: assertion.kind,
                        selector: assertion.selector.clone(),
                        expected,
                        actual,
                    }),
                    Err(msg) => {
                        fault = Some(format!("step {i}: {msg}"));
                        break;
                    }
                }
            }
            if fault.is_some() {
                verdict = Verdict::Errored;
                break;
            }
            if !step_failures.is_empty() {
                verdict = Verdict::Failed;
                failures = step_failures;
                break;
            }
            let mut capture_fault = None;
            for (var, selector) in &step.captures {
                match body.select(selector) {
                    Some(value) => {
                        vars.insert(var.clone(), value);
                    }
                    None => {
                        capture_fault = Some(format!(
                            "step {i}: capture `{var}` selector `{selector}` is unresolvable"
                        ));
                        break;
                    }
                }
            }
            if capture_fault.is_some() {
                verdict = Verdict::Errored;
                fault = capture_fault;
                break;
            }
        }

        let duration_ms = if self.options.zero_durations {
            0
        } else {
            started.elapsed().as_millis() as u64
        };
        CaseResult {
            name: case.name.clone(),
            verdict,
            failures,
            fault,
            duration_ms,
            steps,
        }
    }

    fn prepare(
        &self,
        suite: &TestSuite,
        step: &TestStep,
        vars: &BTreeMap<String, String>,
    ) -> Result<PreparedRequest, String> {
        let mut segments = Vec::new();
        let mut path_names = Vec::new();
        for segment in split_segments(&step.path) {
            match placeholder_name(segment) {
                Some(name) => {
                    let value = match step.path_params.get(name) {
                        Some(v) => interpolate(v, vars)?,
                        None => vars
                            .get(name)
                            .cloned()
                            .ok_or_else(|| format!("path parameter `{name}` is unbound"))?,
                    };
                    path_names.push(name.to_string());
                    segments.push(value);
                }
                None => segments.push(interpolate(segment, vars)?),
            }
        }

        let mut url = url::Url::parse(&self.target).map_err(|e| format!("invalid target url: {e}"))?;
        {
            let mut path = url
                .path_segments_mut()
                .map_err(|_| "target url cannot carry a path".to_string())?;
            path.pop_if_empty();
            path.extend(&segments);
        }
        let mut query_names = Vec::new();
        if !step.query_params.is_empty() {
            let mut pairs = url.query_pairs_mut();
            for (k, v) in &step.query_params {
                pairs.append_pair(k, &interpolate(v, vars)?);
                query_names.push(k.clone());
            }
        }
        let base_path = url::Url::parse(&self.target)
            .map(|u| u.path().trim_end_matches('/').to_string())
            .unwrap_or_default();
        let mut relative_url = url.path()[base_path.len()..].to_string();
        if let Some(q) = url.query() {
            relative_url.push('?');
            relative_url.push_str(q);
        }

        let mut headers = BTreeMap::new();
        for (k, v) in suite.base_headers.iter().chain(&step.headers) {
            headers.insert(k.clone(), interpolate(v, vars)?);
        }

        let mut form_names = Vec::new();
        let (content_type, payload) = match &step.body {
            Some(body) => {
                let media = normalize_media_type(&body.content_type);
                match (&body.text, &body.file) {
                    (Some(text), _) => (
                        Some(body.content_type.clone()),
                        interpolate(text, vars)?.into_bytes(),
                    ),
                    (None, Some(file)) => {
                        let bytes = self.read_asset(file)?;
                        if media == "multipart/form-data" {
                            let field = body.field.as_deref().unwrap_or("file");
                            let mut fields = Vec::new();
                            for (k, v) in &step.form_params {
                                fields.push((k.clone(), interpolate(v, vars)?));
                                form_names.push(k.clone());
                            }
                            form_names.push(field.to_string());
                            (
                                Some(format!("multipart/form-data; boundary={MULTIPART_BOUNDARY}")),
                                multipart(&fields, field, file, &bytes),
                            )
                        } else {
                            (Some(body.content_type.clone()), bytes)
                        }
                    }
                    (None, None) => return Err("body has neither text nor file".into()),
                }
            }
            None if !step.form_params.is_empty() => {
                let mut encoded = url::form_urlencoded::Serializer::new(String::new());
                for (k, v) in &step.form_params {
                    encoded.append_pair(k, &interpolate(v, vars)?);
                    form_names.push(k.clone());
                }
                (
                    Some("application/x-www-form-urlencoded".to_string()),
                    encoded.finish().into_bytes(),
                )
            }
            None => (None, Vec::new()),
        };
        if let Some(ct) = &content_type {
            headers.retain(|k, _| !k.eq_ignore_ascii_case("content-type"));
            headers.insert("Content-Type".into(), ct.clone());
        }

        Ok(PreparedRequest {
            method: step.method,
            url,
            relative_url,
            headers,
            content_type,
            payload,
            params: SuppliedParams {
                path: path_names.into_iter().collect(),
                query: query_names.into_iter().collect(),
                header: step
                    .headers
                    .keys()
                    .chain(suite.base_headers.keys())
                    .map(|h| h.to_ascii_lowercase())
                    .collect(),
                form: form_names.into_iter().collect(),
            },
            template_hint: step.path.clone(),
        })
    }

    fn read_asset(&self, file: &str) -> Result<Vec<u8>, String> {
        let dir = self
            .options
            .asset_dir
            .as_deref()
            .unwrap_or_else(|| Path::new("."));
        std::fs::read(dir.join(file)).map_err(|e| format!("cannot read asset `{file}`: {}", e.kind()))
    }

    fn send(&self, request: &PreparedRequest) -> Result<ObservedResponse, String> {
        let mut call = self.agent.request_url(request.method.as_str(), &request.url);
        for (k, v) in &request.headers {
            call = call.set(k, v);
        }
        let result = if request.content_type.is_some() {
            call.send_bytes(&request.payload)
        } else {
            call.call()
        };
        let response = match result {
            Ok(r) | Err(ureq::Error::Status(_, r)) => r,
            Err(ureq::Error::Transport(t)) => {
                return Err(describe_transport(&t, request));
            }
        };
        let status = response.status();
        let content_type = response.header("Content-Type").map(str::to_string);
        let headers = response
            .headers_names()
            .into_iter()
            .filter_map(|name| {
                let value = response.header(&name)?.to_string();
                Some((name, value))
            })
            .collect();
        let mut body = Vec::new();
        response
            .into_reader()
            .take(MAX_BODY_BYTES)
            .read_to_end(&mut body)
            .map_err(|e| format!("reading response body failed: {}", e.kind()))?;
        Ok(ObservedResponse {
            status,
            content_type,
            headers,
            body,
        })
    }

    fn record(
        &self,
        method: HttpMethod,
        request: &PreparedRequest,
        response: &ObservedResponse,
    ) -> InteractionRecord {
        let template = self
            .index
            .and_then(|index| match_path(index, method, &request.relative_url))
            .unwrap_or_else(|| {
                if self.index.is_none() && request.template_hint.contains('{') {
                    request.template_hint.clone()
                } else {
                    UNMATCHED.to_string()
                }
            });
        InteractionRecord {
            seq: 0,
            method,
            template,
            url: request.relative_url.clone(),
            request_content_type: request
                .content_type
                .as_deref()
                .map(normalize_media_type),
            params: request.params.clone(),
            status: response.status,
            response_content_type: response.content_type.as_deref().map(normalize_media_type),
            body_sha256: hex::encode(Sha256::digest(&response.body)),
        }
    }
}

/// Run `suite` against `target` without spec attribution.
pub fn run_suite(suite: &TestSuite, target: &str, options: &RunOptions) -> (ExecutionReport, InteractionLog) {
    SuiteRunner::new(target, options.clone()).run(suite)
}

struct PreparedRequest {
    method: HttpMethod,
    url: url::Url,
    relative_url: String,
    headers: BTreeMap<String, String>,
    content_type: Option<String>,
    payload: Vec<u8>,
    params: SuppliedParams,
    template_hint: String,
}

struct ObservedResponse {
    status: u16,
    content_type: Option<String>,
    headers: Vec<(String, String)>,
    body: Vec<u8>,
}

fn describe_transport(t: &ureq::Transport, request: &PreparedRequest) -> String {
    use std::error::Error as _;
    let timed_out = t
        .source()
        .and_then(|s| s.downcast_ref::<std::io::Error>())
        .is_some_and(|e| {
            matches!(
                e.kind(),
                std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock
            )
        });
    let what = if timed_out {
        "timeout".to_string()
    } else {
        match t.kind() {
            ureq::ErrorKind::ConnectionFailed => "connection failed".to_string(),
            ureq::ErrorKind::Dns => "dns lookup failed".to_string(),
            other => format!("transport error ({other:?})"),
        }
    };
    format!("{what} for {} {}", request.method, request.relative_url)
}

/// `Ok(None)` on success, `Ok(Some((expected, actual)))` on a failed check.
fn check(
    assertion: &Assertion,
    response: &ObservedResponse,
    body: &ResponseBody,
    vars: &BTreeMap<String, String>,
) -> Result<Option<(String, String)>, String> {
    let expected = interpolate(&assertion.expected, vars)?;
    let fail = |actual: String| Ok(Some((expected.clone(), actual)));
    match assertion.kind {
        AssertionKind::StatusEquals => {
            let want: u16 = expected
                .trim()
                .parse()
                .map_err(|_| format!("`{expected}` is not a status code"))?;
            if response.status == want {
                Ok(None)
            } else {
                fail(response.status.to_string())
            }
        }
        AssertionKind::StatusClassEquals => {
            let class = expected
                .trim()
                .to_ascii_lowercase()
                .strip_suffix("xx")
                .and_then(|d| d.parse::<u16>().ok())
                .ok_or_else(|| format!("`{expected}` is not a status class"))?;
            if response.status / 100 == class {
                Ok(None)
            } else {
                fail(format!("{}xx", response.status / 100))
            }
        }
        AssertionKind::HeaderContains => {
            let (name, needle) = expected
                .split_once(':')
                .ok_or_else(|| format!("`{expected}` is not `Header: value`"))?;
            let actual = if name.trim().eq_ignore_ascii_case("content-type") {
                response.content_type.clone()
            } else {
                response
                    .headers
                    .iter()
                    .find(|(k, _)| k.eq_ignore_ascii_case(name.trim()))
                    .map(|(_, v)| v.clone())
            };
            match actual {
                Some(v) if v.contains(needle.trim()) => Ok(None),
                Some(v) => fail(v),
                None => fail("<absent>".into()),
            }
        }
        AssertionKind::ContentTypeEquals => {
            let actual = response
                .content_type
                .as_deref()
                .map(normalize_media_type)
                .unwrap_or_default();
            if actual == normalize_media_type(&expected) {
                Ok(None)
            } else if actual.is_empty() {
                fail("<none>".into())
            } else {
                fail(actual)
            }
        }
        AssertionKind::BodyFieldEquals => {
            let selector = assertion.selector.as_deref().unwrap_or("$");
            match body.select(selector) {
                Some(v) if v == expected => Ok(None),
                Some(v) => fail(v),
                None => fail("<missing>".into()),
            }
        }
        AssertionKind::BodyFieldExists => {
            let selector = assertion.selector.as_deref().unwrap_or("$");
            let want = expected.trim() != "false";
            let present = body.select(selector).is_some();
            if present == want {
                Ok(None)
            } else {
                fail(present.to_string())
            }
        }
    }
}

fn multipart(fields: &[(String, String)], file_field: &str, file: &str, bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for (name, value) in fields {
        out.extend_from_slice(format!("--{MULTIPART_BOUNDARY}\r\n").as_bytes());
        out.extend_from_slice(
            format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").as_bytes(),
        );
    }
    let filename = Path::new(file)
        .file_name()
        .and_then(|f| f.to_str())
        .unwrap_or(file);
    out.extend_from_slice(format!("--{MULTIPART_BOUNDARY}\r\n").as_bytes());
    out.extend_from_slice(
        format!(
            "Content-Disposition: form-data; name=\"{file_field}\"; filename=\"{filename}\"\r\nContent-Type: {}\r\n\r\n",
            guess_media_type(filename)
        )
        .as_bytes(),
    );
    out.extend_from_slice(bytes);
    out.extend_from_slice(format!("\r\n--{MULTIPART_BOUNDARY}--\r\n").as_bytes());
    out
}

fn guess_media_type(filename: &str) -> &'static str {
    let ext = filename.rsplit('.').next().unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "json" => "application/json",
        "xml" => "application/xml",
        "txt" => "text/plain",
        _ => "application/octet-stream",
    }
}
