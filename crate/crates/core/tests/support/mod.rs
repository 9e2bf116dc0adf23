//! Generators, a brute-force coverage oracle and property checks shared by
//! the core integration tests and the workspace acceptance target.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use serde_json::Value;

use restamp_core::coverage::{compute_coverage, CoverageReport, Metric};
use restamp_core::dsl::{
    lint_suite, parse_suite, serialize_suite, Assertion, AssertionKind, Origin, RequestBody, TestCase,
    TestStep, TestSuite,
};
use restamp_core::runner::{
    AssertionFailure, CaseResult, ExecutionReport, InteractionLog, InteractionRecord, StepOutcome,
    SuppliedParams, Verdict, UNMATCHED,
};
use restamp_core::spec_index::{load_spec, DocumentFormat, HttpMethod, SpecIndex};
use restamp_core::triage::{classify, Category};

pub const MINIPET: &str = include_str!("../../../../fixtures/minipet.json");

pub fn minipet() -> SpecIndex {
    load_spec(MINIPET, DocumentFormat::Json).unwrap()
}

/// Deterministic runner executing exactly `cases` generated inputs.
pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

// ---------------------------------------------------------------- logs

const TEMPLATES: [&str; 4] = ["/pets", "/pets/{id}", "/user/login", UNMATCHED];
const METHODS: [HttpMethod; 4] = [HttpMethod::Get, HttpMethod::Post, HttpMethod::Delete, HttpMethod::Put];

fn names_subset(pool: &'static [&'static str]) -> impl Strategy<Value = BTreeSet<String>> {
    proptest::sample::subsequence(pool, 0..=pool.len())
        .prop_map(|v| v.into_iter().map(str::to_string).collect())
}

pub fn arb_record() -> impl Strategy<Value = InteractionRecord> {
    (
        proptest::sample::select(&METHODS[..]),
        proptest::sample::select(&TEMPLATES[..]),
        proptest::sample::select(&[200u16, 400, 404, 405, 500][..]),
        proptest::option::of(proptest::sample::select(
            &["application/json", "application/xml", "text/plain"][..],
        )),
        proptest::option::of(proptest::sample::select(
            &["application/json", "application/xml", "multipart/form-data", "text/plain"][..],
        )),
        names_subset(&["status", "username", "password", "limit"]),
        names_subset(&["X-Trace"]),
        names_subset(&["name", "status"]),
    )
        .prop_map(|(method, template, status, response_ct, request_ct, query, header, form)| {
            let path = if template.contains("{id}") {
                BTreeSet::from(["id".to_string()])
            } else {
                BTreeSet::new()
            };
            InteractionRecord {
                seq: 0,
                method,
                template: template.to_string(),
                url: if template == UNMATCHED { "/nowhere".into() } else { template.replace("{id}", "1") },
                request_content_type: request_ct.map(str::to_string),
                params: SuppliedParams { path, query, header, form },
                status,
                response_content_type: response_ct.map(str::to_string),
                body_sha256: String::new(),
            }
        })
}

pub fn to_log(records: Vec<InteractionRecord>) -> InteractionLog {
    let mut log = InteractionLog::new("generated");
    for r in records {
        log.push(r);
    }
    log
}

pub fn arb_log(max: usize) -> impl Strategy<Value = InteractionLog> {
    proptest::collection::vec(arb_record(), 0..=max).prop_map(to_log)
}

// ---------------------------------------------------------------- oracle

fn deref<'a>(root: &'a Value, v: &'a Value) -> &'a Value {
    match v.get("$ref").and_then(Value::as_str) {
        Some(r) => {
            let pointer = r.trim_start_matches('#');
            deref(root, root.pointer(pointer).expect("local reference resolves"))
        }
        None => v,
    }
}

struct RawOp {
    path: String,
    method: String,
    /// status → response content types
    responses: BTreeMap<u16, BTreeSet<String>>,
    request_types: BTreeSet<String>,
    params: BTreeSet<(String, String)>,
}

fn raw_operations(doc: &Value) -> Vec<RawOp> {
    let mut ops = Vec::new();
    let content_keys = |v: Option<&Value>| -> BTreeSet<String> {
        v.and_then(|c| c.get("content"))
            .and_then(Value::as_object)
            .map(|m| m.keys().map(|k| k.to_ascii_lowercase()).collect())
            .unwrap_or_default()
    };
    for (path, item) in doc["paths"].as_object().unwrap() {
        let item = deref(doc, item);
        for method in ["get", "put", "post", "delete", "options", "head", "patch", "trace"] {
            let Some(op) = item.get(method) else { continue };
            let mut params = BTreeSet::new();
            for list in [item.get("parameters"), op.get("parameters")].into_iter().flatten() {
                for p in list.as_array().unwrap() {
                    let p = deref(doc, p);
                    params.insert((p["in"].as_str().unwrap().to_string(), p["name"].as_str().unwrap().to_string()));
                }
            }
            let responses = op["responses"]
                .as_object()
                .unwrap()
                .iter()
                .filter_map(|(code, r)| Some((code.parse().ok()?, content_keys(Some(deref(doc, r))))))
                .collect();
            let request_types = content_keys(op.get("requestBody").map(|b| deref(doc, b)));
            ops.push(RawOp {
                path: path.clone(),
                method: method.to_ascii_uppercase(),
                responses,
                request_types,
                params,
            });
        }
    }
    ops
}

/// `(covered, total)` per metric in [`Metric::ALL`] order, by checking every
/// documented element against every record.
pub fn oracle(doc: &Value, records: &[InteractionRecord]) -> Vec<(usize, usize)> {
    let ops = raw_operations(doc);
    let documented = |op: &RawOp, r: &InteractionRecord| -> bool {
        if r.template != op.path || r.method.as_str() != op.method {
            return false;
        }
        match op.responses.get(&r.status) {
            None => false,
            Some(types) => match &r.response_content_type {
                Some(ct) => types.contains(ct),
                None => types.is_empty(),
            },
        }
    };
    let hits = |op: &RawOp, pred: &dyn Fn(&InteractionRecord) -> bool| {
        records.iter().any(|r| documented(op, r) && pred(r))
    };

    let mut out = vec![(0, 0); 7];
    let paths: BTreeSet<&str> = ops.iter().map(|o| o.path.as_str()).collect();
    out[0].1 = paths.len();
    out[0].0 = paths
        .iter()
        .filter(|p| ops.iter().filter(|o| o.path == **p).any(|o| hits(o, &|_| true)))
        .count();
    for op in &ops {
        out[1].1 += 1;
        out[1].0 += hits(op, &|_| true) as usize;
        let classes: BTreeSet<u16> = op.responses.keys().map(|s| s / 100).collect();
        for c in classes {
            out[2].1 += 1;
            out[2].0 += hits(op, &|r| r.status / 100 == c) as usize;
        }
        for s in op.responses.keys() {
            out[3].1 += 1;
            out[3].0 += hits(op, &|r| r.status == *s) as usize;
        }
        let response_types: BTreeSet<&String> = op.responses.values().flatten().collect();
        for ct in response_types {
            out[4].1 += 1;
            out[4].0 += hits(op, &|r| r.response_content_type.as_ref() == Some(ct)) as usize;
        }
        for ct in &op.request_types {
            out[5].1 += 1;
            out[5].0 += hits(op, &|r| r.request_content_type.as_ref() == Some(ct)) as usize;
        }
        for (location, name) in &op.params {
            out[6].1 += 1;
            out[6].0 += hits(op, &|r| {
                let supplied = match location.as_str() {
                    "path" => return true,
                    "query" => &r.params.query,
                    "header" => &r.params.header,
                    _ => &r.params.form,
                };
                supplied.contains(name)
            }) as usize;
        }
    }
    out
}

fn pairs(report: &CoverageReport) -> Vec<(usize, usize)> {
    Metric::ALL
        .iter()
        .map(|m| {
            let r = report.metric(*m);
            (r.covered, r.total)
        })
        .collect()
}

pub fn check_oracle(index: &SpecIndex, doc: &Value, log: &InteractionLog) -> Result<(), TestCaseError> {
    let report = compute_coverage(index, [log]);
    let expected = oracle(doc, log.records());
    prop_assert_eq!(pairs(&report), expected);
    Ok(())
}

// ---------------------------------------------------------------- coverage properties

pub fn check_monotone(index: &SpecIndex, a: &InteractionLog, b: &InteractionLog) -> Result<(), TestCaseError> {
    let before = compute_coverage(index, [a]);
    let mut joined = a.clone();
    joined.extend_from(b);
    let after = compute_coverage(index, [&joined]);
    for m in Metric::ALL {
        let (x, y) = (before.metric(m), after.metric(m));
        prop_assert_eq!(x.total, y.total, "{} denominator changed", m);
        prop_assert!(x.covered <= y.covered, "{} dropped from {} to {}", m, x.covered, y.covered);
    }
    let two_logs = compute_coverage(index, [a, b]);
    prop_assert_eq!(pairs(&two_logs), pairs(&after));
    Ok(())
}

pub fn check_idempotent(index: &SpecIndex, a: &InteractionLog) -> Result<(), TestCaseError> {
    let once = compute_coverage(index, [a]);
    let mut doubled = a.clone();
    doubled.extend_from(a);
    let twice = compute_coverage(index, [&doubled]);
    prop_assert_eq!(pairs(&once), pairs(&twice));
    prop_assert_eq!(&once.undocumented, &twice.undocumented);
    prop_assert_eq!(&once.unmatched, &twice.unmatched);
    Ok(())
}

// ---------------------------------------------------------------- suites

fn arb_text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 _.:/\"\\\\é-]{0,12}"
}

fn arb_map(keys: &'static str) -> impl Strategy<Value = BTreeMap<String, String>> {
    proptest::collection::btree_map(keys, arb_text(), 0..3)
}

fn arb_assertion() -> impl Strategy<Value = Assertion> {
    prop_oneof![
        (100u16..600).prop_map(Assertion::status),
        (1u8..6).prop_map(|c| Assertion {
            kind: AssertionKind::StatusClassEquals,
            expected: format!("{c}xx"),
            selector: None,
        }),
        proptest::sample::select(&["application/json", "application/xml"][..]).prop_map(|ct| Assertion {
            kind: AssertionKind::ContentTypeEquals,
            expected: ct.to_string(),
            selector: None,
        }),
        "[A-Z][a-z]{1,6}: [a-z0-9]{0,5}".prop_map(|e| Assertion {
            kind: AssertionKind::HeaderContains,
            expected: e,
            selector: None,
        }),
        ("(name|id|tags\\.0\\.name|\\$)", arb_text()).prop_map(|(s, e)| Assertion::body_equals(s, e)),
        ("(name|status|0\\.id)", any::<bool>()).prop_map(|(s, b)| Assertion {
            kind: AssertionKind::BodyFieldExists,
            expected: b.to_string(),
            selector: Some(s),
        }),
    ]
}

fn arb_body() -> impl Strategy<Value = Option<RequestBody>> {
    prop_oneof![
        Just(None),
        arb_text().prop_map(|t| Some(RequestBody::text("application/json", t))),
        proptest::option::of("[a-z]{1,6}").prop_map(|field| Some(RequestBody {
            content_type: "multipart/form-data".into(),
            text: None,
            file: Some("cat.png".into()),
            field,
        })),
    ]
}

fn arb_step(first: bool) -> impl Strategy<Value = TestStep> {
    (
        proptest::sample::select(&METHODS[..]),
        proptest::sample::select(&["/pets", "/pets/{id}", "/user/login", "/a/{x}/b/{y}"][..]),
        arb_map("[a-z]{1,5}"),
        arb_map("[a-z]{1,5}"),
        arb_map("X-[A-Z][a-z]{1,4}"),
        arb_body(),
        proptest::collection::vec(arb_assertion(), 0..3),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(move |(method, path, query, form, headers, body, assertions, capture, use_var)| {
            let mut step = TestStep::new(method, path);
            for name in step.path_placeholders().into_iter().map(str::to_string).collect::<Vec<_>>() {
                let value = if !first && use_var { "{{petId}}".to_string() } else { "7".to_string() };
                step.path_params.insert(name, value);
            }
            step.query_params = query;
            step.form_params = form;
            step.headers = headers;
            step.body = body;
            step.assertions = assertions;
            if first || capture {
                step.captures.insert("petId".into(), "id".into());
            }
            step
        })
}

pub fn arb_suite() -> impl Strategy<Value = TestSuite> {
    let case = (
        "[A-Z][a-z]{1,6}",
        arb_text(),
        proptest::sample::select(&[Origin::Seed, Origin::SingleAgent, Origin::MultiAgent, Origin::Repair][..]),
        arb_step(true),
        proptest::collection::vec(arb_step(false), 0..3),
        proptest::collection::vec(arb_assertion(), 1..3),
    )
        .prop_map(|(word, description, origin, first, rest, last_assertions)| {
            let mut steps = vec![first];
            steps.extend(rest);
            steps.last_mut().unwrap().assertions.extend(last_assertions);
            TestCase {
                name: format!("test{word}"),
                description,
                origin,
                steps,
            }
        });
    (
        "[a-z]{1,8}",
        arb_map("[A-Z][a-z]{1,6}"),
        proptest::collection::vec(case, 0..5),
    )
        .prop_map(|(name, base_headers, mut cases)| {
            for (i, c) in cases.iter_mut().enumerate() {
                c.name = format!("{}Case{i}", c.name);
            }
            TestSuite { name, base_headers, cases }
        })
}

pub fn check_roundtrip(suite: &TestSuite) -> Result<(), TestCaseError> {
    let text = serialize_suite(suite);
    let parsed = parse_suite(&text).map_err(|e| TestCaseError::fail(format!("{e:?}\n{text}")))?;
    prop_assert_eq!(&parsed, suite);
    prop_assert_eq!(serialize_suite(&parsed), text);
    prop_assert_eq!(lint_suite(suite), lint_suite(&parsed));
    prop_assert_eq!(lint_suite(suite), lint_suite(suite));
    Ok(())
}

// ---------------------------------------------------------------- triage

pub struct TriageScenario {
    pub suite: TestSuite,
    pub report: ExecutionReport,
}

impl std::fmt::Debug for TriageScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&serialize_suite(&self.suite))?;
        write!(f, "{:?}", self.report.cases)
    }
}

fn arb_failure(step: usize) -> impl Strategy<Value = AssertionFailure> {
    (arb_assertion(), arb_text()).prop_map(move |(a, actual)| AssertionFailure {
        step,
        kind: a.kind,
        selector: a.selector,
        expected: a.expected,
        actual,
    })
}

pub fn arb_triage_scenario() -> impl Strategy<Value = TriageScenario> {
    let case = (
        arb_suite().prop_filter("one case", |s| !s.cases.is_empty()),
        proptest::sample::select(&[Verdict::Passed, Verdict::Failed, Verdict::Errored][..]),
        proptest::collection::vec(proptest::sample::select(&[200u16, 201, 400, 404, 500][..]), 4),
    )
        .prop_flat_map(|(suite, verdict, statuses)| {
            let case = suite.cases[0].clone();
            let last = case.steps.len() - 1;
            let failures = if verdict == Verdict::Failed {
                proptest::collection::vec(arb_failure(last), 1..3).boxed()
            } else {
                Just(Vec::new()).boxed()
            };
            (Just(case), Just(verdict), Just(statuses), failures)
        });
    proptest::collection::vec(case, 1..6).prop_map(|cases| {
        let mut suite = TestSuite {
            name: "scenario".into(),
            ..TestSuite::default()
        };
        let mut report = ExecutionReport::default();
        for (i, (mut case, verdict, statuses, failures)) in cases.into_iter().enumerate() {
            case.name = format!("testScenario{i}");
            let steps = case
                .steps
                .iter()
                .zip(statuses.iter().cycle())
                .map(|(s, status)| StepOutcome {
                    method: s.method,
                    url: s.path.replace("{id}", s.path_params.get("id").map_or("1", |v| v)),
                    status: (verdict != Verdict::Errored).then_some(*status),
                })
                .collect();
            report.push(CaseResult {
                name: case.name.clone(),
                verdict,
                failures,
                fault: (verdict == Verdict::Errored).then(|| "connection failed for GET /pets".into()),
                duration_ms: 0,
                steps,
            });
            suite.cases.push(case);
        }
        TriageScenario { suite, report }
    })
}

pub fn check_triage(index: &SpecIndex, s: &TriageScenario) -> Result<(), TestCaseError> {
    let triage = classify(&s.report, &s.suite, index);
    for result in &s.report.cases {
        let labels: Vec<_> = triage.labels.iter().filter(|l| l.case == result.name).collect();
        match result.verdict {
            Verdict::Passed => prop_assert!(labels.is_empty(), "passed case {} labelled", result.name),
            Verdict::Failed => prop_assert_eq!(labels.len(), 1),
            Verdict::Errored => {
                prop_assert_eq!(labels.len(), 1);
                prop_assert_eq!(labels[0].label, Category::RuntimeError);
            }
        }
    }
    let failed = s.report.cases.iter().filter(|c| c.verdict != Verdict::Passed).count();
    prop_assert_eq!(triage.labels.len(), failed);
    let by_category: usize = [
        Category::BugExposed,
        Category::MissingInformation,
        Category::SemanticallyIncorrect,
        Category::RuntimeError,
    ]
    .iter()
    .map(|c| triage.count(*c))
    .sum();
    prop_assert_eq!(by_category, failed);
    prop_assert_eq!(classify(&s.report, &s.suite, index), triage);
    Ok(())
}

// ---------------------------------------------------------------- demo corpus

pub fn asset_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/seed/assets")
}

fn accept() -> impl Strategy<Value = Option<&'static str>> {
    proptest::option::of(proptest::sample::select(
        &["application/json", "application/xml", "*/*", "text/html", "application/xml;q=0.9"][..],
    ))
}

fn pet_json() -> impl Strategy<Value = String> {
    prop_oneof![
        ("[a-z]{1,8}", proptest::sample::select(&["available", "pending", "sold"][..]))
            .prop_map(|(n, s)| format!(r#"{{"name": "{n}", "status": "{s}"}}"#)),
        "[a-z]{1,8}".prop_map(|n| format!(r#"{{"name": "{n}"}}"#)),
        Just(r#"{"status": "sold"}"#.to_string()),
        Just(r#"{"name": ""}"#.to_string()),
        Just(r#"{"name": "rex", "status": "asleep"}"#.to_string()),
        Just(r#"{"name": "rex", "id": "seven"}"#.to_string()),
        Just(r#"{"name": "rex""#.to_string()),
        Just("[1, 2]".to_string()),
        (4000usize..4200).prop_map(|n| format!(r#"{{"name": "{}"}}"#, "x".repeat(n))),
    ]
}

fn pet_xml() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,8}".prop_map(|n| format!("<Pet><name>{n}</name><status>pending</status></Pet>")),
        Just("<Pet><status>sold</status></Pet>".to_string()),
        Just("<Pet><name>rex".to_string()),
    ]
}

/// One request against a documented minipet operation.
pub fn arb_demo_step() -> impl Strategy<Value = TestStep> {
    let list = (
        proptest::option::of(proptest::sample::select(&["available", "pending", "sold", "lost", ""][..])),
        accept(),
    )
        .prop_map(|(status, accept)| {
            let mut s = TestStep::new(HttpMethod::Get, "/pets");
            if let Some(v) = status {
                s.query_params.insert("status".into(), v.into());
            }
            (s, accept)
        });
    let create = (
        prop_oneof![
            pet_json().prop_map(|t| Some(RequestBody::text("application/json", t))),
            pet_xml().prop_map(|t| Some(RequestBody::text("application/xml", t))),
            Just(Some(RequestBody {
                content_type: "multipart/form-data".into(),
                text: None,
                file: Some("cat.png".into()),
                field: Some("photo".into()),
            })),
            Just(Some(RequestBody::text("multipart/form-data", "not multipart"))),
            Just(None),
        ],
        proptest::option::of("[a-z]{1,6}"),
        accept(),
    )
        .prop_map(|(body, form_name, accept)| {
            let mut s = TestStep::new(HttpMethod::Post, "/pets");
            if body.as_ref().is_some_and(|b| b.file.is_some()) {
                if let Some(n) = form_name {
                    s.form_params.insert("name".into(), n);
                }
            }
            s.body = body;
            (s, accept)
        });
    let by_id = (
        proptest::sample::select(&[HttpMethod::Get, HttpMethod::Delete][..]),
        proptest::sample::select(&["1", "2", "3", "4", "99", "0", "-1", "abc"][..]),
        accept(),
    )
        .prop_map(|(method, id, accept)| {
            let mut s = TestStep::new(method, "/pets/{id}");
            s.path_params.insert("id".into(), id.into());
            (s, accept)
        });
    let login = (
        proptest::option::of(proptest::sample::select(&["user1", "ghost", ""][..])),
        proptest::option::of(proptest::sample::select(&["secret", "wrong", ""][..])),
        accept(),
    )
        .prop_map(|(user, password, accept)| {
            let mut s = TestStep::new(HttpMethod::Get, "/user/login");
            if let Some(u) = user {
                s.query_params.insert("username".into(), u.into());
            }
            if let Some(p) = password {
                s.query_params.insert("password".into(), p.into());
            }
            (s, accept)
        });
    prop_oneof![list, create, by_id, login].prop_map(|(mut step, accept)| {
        if let Some(a) = accept {
            step.headers.insert("Accept".into(), a.into());
        }
        step.assertions.push(Assertion::status(200));
        step
    })
}

/// `n` single-request cases drawn deterministically.
pub fn demo_corpus(n: usize) -> TestSuite {
    use proptest::strategy::ValueTree;
    let mut runner = runner(1);
    let strategy = arb_demo_step();
    let cases = (0..n)
        .map(|i| TestCase {
            name: format!("testRequest{i}"),
            description: String::new(),
            origin: Origin::Seed,
            steps: vec![strategy.new_tree(&mut runner).unwrap().current()],
        })
        .collect();
    TestSuite {
        name: "corpus".into(),
        base_headers: BTreeMap::new(),
        cases,
    }
}
