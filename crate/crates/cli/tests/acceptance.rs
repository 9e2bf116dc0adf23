//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;
#[path = "support/scripts.rs"]
mod scripts;

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rust_decimal::{Decimal, RoundingStrategy};

use restamp_core::coverage::{compute_coverage, Metric};
use restamp_core::dsl::{parse_suite, RequestBody, TestCase, TestStep, TestSuite, Assertion, Origin};
use restamp_core::gateway::estimate_energy;
use restamp_core::runner::{ExecutionReport, InteractionLog, RunOptions, SuiteRunner, Verdict};
use restamp_core::spec_index::HttpMethod;
use restamp_core::triage::{Category, Triage};
use restamp_demo::SeededFault;

use scripts::{seed_path, spec_path, transcript_path, SCENARIOS};
use support::*;

type Check = Result<(), String>;

fn ensure(condition: bool, message: impl FnOnce() -> String) -> Check {
    if condition {
        Ok(())
    } else {
        Err(message())
    }
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("restamp").chain(args.iter().copied()).map(Into::into);
    let code = restamp_cli::main_with(argv, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

/// Replay-amplify one bundled transcript into `out` against the faulty demo.
fn replay_amplify(name: &str, architecture: &str, out: &Path) -> Check {
    let (code, _, err) = cli(&[
        "amplify",
        "--spec",
        spec_path().to_str().unwrap(),
        "--seed",
        seed_path().to_str().unwrap(),
        "--architecture",
        architecture,
        "--target",
        "demo",
        "--demo-faults",
        "login-200",
        "--llm",
        "replay",
        "--transcript",
        transcript_path(name).to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    ensure(code == 0 && err.is_empty(), || format!("{name}: exit {code}: {err}"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Shared replay outputs: first and second run of every scenario.
struct ReplayRuns {
    _tmp: tempfile::TempDir,
    first: Vec<PathBuf>,
    second: Vec<PathBuf>,
}

fn replay_all() -> Result<ReplayRuns, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut first = Vec::new();
    let mut second = Vec::new();
    for s in SCENARIOS {
        let a = tmp.path().join(format!("{}-a", s.name));
        let b = tmp.path().join(format!("{}-b", s.name));
        replay_amplify(s.name, s.architecture.as_str(), &a)?;
        replay_amplify(s.name, s.architecture.as_str(), &b)?;
        first.push(a);
        second.push(b);
    }
    Ok(ReplayRuns { _tmp: tmp, first, second })
}

fn energy_2dp(tokens: i64) -> Decimal {
    estimate_energy(tokens)
        .unwrap()
        .round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero)
}

fn criterion_1() -> Check {
    let tolerance = Decimal::new(5, 3);
    for (tokens, expected) in [(71186, Decimal::new(427, 2)), (162355, Decimal::new(974, 2))] {
        let got = energy_2dp(tokens);
        ensure((got - expected).abs() <= tolerance, || format!("energy({tokens}) = {got}, want {expected}"))?;
    }
    let exact = estimate_energy(500).unwrap();
    ensure(exact == Decimal::new(3, 2), || format!("energy(500) = {exact}"))
}

fn criterion_2() -> Check {
    let index = minipet();
    let doc: serde_json::Value = serde_json::from_str(MINIPET).unwrap();
    let started = std::time::Instant::now();
    runner(256)
        .run(&arb_log(40), |log| check_oracle(&index, &doc, &log))
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure(elapsed.as_secs() <= 10, || format!("oracle comparison took {elapsed:?}"))
}

fn criterion_3() -> Check {
    let index = minipet();
    runner(500)
        .run(&(arb_log(20), arb_log(20)), |(a, b)| check_monotone(&index, &a, &b))
        .map_err(|e| format!("monotonicity: {e}"))?;
    runner(500)
        .run(&arb_log(30), |a| check_idempotent(&index, &a))
        .map_err(|e| format!("idempotence: {e}"))
}

fn repair_visits(dir: &Path) -> Vec<usize> {
    let traces: serde_json::Value = serde_json::from_str(&read(&dir.join("traces.json"))).unwrap();
    traces["endpoints"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            e["trace"]
                .as_array()
                .unwrap()
                .iter()
                .filter(|t| t["node"] == "repair" && t["event"] == "visit")
                .count()
        })
        .collect()
}

fn criterion_4(runs: &ReplayRuns) -> Check {
    for (i, s) in SCENARIOS.iter().enumerate() {
        let (a, b) = (tree(&runs.first[i]), tree(&runs.second[i]));
        ensure(!a.is_empty() && a == b, || format!("{}: output trees differ", s.name))?;
        parse_suite(&read(&runs.first[i].join("suite.json"))).map_err(|e| format!("{}: {e}", s.name))?;
        let total: usize = repair_visits(&runs.first[i]).iter().sum();
        let want = if s.name == "M2" { 1 } else { 0 };
        ensure(total == want, || format!("{}: {total} repair visits, want {want}", s.name))?;
    }
    Ok(())
}

fn criterion_5(runs: &ReplayRuns) -> Check {
    for (i, s) in SCENARIOS.iter().enumerate() {
        let dir = &runs.first[i];
        let suite = parse_suite(&read(&dir.join("suite.json"))).map_err(|e| e.to_string())?;
        let bad_login = suite
            .cases
            .iter()
            .find(|c| {
                c.steps.last().is_some_and(|step| {
                    step.path == "/user/login"
                        && step.query_params.get("password").is_some_and(|p| p != "secret")
                        && step.assertions.iter().any(|a| a.expected_status() == Some(400))
                })
            })
            .ok_or_else(|| format!("{}: no bad-password login case expecting 400", s.name))?;
        let report: ExecutionReport = serde_json::from_str(&read(&dir.join("execution_report.json"))).unwrap();
        let verdict = report.case(&bad_login.name).map(|c| c.verdict);
        ensure(verdict == Some(Verdict::Failed), || format!("{}: {} verdict {verdict:?} with login-200", s.name, bad_login.name))?;
        let triage: Triage = serde_json::from_str(&read(&dir.join("triage.json"))).unwrap();
        let label = triage.get(&bad_login.name).map(|l| l.label);
        ensure(label == Some(Category::BugExposed), || format!("{}: label {label:?}", s.name))?;

        let clean = tempfile::tempdir().unwrap();
        let (code, out, _) = cli(&[
            "run",
            "--suite",
            dir.join("suite.json").to_str().unwrap(),
            "--target",
            "demo",
            "--spec",
            spec_path().to_str().unwrap(),
            "--out",
            clean.path().to_str().unwrap(),
        ]);
        let clean_report: ExecutionReport =
            serde_json::from_str(&read(&clean.path().join("execution_report.json"))).unwrap();
        let verdict = clean_report.case(&bad_login.name).map(|c| c.verdict);
        ensure(verdict == Some(Verdict::Passed), || format!("{}: clean demo verdict {verdict:?}\n{out}", s.name))?;
        ensure(code == 0, || format!("{}: clean run exit {code}\n{out}", s.name))?;
    }
    Ok(())
}

fn criterion_6(runs: &ReplayRuns) -> Check {
    for (i, s) in SCENARIOS.iter().enumerate() {
        let coverage: serde_json::Value = serde_json::from_str(&read(&runs.first[i].join("coverage.json"))).unwrap();
        let path = (&coverage["path"]["covered"], &coverage["path"]["total"]);
        ensure(path.0 == 3 && path.1 == 3, || format!("{}: path coverage {}/{}", s.name, path.0, path.1))?;
        let initial: serde_json::Value =
            serde_json::from_str(&read(&runs.first[i].join("coverage_initial.json"))).unwrap();
        ensure(initial["path"]["covered"] == 1, || format!("{}: seed path coverage {}", s.name, initial["path"]))?;
    }
    Ok(())
}

fn criterion_7() -> Check {
    let index = minipet();
    runner(300)
        .run(&arb_triage_scenario(), |s| check_triage(&index, &s))
        .map_err(|e| e.to_string())
}

fn criterion_8() -> Check {
    runner(500).run(&arb_suite(), |s| check_roundtrip(&s)).map_err(|e| e.to_string())
}

fn oversized_cases(n: usize) -> Vec<TestCase> {
    (0..n)
        .map(|i| {
            let mut step = TestStep::new(HttpMethod::Post, "/pets");
            step.body = Some(RequestBody::text(
                "application/json",
                format!("{{\"name\": \"{}\"}}", "x".repeat(5000 + i)),
            ));
            step.assertions.push(Assertion::status(400));
            TestCase {
                name: format!("testOversizedPet{i}"),
                description: String::new(),
                origin: Origin::Seed,
                steps: vec![step],
            }
        })
        .collect()
}

fn run_against(faults: &[SeededFault], suite: &TestSuite) -> InteractionLog {
    let demo = restamp_demo::spawn(faults.iter().copied()).unwrap();
    let index = minipet();
    let options = RunOptions {
        asset_dir: Some(asset_dir()),
        ..RunOptions::default()
    };
    SuiteRunner::new(demo.base_url(), options).with_index(&index).run(suite).1
}

fn criterion_9() -> Check {
    let index = minipet();
    let corpus = demo_corpus(520);
    let log = run_against(&[], &corpus);
    ensure(log.len() == 520, || format!("{} records", log.len()))?;
    let clean = compute_coverage(&index, [&log]);
    ensure(clean.undocumented.is_empty(), || format!("undocumented with faults off: {:?}", clean.undocumented))?;

    let mut faulty_suite = corpus.clone();
    faulty_suite.cases.extend(oversized_cases(5));
    let log = run_against(&[SeededFault::Undocumented500], &faulty_suite);
    let faulty = compute_coverage(&index, [&log]);
    ensure(!faulty.undocumented.is_empty(), || "no undocumented entries with undocumented-500".into())?;
    let mut filtered = InteractionLog::new(log.target.clone());
    for r in log.records().iter().filter(|r| r.status != 500) {
        filtered.push(r.clone());
    }
    ensure(filtered.len() == log.len() - 5, || format!("{} of {} records kept", filtered.len(), log.len()))?;
    let without = compute_coverage(&index, [&filtered]);
    for metric in Metric::ALL {
        ensure(faulty.metric(metric) == without.metric(metric), || {
            format!("{}: {:?} vs {:?}", metric.label(), faulty.metric(metric), without.metric(metric))
        })?;
    }
    Ok(())
}

fn guarded(f: impl FnOnce() -> Check) -> Check {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(result) => result,
        Err(panic) => Err(panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

#[test]
fn acceptance() {
    let runs = replay_all();
    let with_runs = |f: fn(&ReplayRuns) -> Check| -> Check {
        match &runs {
            Ok(r) => guarded(|| f(r)),
            Err(e) => Err(format!("replay failed: {e}")),
        }
    };
    let results: Vec<(u8, &str, Check)> = vec![
        (1, "energy arithmetic", guarded(criterion_1)),
        (2, "coverage oracle equivalence", guarded(criterion_2)),
        (3, "coverage monotonicity and idempotence", guarded(criterion_3)),
        (4, "deterministic replay", with_runs(criterion_4)),
        (5, "bug detection end to end", with_runs(criterion_5)),
        (6, "path coverage through the endpoint loop", with_runs(criterion_6)),
        (7, "triage totality", guarded(criterion_7)),
        (8, "suite round trip and lint determinism", guarded(criterion_8)),
        (9, "demo target conformance", guarded(criterion_9)),
    ];
    let mut console = std::io::stderr();
    let mut failed = Vec::new();
    for (n, title, result) in &results {
        let _ = match result {
            Ok(()) => writeln!(console, "criterion {n}: PASS {title}"),
            Err(e) => {
                failed.push(*n);
                writeln!(console, "criterion {n}: FAIL {title}: {e}")
            }
        };
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
