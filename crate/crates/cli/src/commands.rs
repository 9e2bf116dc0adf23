use std::io::Write;
use std::path::Path;

use restamp_core::coverage::compute_coverage;
use restamp_core::dsl::{lint_suite, parse_suite, TestSuite};
use restamp_core::runner::{ExecutionReport, InteractionLog, SuiteRunner, Verdict};
use restamp_core::spec_index::{load_spec_file, SpecIndex};
use restamp_core::triage::{apply_overrides, classify, parse_overrides, Category};
use restamp_demo::DemoConfig;

use crate::args::{CoverageArgs, DemoArgs, LintArgs, RunArgs, TriageArgs};
use crate::target::{run_options, Target};
use crate::{config, pretty_json, read_input, write_output, CliError, EXIT_FAILURES, EXIT_OK};

fn load_index(path: &Path) -> Result<SpecIndex, CliError> {
    load_spec_file(path).map_err(|e| config(format!("{}: {e}", path.display())))
}

fn load_suite(path: &Path) -> Result<TestSuite, CliError> {
    let text = read_input(path, "suite")?;
    parse_suite(&text).map_err(|e| config(format!("suite {}:\n{e}", path.display())))
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let suite = load_suite(&args.suite)?;
    let index = args.spec.as_deref().map(load_index).transpose()?;
    let target = Target::resolve(&args.target)?;
    let asset_dir = args.suite.parent().map(|d| d.join("assets"));
    let mut runner = SuiteRunner::new(target.url.clone(), run_options(&args.target, asset_dir, false));
    if let Some(index) = &index {
        runner = runner.with_index(index);
    }
    let (report, mut log) = runner.run(&suite);
    log.target = target.label.clone();

    for case in &report.cases {
        let tag = match case.verdict {
            Verdict::Passed => "PASS",
            Verdict::Failed => "FAIL",
            Verdict::Errored => "ERROR",
        };
        writeln!(out, "{tag:<5} {}", case.name).ok();
        for f in &case.failures {
            writeln!(out, "      {}", f.describe()).ok();
        }
        if let Some(fault) = &case.fault {
            writeln!(out, "      {fault}").ok();
        }
    }
    let t = report.totals;
    writeln!(out, "{} passed, {} failed, {} errored", t.passed, t.failed, t.errored).ok();

    if let Some(dir) = &args.out {
        write_output(&dir.join("execution_report.json"), &pretty_json(&report))?;
        write_output(&dir.join("interactions.jsonl"), &log.to_jsonl())?;
    }
    Ok(if t.failed + t.errored > 0 { EXIT_FAILURES } else { EXIT_OK })
}

pub fn cmd_coverage(args: &CoverageArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    if args.logs.is_empty() {
        return Err(config("no interaction logs given"));
    }
    let index = load_index(&args.spec)?;
    let logs = args
        .logs
        .iter()
        .map(|p| InteractionLog::load(p).map_err(|e| config(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let report = compute_coverage(&index, &logs);
    if args.json {
        write!(out, "{}", report.to_json()).ok();
    } else {
        write!(out, "{}", report.render_table()).ok();
    }
    Ok(EXIT_OK)
}

pub fn cmd_triage(args: &TriageArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let report: ExecutionReport = serde_json::from_str(&read_input(&args.report, "execution report")?)
        .map_err(|e| config(format!("execution report {}: {e}", args.report.display())))?;
    let suite = load_suite(&args.suite)?;
    let index = load_index(&args.spec)?;
    let mut triage = classify(&report, &suite, &index);
    if let Some(path) = &args.overrides {
        let overrides = parse_overrides(&read_input(path, "overrides")?).map_err(|e| config(e.to_string()))?;
        triage = apply_overrides(&triage, &overrides).map_err(|e| config(e.to_string()))?;
    }
    for label in &triage.labels {
        let mark = if label.overridden { " (override)" } else { "" };
        writeln!(out, "{:<22} {}{mark}: {}", label.label.as_str(), label.case, label.rationale).ok();
    }
    let failed = report.totals.failed + report.totals.errored;
    writeln!(out, "failed: {failed}").ok();
    for category in Category::ALL {
        writeln!(out, "  {}: {}", category.title(), triage.count(category)).ok();
    }
    if let Some(path) = &args.out {
        write_output(path, &triage.to_json())?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_demo(args: &DemoArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = match &args.faults {
        Some(path) => DemoConfig::load(path).map_err(|e| config(e.to_string()))?,
        None => DemoConfig::default(),
    };
    let faults: Vec<String> = cfg.faults.iter().map(|f| f.id().to_string()).collect();
    let handle = restamp_demo::serve(cfg, &format!("127.0.0.1:{}", args.port))
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    writeln!(out, "demo API listening on {}", handle.base_url()).ok();
    if !faults.is_empty() {
        writeln!(out, "seeded faults: {}", faults.join(", ")).ok();
    }
    out.flush().ok();
    handle.wait();
    Ok(EXIT_OK)
}

pub fn cmd_lint(args: &LintArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let text = read_input(&args.suite, "suite")?;
    let suite = match parse_suite(&text) {
        Ok(suite) => suite,
        Err(e) => {
            writeln!(out, "{e}").ok();
            return Ok(EXIT_FAILURES);
        }
    };
    let findings = lint_suite(&suite);
    for f in &findings {
        match f.step {
            Some(step) => writeln!(out, "{} step {step}: {}: {}", f.case, f.criterion, f.message),
            None => writeln!(out, "{}: {}: {}", f.case, f.criterion, f.message),
        }
        .ok();
    }
    if findings.is_empty() {
        writeln!(out, "no findings").ok();
        Ok(EXIT_OK)
    } else {
        writeln!(out, "{} finding(s)", findings.len()).ok();
        Ok(EXIT_FAILURES)
    }
}
