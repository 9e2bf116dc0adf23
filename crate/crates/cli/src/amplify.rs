use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rust_decimal::Decimal;
use serde_json::json;

use restamp_core::coverage::compute_coverage;
use restamp_core::dsl::{parse_suite, serialize_suite, Origin};
use restamp_core::gateway::{
    ChatBackend, Gateway, GatewayError, OpenAiBackend, OpenAiConfig, Rates, RecordingBackend, ReplayBackend,
};
use restamp_core::prompts::PromptSet;
use restamp_core::runner::SuiteRunner;
use restamp_core::spec_index::load_spec_file;
use restamp_core::triage::classify;
use restamp_core::workflow::{amplify, Limits};

use crate::args::{AmplifyArgs, LlmMode};
use crate::target::{run_options, Target};
use crate::{config, pretty_json, read_input, write_output, CliError, EXIT_OK};

fn parse_rate(text: &str, flag: &str) -> Result<Decimal, CliError> {
    let rate: Decimal = text
        .parse()
        .map_err(|_| config(format!("{flag} `{text}` is not a decimal number")))?;
    if rate.is_sign_negative() {
        return Err(config(format!("{flag} must not be negative")));
    }
    Ok(rate)
}

fn backend(args: &AmplifyArgs) -> Result<Box<dyn ChatBackend>, CliError> {
    match args.llm {
        LlmMode::Replay => {
            let path = args
                .transcript
                .as_deref()
                .ok_or_else(|| config("--llm replay needs --transcript"))?;
            if args.record.is_some() {
                return Err(config("--record applies only to --llm remote"));
            }
            let replay = ReplayBackend::load(path, args.replay_mode.into())
                .map_err(|e| config(format!("transcript {}: {e}", path.display())))?;
            Ok(Box::new(replay))
        }
        LlmMode::Remote => {
            let cfg = OpenAiConfig::from_env(args.api_base.clone(), args.model.clone()).map_err(|e| match e {
                GatewayError::Config(m) => config(m),
                other => config(other.to_string()),
            })?;
            let remote: Box<dyn ChatBackend> = Box::new(OpenAiBackend::new(cfg));
            Ok(match &args.record {
                Some(path) => Box::new(RecordingBackend::new(remote, path.clone())),
                None => remote,
            })
        }
    }
}

fn load_limits(path: Option<&Path>) -> Result<Limits, CliError> {
    match path {
        None => Ok(Limits::default()),
        Some(p) => serde_json::from_str(&read_input(p, "limits file")?)
            .map_err(|e| config(format!("limits file {}: {e}", p.display()))),
    }
}

fn copy_assets(from: &Path, to: &Path) -> anyhow::Result<()> {
    if !from.is_dir() {
        return Ok(());
    }
    std::fs::create_dir_all(to)?;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(from)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for entry in entries {
        let dest = to.join(entry.file_name().expect("directory entry has a name"));
        if entry.is_dir() {
            copy_assets(&entry, &dest)?;
        } else {
            std::fs::copy(&entry, &dest).with_context(|| format!("copying {}", entry.display()))?;
        }
    }
    Ok(())
}

pub fn cmd_amplify(args: &AmplifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let index = load_spec_file(&args.spec).map_err(|e| config(format!("{}: {e}", args.spec.display())))?;
    let seed_text = read_input(&args.seed, "seed suite")?;
    let seed = parse_suite(&seed_text).map_err(|e| config(format!("seed suite {}:\n{e}", args.seed.display())))?;
    let limits = load_limits(args.limits.as_deref())?;
    let prompts = PromptSet::load(args.prompts.as_deref()).map_err(|e| config(e.to_string()))?;
    let rates = Rates {
        input_per_million: parse_rate(&args.input_rate, "--input-rate")?,
        output_per_million: parse_rate(&args.output_rate, "--output-rate")?,
    };
    let gateway = Gateway::new(backend(args)?, rates);

    let seed_dir = args.seed.parent().map(Path::to_path_buf).unwrap_or_default();
    let asset_dir = seed_dir.join("assets");
    let target = Target::resolve(&args.target)?;
    let replay = args.llm == LlmMode::Replay;
    let options = run_options(&args.target, Some(asset_dir.clone()), replay);
    let runner = SuiteRunner::new(target.url.clone(), options).with_index(&index);

    let mut result = amplify(
        &index,
        &seed,
        &runner,
        &gateway,
        &prompts,
        args.architecture.into(),
        &limits,
    )
    .map_err(|e| config(e.to_string()))?;
    result.initial_log.target = target.label.clone();
    result.log.target = target.label.clone();

    let initial_coverage = compute_coverage(&index, [&result.initial_log]);
    let coverage = compute_coverage(&index, [&result.log]);
    let triage = classify(&result.report, &result.suite, &index);

    let mut warnings = Vec::new();
    for run in &result.endpoints {
        if let Some(e) = &run.error {
            warnings.push(format!("{}: {e}", run.endpoint));
        } else if run.incomplete {
            warnings.push(format!("{}: incomplete", run.endpoint));
        }
    }
    for w in &warnings {
        writeln!(err, "warning: {w}").ok();
    }

    let dir = &args.out;
    write_output(&dir.join("suite.json"), &serialize_suite(&result.suite))?;
    copy_assets(&asset_dir, &dir.join("assets"))?;
    write_output(&dir.join("execution_report.json"), &pretty_json(&result.report))?;
    write_output(&dir.join("interactions.jsonl"), &result.log.to_jsonl())?;
    write_output(&dir.join("coverage_initial.json"), &initial_coverage.to_json())?;
    write_output(&dir.join("coverage.json"), &coverage.to_json())?;
    write_output(&dir.join("triage.json"), &triage.to_json())?;
    let usage = &result.usage;
    let rates = gateway.rates();
    write_output(
        &dir.join("usage.json"),
        &pretty_json(&json!({
            "calls": usage.calls,
            "input_tokens": usage.input_tokens,
            "output_tokens": usage.output_tokens,
            "total_tokens": usage.total_tokens(),
            "wall_time_s": usage.wall_time.to_string(),
            "cost": usage.cost.to_string(),
            "energy_wh": usage.energy.to_string(),
            "input_rate_per_million": rates.input_per_million.to_string(),
            "output_rate_per_million": rates.output_per_million.to_string(),
        })),
    )?;
    write_output(
        &dir.join("traces.json"),
        &pretty_json(&json!({
            "architecture": args.architecture_name(),
            "endpoints": result.endpoints,
        })),
    )?;
    let generated = result.suite.cases.iter().filter(|c| c.origin != Origin::Seed).count();
    write_output(
        &dir.join("run.json"),
        &pretty_json(&json!({
            "architecture": args.architecture_name(),
            "spec_fingerprint": index.fingerprint(),
            "target": target.label,
            "seed_cases": seed.cases.len(),
            "generated_cases": generated,
            "warnings": warnings,
        })),
    )?;

    let t = result.report.totals;
    writeln!(
        out,
        "{} cases ({} generated): {} passed, {} failed, {} errored",
        result.suite.cases.len(),
        generated,
        t.passed,
        t.failed,
        t.errored
    )
    .ok();
    writeln!(
        out,
        "path coverage {}/{}, operation coverage {}/{}",
        coverage.path.covered, coverage.path.total, coverage.operation.covered, coverage.operation.total
    )
    .ok();
    writeln!(out, "output written to {}", dir.display()).ok();
    Ok(EXIT_OK)
}

impl AmplifyArgs {
    fn architecture_name(&self) -> &'static str {
        restamp_core::workflow::Architecture::from(self.architecture).as_str()
    }
}
