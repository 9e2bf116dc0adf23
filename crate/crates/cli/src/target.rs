use std::time::Duration;

use restamp_core::runner::RunOptions;
use restamp_demo::{DemoHandle, SeededFault};

use crate::args::TargetArgs;
use crate::{config, CliError};

/// The API under test. Holds the demo server alive when one was started.
pub(crate) struct Target {
    pub url: String,
    /// Name recorded in logs; stable across runs.
    pub label: String,
    _demo: Option<DemoHandle>,
}

impl Target {
    pub fn resolve(args: &TargetArgs) -> Result<Target, CliError> {
        if args.target == "demo" {
            let faults = args
                .demo_faults
                .iter()
                .map(|f| f.parse::<SeededFault>().map_err(|e| config(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let label = if faults.is_empty() {
                "demo".to_string()
            } else {
                format!("demo[{}]", args.demo_faults.join(","))
            };
            let demo = restamp_demo::spawn(faults).map_err(|e| anyhow::anyhow!("{e}"))?;
            return Ok(Target {
                url: demo.base_url(),
                label,
                _demo: Some(demo),
            });
        }
        if !args.demo_faults.is_empty() {
            return Err(config("--demo-faults applies only to --target demo"));
        }
        if !(args.target.starts_with("http://") || args.target.starts_with("https://")) {
            return Err(config(format!(
                "target `{}` is neither an http(s) URL nor `demo`",
                args.target
            )));
        }
        Ok(Target {
            url: args.target.trim_end_matches('/').to_string(),
            label: args.target.trim_end_matches('/').to_string(),
            _demo: None,
        })
    }
}

pub(crate) fn run_options(args: &TargetArgs, asset_dir: Option<std::path::PathBuf>, zero_durations: bool) -> RunOptions {
    RunOptions {
        timeout: Duration::from_secs(args.timeout.max(1)),
        asset_dir,
        zero_durations,
    }
}
