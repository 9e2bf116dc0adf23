use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use restamp_core::gateway::ReplayMode;
use restamp_core::workflow::Architecture;

#[derive(Debug, Parser)]
#[command(name = "restamp", version, about = "Amplify REST API test suites with LLM agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate additional tests for every documented path and evaluate them.
    Amplify(AmplifyArgs),
    /// Execute a suite and print a summary.
    Run(RunArgs),
    /// Structural coverage of one or more interaction logs.
    Coverage(CoverageArgs),
    /// Label failed cases of an execution report.
    Triage(TriageArgs),
    /// Consolidated result tables over amplification output directories.
    Report(ReportArgs),
    /// Serve the bundled demo API.
    Demo(DemoArgs),
    /// Readability checks for a suite.
    Lint(LintArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LlmMode {
    /// An OpenAI-compatible chat completions endpoint.
    Remote,
    /// Serve answers from a recorded transcript.
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchitectureArg {
    SingleAgent,
    MultiAgent,
}

impl From<ArchitectureArg> for Architecture {
    fn from(a: ArchitectureArg) -> Self {
        match a {
            ArchitectureArg::SingleAgent => Architecture::SingleAgent,
            ArchitectureArg::MultiAgent => Architecture::MultiAgent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReplayModeArg {
    Strict,
    Lenient,
}

impl From<ReplayModeArg> for ReplayMode {
    fn from(m: ReplayModeArg) -> Self {
        match m {
            ReplayModeArg::Strict => ReplayMode::Strict,
            ReplayModeArg::Lenient => ReplayMode::Lenient,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    /// Base URL of the API under test, or `demo` for an in-process demo API.
    #[arg(long)]
    pub target: String,
    /// Comma-separated demo faults to enable with `--target demo`.
    #[arg(long, value_delimiter = ',')]
    pub demo_faults: Vec<String>,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 10)]
    pub timeout: u64,
}

#[derive(Debug, Clone, Args)]
pub struct AmplifyArgs {
    /// OpenAPI 2.0 or 3.x document (JSON or YAML).
    #[arg(long)]
    pub spec: PathBuf,
    /// Seed suite; `assets/` next to it holds files the suite uploads.
    #[arg(long)]
    pub seed: PathBuf,
    #[arg(long, value_enum, default_value = "single-agent")]
    pub architecture: ArchitectureArg,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, value_enum, default_value = "remote")]
    pub llm: LlmMode,
    /// Transcript to replay with `--llm replay`.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "strict")]
    pub replay_mode: ReplayModeArg,
    /// Write every model exchange of a remote run to this transcript.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Chat completions base URL for `--llm remote`.
    #[arg(long)]
    pub api_base: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Dollars per million input tokens.
    #[arg(long, default_value = "0.15")]
    pub input_rate: String,
    /// Dollars per million output tokens.
    #[arg(long, default_value = "0.60")]
    pub output_rate: String,
    /// JSON file with `max_react_calls`, `max_repairs` and `max_steps`.
    #[arg(long)]
    pub limits: Option<PathBuf>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub suite: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Attribute requests to documented operations.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Write the execution report and interaction log here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CoverageArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Interaction logs (`.jsonl`); several logs are merged.
    pub logs: Vec<PathBuf>,
    /// Print JSON instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TriageArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub suite: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    /// JSON object mapping case names to categories.
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    /// Write labels as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Output directories of `restamp amplify`, one column each.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Treat the directories as repeated runs and average them into one column.
    #[arg(long)]
    pub aggregate: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// JSON file: `{"faults": ["login-200", ...]}`.
    #[arg(long)]
    pub faults: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LintArgs {
    pub suite: PathBuf,
}
