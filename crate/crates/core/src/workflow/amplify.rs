use serde::{Deserialize, Serialize};

use super::engine::{run_workflow, WorkflowError};
use super::graphs::{build_multi_agent, build_single_agent};
use super::state::{AgentState, PlanItem, TraceEvent};
use super::tools::Toolbox;
use super::Limits;
use crate::dsl::{merge_suites, serialize_suite, Origin, TestSuite};
use crate::gateway::{Gateway, UsageStats};
use crate::prompts::PromptSet;
use crate::runner::{ExecutionReport, InteractionLog, SuiteRunner};
use crate::spec_index::SpecIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    SingleAgent,
    MultiAgent,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::SingleAgent => "single-agent",
            Architecture::MultiAgent => "multi-agent",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single-agent" | "single" => Ok(Architecture::SingleAgent),
            "multi-agent" | "multi" => Ok(Architecture::MultiAgent),
            other => Err(format!("unknown architecture `{other}` (single-agent or multi-agent)")),
        }
    }
}

/// What happened for one endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointRun {
    pub endpoint: String,
    pub incomplete: bool,
    pub error: Option<String>,
    pub cases_added: usize,
    pub excised: Vec<String>,
    pub plan: Vec<PlanItem>,
    pub react_calls: u32,
    pub tool_invocations: u32,
    pub repair_attempts: u32,
    pub usage: UsageStats,
    pub trace: Vec<TraceEvent>,
}

pub struct AmplificationResult {
    pub suite: TestSuite,
    pub endpoints: Vec<EndpointRun>,
    pub usage: UsageStats,
    pub initial_report: ExecutionReport,
    pub initial_log: InteractionLog,
    pub report: ExecutionReport,
    pub log: InteractionLog,
}

/// Amplify `seed` one documented path at a time, then run the merged suite.
pub fn amplify(
    index: &SpecIndex,
    seed: &TestSuite,
    runner: &SuiteRunner,
    gateway: &Gateway,
    prompts: &PromptSet,
    architecture: Architecture,
    limits: &Limits,
) -> Result<AmplificationResult, WorkflowError> {
    let (initial_report, initial_log) = runner.run(seed);
    let toolbox = Toolbox { index, runner };
    let graph = match architecture {
        Architecture::SingleAgent => build_single_agent(prompts, &toolbox)?,
        Architecture::MultiAgent => build_multi_agent(prompts, &toolbox)?,
    };
    let seed_text = serialize_suite(seed);
    let mut suite = seed.clone();
    let mut endpoints = Vec::new();
    let mut usage = UsageStats::default();

    for path in index.list_paths() {
        let state = run_workflow(&graph, AgentState::new(&path, &seed_text), gateway, limits);
        let mut added = 0;
        if let Some(mut generated) = state.final_suite.clone() {
            let origin = match architecture {
                _ if state.repair_attempts > 0 => Origin::Repair,
                Architecture::SingleAgent => Origin::SingleAgent,
                Architecture::MultiAgent => Origin::MultiAgent,
            };
            let mut kept: Vec<crate::dsl::TestCase> = Vec::new();
            for mut case in std::mem::take(&mut generated.cases) {
                let duplicate = suite.cases.iter().chain(&kept).any(|c| c.steps == case.steps);
                if !duplicate {
                    case.origin = origin;
                    kept.push(case);
                }
            }
            generated.cases = kept;
            added = generated.cases.len();
            suite = merge_suites(&suite, &generated);
        }
        usage += state.usage;
        endpoints.push(EndpointRun {
            endpoint: path,
            incomplete: state.incomplete,
            error: state.error,
            cases_added: added,
            excised: state.excised,
            plan: state.plan,
            react_calls: state.react_calls,
            tool_invocations: state.tool_invocations,
            repair_attempts: state.repair_attempts,
            usage: state.usage,
            trace: state.trace,
        });
    }

    let (report, log) = runner.run(&suite);
    Ok(AmplificationResult {
        suite,
        endpoints,
        usage,
        initial_report,
        initial_log,
        report,
        log,
    })
}
