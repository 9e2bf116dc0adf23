//! Agent workflows as explicit graphs over a shared [`AgentState`].

mod amplify;
mod engine;
mod graphs;
mod state;
mod tools;

use serde::{Deserialize, Serialize};

pub use amplify::{amplify, AmplificationResult, Architecture, EndpointRun};
pub use engine::{run_workflow, GraphBuilder, NodeEnv, NodeKind, WorkflowError, WorkflowGraph};
pub use graphs::{build_multi_agent, build_single_agent, parse_plan};
pub use state::{AgentState, PlanItem, SuggestionKind, TraceEvent};
pub use tools::{executor_spec, extract_suite_text, retriever_spec, salvage, Execution, Toolbox, EXECUTOR, RETRIEVER};

/// Run budgets. Reaching any of them ends the run with an incomplete result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    /// Model calls in a reason-act loop.
    pub max_react_calls: u32,
    pub max_repairs: u32,
    /// Node visits per run.
    pub max_steps: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_react_calls: 15,
            max_repairs: 3,
            max_steps: 64,
        }
    }
}

impl Limits {
    pub fn zero() -> Self {
        Limits {
            max_react_calls: 0,
            max_repairs: 0,
            max_steps: 0,
        }
    }
}
