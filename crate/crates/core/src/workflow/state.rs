use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::engine::NodeKind;
use crate::dsl::TestSuite;
use crate::gateway::{ChatMessage, UsageStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuggestionKind {
    Header,
    Parameter,
    Value,
}

impl SuggestionKind {
    /// Fixed merge order.
    pub const ALL: [SuggestionKind; 3] = [
        SuggestionKind::Header,
        SuggestionKind::Parameter,
        SuggestionKind::Value,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuggestionKind::Header => "header",
            SuggestionKind::Parameter => "parameter",
            SuggestionKind::Value => "value",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanItem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SuggestionKind>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub node: String,
    /// `visit`, `note` or `error`.
    pub event: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<NodeKind>,
    /// Model calls made during the visit.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub calls: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

fn is_zero(n: &u64) -> bool {
    *n == 0
}

impl TraceEvent {
    pub fn visit(node: &str, kind: NodeKind) -> Self {
        TraceEvent {
            node: node.to_string(),
            event: "visit".into(),
            kind: Some(kind),
            calls: 0,
            detail: None,
        }
    }

    pub fn note(node: &str, detail: &str) -> Self {
        TraceEvent {
            node: node.to_string(),
            event: "note".into(),
            kind: None,
            calls: 0,
            detail: Some(detail.to_string()),
        }
    }

    pub fn error(node: &str, detail: &str) -> Self {
        TraceEvent {
            event: "error".into(),
            ..Self::note(node, detail)
        }
    }
}

/// Everything one workflow run knows. Artifacts are replaced wholesale or
/// appended to, never edited in place.
#[derive(Debug, Clone, Default)]
pub struct AgentState {
    pub endpoint: String,
    /// Seed suite text shown to agents.
    pub seed_suite: String,
    pub histories: BTreeMap<String, Vec<ChatMessage>>,
    pub spec_context: Option<String>,
    pub suggestions: BTreeMap<SuggestionKind, String>,
    pub merged_suggestions: Option<String>,
    pub plan: Vec<PlanItem>,
    pub draft: Option<String>,
    pub feedback: Option<String>,
    /// The last executor visit found parse errors or errored cases.
    pub executor_fault: bool,
    /// Cases that errored on the last executor visit.
    pub errored_cases: Vec<String>,
    pub repair_attempts: u32,
    pub react_calls: u32,
    pub tool_invocations: u32,
    pub final_suite: Option<TestSuite>,
    /// Cases dropped because they never parsed or kept erroring.
    pub excised: Vec<String>,
    pub incomplete: bool,
    pub error: Option<String>,
    pub usage: UsageStats,
    pub trace: Vec<TraceEvent>,
}

impl AgentState {
    pub fn new(endpoint: &str, seed_suite: &str) -> Self {
        AgentState {
            endpoint: endpoint.to_string(),
            seed_suite: seed_suite.to_string(),
            ..AgentState::default()
        }
    }

    /// Node names in visit order.
    pub fn visits(&self) -> Vec<&str> {
        self.trace
            .iter()
            .filter(|e| e.event == "visit")
            .map(|e| e.node.as_str())
            .collect()
    }
}
