use std::collections::BTreeMap;

use super::engine::{GraphBuilder, NodeEnv, NodeKind, WorkflowError, WorkflowGraph};
use super::state::{AgentState, PlanItem, SuggestionKind, TraceEvent};
use super::tools::{executor_spec, extract_suite_text, retriever_spec, salvage, Toolbox};
use crate::gateway::{ChatMessage, Role, ToolSpec};
use crate::prompts::{PromptSet, DSL_REFERENCE};

const TEMPERATURE: f64 = 0.0;

/// Send `history` to the model and append the reply.
fn call_model(
    state: &mut AgentState,
    env: &NodeEnv,
    agent: &str,
    tools: Vec<ToolSpec>,
) -> Result<ChatMessage, WorkflowError> {
    let history = state.histories.entry(agent.to_string()).or_default().clone();
    let (reply, delta) = env.gateway.complete(history, tools, TEMPERATURE)?;
    state.usage += delta;
    state
        .histories
        .get_mut(agent)
        .expect("history exists")
        .push(reply.clone());
    Ok(reply)
}

/// Start a fresh conversation for `agent` from `template`.
fn open_conversation(
    state: &mut AgentState,
    prompts: &PromptSet,
    agent: &str,
    template: &str,
    values: BTreeMap<&str, String>,
) -> Result<(), WorkflowError> {
    let (system, user) = prompts
        .get(template)
        .and_then(|t| t.render(&values))
        .map_err(|e| WorkflowError::Node(e.to_string()))?;
    state.histories.insert(
        agent.to_string(),
        vec![ChatMessage::system(system), ChatMessage::user(user)],
    );
    Ok(())
}

fn last_reply<'s>(state: &'s AgentState, agent: &str) -> Option<&'s ChatMessage> {
    state
        .histories
        .get(agent)?
        .iter()
        .rev()
        .find(|m| m.role == Role::Assistant)
}

fn wants_tools(state: &AgentState, agent: &str) -> bool {
    last_reply(state, agent).is_some_and(|m| !m.tool_calls.is_empty())
}

/// Answer every pending tool call of `agent`.
fn run_tools(state: &mut AgentState, toolbox: &Toolbox, agent: &str) {
    let calls = last_reply(state, agent)
        .map(|m| m.tool_calls.clone())
        .unwrap_or_default();
    for call in calls {
        let output = toolbox.call(&call);
        state.tool_invocations += 1;
        state
            .histories
            .get_mut(agent)
            .expect("history exists")
            .push(ChatMessage::tool_result(&call.id, output));
    }
}

/// Lines of the form `- [tag] description`. Lines without a known tag keep
/// their text with no source.
pub fn parse_plan(text: &str) -> Vec<PlanItem> {
    text.lines()
        .filter_map(|line| line.trim().strip_prefix("- "))
        .map(str::trim)
        .filter(|rest| !rest.is_empty())
        .map(|rest| {
            let tagged = rest.strip_prefix('[').and_then(|r| r.split_once(']'));
            let source = tagged.and_then(|(tag, _)| {
                SuggestionKind::ALL
                    .into_iter()
                    .find(|k| k.as_str() == tag.trim().to_ascii_lowercase())
            });
            let description = match (source, tagged) {
                (Some(_), Some((_, desc))) => desc.trim().to_string(),
                _ => rest.to_string(),
            };
            PlanItem { source, description }
        })
        .collect()
}

fn render_plan(plan: &[PlanItem]) -> String {
    plan.iter()
        .map(|p| match p.source {
            Some(k) => format!("- [{}] {}", k.as_str(), p.description),
            None => format!("- {}", p.description),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

const SINGLE: &str = "single_agent";

/// One reason-act agent with the retriever and the executor as tools.
pub fn build_single_agent<'a>(
    prompts: &'a PromptSet,
    toolbox: &'a Toolbox<'a>,
) -> Result<WorkflowGraph<'a>, WorkflowError> {
    GraphBuilder::new("agent")
        .node("agent", NodeKind::Agent, move |state, env| {
            if !state.histories.contains_key(SINGLE) {
                let values = BTreeMap::from([
                    ("endpoint", state.endpoint.clone()),
                    ("seed_suite", state.seed_suite.clone()),
                    ("dsl_reference", DSL_REFERENCE.to_string()),
                ]);
                open_conversation(state, prompts, SINGLE, SINGLE, values)?;
            }
            call_model(state, env, SINGLE, vec![retriever_spec(), executor_spec()])?;
            state.react_calls += 1;
            Ok(())
        })
        .conditional("agent", &["tools", "finish"], |state, limits| {
            if wants_tools(state, SINGLE) && state.react_calls < limits.max_react_calls {
                "tools".into()
            } else {
                "finish".into()
            }
        })
        .node("tools", NodeKind::Tool, move |state, _| {
            run_tools(state, toolbox, SINGLE);
            Ok(())
        })
        .edge("tools", "agent")
        .node("finish", NodeKind::Tool, |state, _| {
            if wants_tools(state, SINGLE) {
                state.incomplete = true;
                state.trace.push(TraceEvent::note("finish", "model call limit reached"));
            }
            let text = last_reply(state, SINGLE).and_then(|m| extract_suite_text(&m.content));
            match text {
                Some(text) => {
                    let (suite, excised) = salvage(&text, &[]);
                    state.final_suite = suite;
                    state.excised = excised;
                }
                None => {
                    state.incomplete = true;
                    state.trace.push(TraceEvent::note("finish", "no suite in the final answer"));
                }
            }
            Ok(())
        })
        .terminal("finish")
        .build()
}

const OPENAPI: &str = "openapi_agent";

fn suggestion_node<'a>(
    prompts: &'a PromptSet,
    kind: SuggestionKind,
) -> impl Fn(&mut AgentState, &NodeEnv) -> Result<(), WorkflowError> + 'a {
    move |state, env| {
        let agent = format!("{}_agent", kind.as_str());
        let values = BTreeMap::from([
            ("endpoint", state.endpoint.clone()),
            ("spec_context", state.spec_context.clone().unwrap_or_default()),
            ("seed_suite", state.seed_suite.clone()),
        ]);
        open_conversation(state, prompts, &agent, &agent, values)?;
        let reply = call_model(state, env, &agent, Vec::new())?;
        state.suggestions.insert(kind, reply.content);
        Ok(())
    }
}

/// Specialist agents feeding a planner, a writer and an execute-repair loop.
pub fn build_multi_agent<'a>(
    prompts: &'a PromptSet,
    toolbox: &'a Toolbox<'a>,
) -> Result<WorkflowGraph<'a>, WorkflowError> {
    GraphBuilder::new(OPENAPI)
        .node(OPENAPI, NodeKind::Agent, move |state, env| {
            if !state.histories.contains_key(OPENAPI) {
                let values = BTreeMap::from([("endpoint", state.endpoint.clone())]);
                open_conversation(state, prompts, OPENAPI, OPENAPI, values)?;
            }
            call_model(state, env, OPENAPI, vec![retriever_spec()])?;
            state.react_calls += 1;
            Ok(())
        })
        .conditional(OPENAPI, &["retriever", "context"], |state, limits| {
            if wants_tools(state, OPENAPI) && state.react_calls < limits.max_react_calls {
                "retriever".into()
            } else {
                "context".into()
            }
        })
        .node("retriever", NodeKind::Tool, move |state, _| {
            run_tools(state, toolbox, OPENAPI);
            Ok(())
        })
        .edge("retriever", OPENAPI)
        .node("context", NodeKind::Merge, move |state, _| {
            let summary = last_reply(state, OPENAPI)
                .filter(|m| m.tool_calls.is_empty() && !m.content.trim().is_empty())
                .map(|m| m.content.clone());
            let summary = match summary {
                Some(s) => s,
                None => {
                    state.incomplete = true;
                    state
                        .trace
                        .push(TraceEvent::note("context", "no summary; using the raw endpoint description"));
                    toolbox.index.describe_endpoint(&state.endpoint).text().to_string()
                }
            };
            state.spec_context = Some(summary);
            Ok(())
        })
        .fan_out(
            "context",
            &["header_agent", "parameter_agent", "value_agent"],
            "merge",
        )
        .node("header_agent", NodeKind::Agent, suggestion_node(prompts, SuggestionKind::Header))
        .node("parameter_agent", NodeKind::Agent, suggestion_node(prompts, SuggestionKind::Parameter))
        .node("value_agent", NodeKind::Agent, suggestion_node(prompts, SuggestionKind::Value))
        .node("merge", NodeKind::Merge, |state, _| {
            let merged = SuggestionKind::ALL
                .iter()
                .map(|k| {
                    let text = state.suggestions.get(k).map(String::as_str).unwrap_or("");
                    format!("#### [{}] suggestions\n{}", k.as_str(), text.trim())
                })
                .collect::<Vec<_>>()
                .join("\n\n");
            state.merged_suggestions = Some(merged);
            Ok(())
        })
        .edge("merge", "planner")
        .node("planner", NodeKind::Agent, move |state, env| {
            let values = BTreeMap::from([
                ("endpoint", state.endpoint.clone()),
                ("spec_context", state.spec_context.clone().unwrap_or_default()),
                ("suggestions", state.merged_suggestions.clone().unwrap_or_default()),
            ]);
            open_conversation(state, prompts, "planner", "planner", values)?;
            let reply = call_model(state, env, "planner", Vec::new())?;
            state.plan = parse_plan(&reply.content);
            if state.plan.is_empty() {
                return Err(WorkflowError::Node("planner produced no plan items".into()));
            }
            Ok(())
        })
        .edge("planner", "writer")
        .node("writer", NodeKind::Agent, move |state, env| {
            let values = BTreeMap::from([
                ("endpoint", state.endpoint.clone()),
                ("spec_context", state.spec_context.clone().unwrap_or_default()),
                ("plan", render_plan(&state.plan)),
                ("seed_suite", state.seed_suite.clone()),
                ("dsl_reference", DSL_REFERENCE.to_string()),
            ]);
            open_conversation(state, prompts, "writer", "writer", values)?;
            let reply = call_model(state, env, "writer", Vec::new())?;
            state.draft = Some(extract_suite_text(&reply.content).unwrap_or(reply.content));
            Ok(())
        })
        .edge("writer", "executor")
        .node("executor", NodeKind::Tool, move |state, _| {
            let outcome = toolbox.execute(state.draft.as_deref().unwrap_or(""));
            state.tool_invocations += 1;
            if outcome.fault {
                let detail = if outcome.errored.is_empty() {
                    "fault: suite does not parse".to_string()
                } else {
                    format!("fault: errored cases {}", outcome.errored.join(", "))
                };
                state.trace.push(TraceEvent::note("executor", &detail));
            }
            state.executor_fault = outcome.fault;
            state.errored_cases = outcome.errored;
            state.feedback = Some(outcome.feedback);
            state.final_suite = if outcome.fault { None } else { outcome.suite };
            Ok(())
        })
        .conditional("executor", &["repair", "finalize"], |state, limits| {
            if state.executor_fault && state.repair_attempts < limits.max_repairs {
                "repair".into()
            } else {
                "finalize".into()
            }
        })
        .node("repair", NodeKind::Agent, move |state, env| {
            let values = BTreeMap::from([
                ("draft", state.draft.clone().unwrap_or_default()),
                ("feedback", state.feedback.clone().unwrap_or_default()),
                ("dsl_reference", DSL_REFERENCE.to_string()),
            ]);
            open_conversation(state, prompts, "repair", "repair", values)?;
            let reply = call_model(state, env, "repair", Vec::new())?;
            state.draft = Some(extract_suite_text(&reply.content).unwrap_or(reply.content));
            state.repair_attempts += 1;
            Ok(())
        })
        .edge("repair", "executor")
        .node("finalize", NodeKind::Merge, |state, _| {
            if state.executor_fault {
                state
                    .trace
                    .push(TraceEvent::note("finalize", "repair limit reached; faulty cases excised"));
                let (suite, excised) = salvage(state.draft.as_deref().unwrap_or(""), &state.errored_cases);
                state.final_suite = suite;
                state.excised = excised;
            }
            Ok(())
        })
        .terminal("finalize")
        .build()
}
