use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::state::{AgentState, TraceEvent};
use super::Limits;
use crate::gateway::{Gateway, GatewayError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Agent,
    Tool,
    Merge,
}

#[derive(Debug, thiserror::Error)]
pub enum WorkflowError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("node `{node}` routed to undeclared target `{target}`")]
    BadRoute { node: String, target: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{0}")]
    Node(String),
}

/// What a node sees besides the state.
pub struct NodeEnv<'g> {
    pub gateway: &'g Gateway,
    pub limits: &'g Limits,
}

type NodeFn<'a> = Box<dyn Fn(&mut AgentState, &NodeEnv) -> Result<(), WorkflowError> + 'a>;
type RouteFn<'a> = Box<dyn Fn(&AgentState, &Limits) -> String + 'a>;

struct Node<'a> {
    kind: NodeKind,
    run: NodeFn<'a>,
}

enum Edge<'a> {
    Static(String),
    Conditional { targets: Vec<String>, route: RouteFn<'a> },
    /// Run `branches` in declared order, then continue at `join`.
    FanOut { branches: Vec<String>, join: String },
}

impl Edge<'_> {
    fn successors(&self) -> Vec<&str> {
        match self {
            Edge::Static(t) => vec![t],
            Edge::Conditional { targets, .. } => targets.iter().map(String::as_str).collect(),
            Edge::FanOut { branches, join } => branches
                .iter()
                .map(String::as_str)
                .chain([join.as_str()])
                .collect(),
        }
    }
}

pub struct GraphBuilder<'a> {
    entry: String,
    order: Vec<String>,
    nodes: BTreeMap<String, Node<'a>>,
    edges: BTreeMap<String, Edge<'a>>,
    terminals: BTreeSet<String>,
    errors: Vec<String>,
}

impl<'a> GraphBuilder<'a> {
    pub fn new(entry: &str) -> Self {
        GraphBuilder {
            entry: entry.to_string(),
            order: Vec::new(),
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            terminals: BTreeSet::new(),
            errors: Vec::new(),
        }
    }

    pub fn node(
        mut self,
        name: &str,
        kind: NodeKind,
        run: impl Fn(&mut AgentState, &NodeEnv) -> Result<(), WorkflowError> + 'a,
    ) -> Self {
        if self.nodes.contains_key(name) {
            self.errors.push(format!("duplicate node `{name}`"));
        }
        self.order.push(name.to_string());
        self.nodes.insert(
            name.to_string(),
            Node {
                kind,
                run: Box::new(run),
            },
        );
        self
    }

    fn add_edge(mut self, from: &str, edge: Edge<'a>) -> Self {
        if self.edges.insert(from.to_string(), edge).is_some() {
            self.errors.push(format!("node `{from}` has more than one outgoing edge"));
        }
        self
    }

    pub fn edge(self, from: &str, to: &str) -> Self {
        self.add_edge(from, Edge::Static(to.to_string()))
    }

    pub fn conditional(
        self,
        from: &str,
        targets: &[&str],
        route: impl Fn(&AgentState, &Limits) -> String + 'a,
    ) -> Self {
        self.add_edge(
            from,
            Edge::Conditional {
                targets: targets.iter().map(|t| t.to_string()).collect(),
                route: Box::new(route),
            },
        )
    }

    pub fn fan_out(self, from: &str, branches: &[&str], join: &str) -> Self {
        self.add_edge(
            from,
            Edge::FanOut {
                branches: branches.iter().map(|t| t.to_string()).collect(),
                join: join.to_string(),
            },
        )
    }

    pub fn terminal(mut self, name: &str) -> Self {
        self.terminals.insert(name.to_string());
        self
    }

    pub fn build(self) -> Result<WorkflowGraph<'a>, WorkflowError> {
        let invalid = |m: String| Err(WorkflowError::InvalidGraph(m));
        if let Some(e) = self.errors.first() {
            return invalid(e.clone());
        }
        if !self.nodes.contains_key(&self.entry) {
            return invalid(format!("entry `{}` is not a node", self.entry));
        }
        let mut branch_nodes = BTreeSet::new();
        for (from, edge) in &self.edges {
            if !self.nodes.contains_key(from) {
                return invalid(format!("edge from unknown node `{from}`"));
            }
            if self.terminals.contains(from) {
                return invalid(format!("terminal node `{from}` has an outgoing edge"));
            }
            for to in edge.successors() {
                if !self.nodes.contains_key(to) {
                    return invalid(format!("edge `{from}` → unknown node `{to}`"));
                }
            }
            if let Edge::Conditional { targets, .. } = edge {
                if targets.is_empty() {
                    return invalid(format!("conditional edge from `{from}` has no targets"));
                }
            }
            if let Edge::FanOut { branches, .. } = edge {
                branch_nodes.extend(branches.iter().cloned());
            }
        }
        for t in &self.terminals {
            if !self.nodes.contains_key(t) {
                return invalid(format!("terminal `{t}` is not a node"));
            }
        }
        for name in &self.order {
            let has_edge = self.edges.contains_key(name);
            let is_branch = branch_nodes.contains(name);
            if is_branch && has_edge {
                return invalid(format!("fan-out branch `{name}` must not have its own edge"));
            }
            if !has_edge && !is_branch && !self.terminals.contains(name) {
                return invalid(format!("node `{name}` has no outgoing edge and is not terminal"));
            }
        }

        let mut seen = BTreeSet::from([self.entry.clone()]);
        let mut queue = VecDeque::from([self.entry.clone()]);
        while let Some(n) = queue.pop_front() {
            if let Some(edge) = self.edges.get(&n) {
                for s in edge.successors() {
                    if seen.insert(s.to_string()) {
                        queue.push_back(s.to_string());
                    }
                }
            }
        }
        if let Some(lost) = self.order.iter().find(|n| !seen.contains(*n)) {
            return invalid(format!("node `{lost}` is unreachable from `{}`", self.entry));
        }
        if !self.terminals.iter().any(|t| seen.contains(t)) {
            return invalid("no terminal node is reachable".into());
        }

        Ok(WorkflowGraph {
            entry: self.entry,
            order: self.order,
            nodes: self.nodes,
            edges: self.edges,
            terminals: self.terminals,
        })
    }
}

/// A validated workflow.
pub struct WorkflowGraph<'a> {
    entry: String,
    order: Vec<String>,
    nodes: BTreeMap<String, Node<'a>>,
    edges: BTreeMap<String, Edge<'a>>,
    terminals: BTreeSet<String>,
}

impl WorkflowGraph<'_> {
    /// Node names in declaration order.
    pub fn node_names(&self) -> &[String] {
        &self.order
    }

    pub fn kind(&self, node: &str) -> Option<NodeKind> {
        self.nodes.get(node).map(|n| n.kind)
    }

    pub fn entry(&self) -> &str {
        &self.entry
    }

    pub fn is_terminal(&self, node: &str) -> bool {
        self.terminals.contains(node)
    }

    /// Nodes reachable in one transition from `node`.
    pub fn successors(&self, node: &str) -> Vec<&str> {
        self.edges.get(node).map(|e| e.successors()).unwrap_or_default()
    }

    /// Run one node; `false` when the run must stop.
    fn visit(&self, name: &str, state: &mut AgentState, env: &NodeEnv, steps: &mut usize) -> bool {
        if *steps >= env.limits.max_steps {
            state.incomplete = true;
            state.trace.push(TraceEvent::note(name, "step limit reached"));
            return false;
        }
        *steps += 1;
        let node = &self.nodes[name];
        let calls_before = state.usage.calls;
        let at = state.trace.len();
        state.trace.push(TraceEvent::visit(name, node.kind));
        let result = (node.run)(state, env);
        state.trace[at].calls = state.usage.calls - calls_before;
        match result {
            Ok(()) => true,
            Err(e) => {
                fail(state, name, e);
                false
            }
        }
    }
}

fn fail(state: &mut AgentState, node: &str, error: WorkflowError) {
    let message = error.to_string();
    state.trace.push(TraceEvent::error(node, &message));
    state.error = Some(message);
    state.incomplete = true;
}

/// Execute `graph` from its entry until a terminal node, an error or a limit.
/// Errors end the run and are recorded on the state and in its trace.
pub fn run_workflow(graph: &WorkflowGraph, mut state: AgentState, gateway: &Gateway, limits: &Limits) -> AgentState {
    let env = NodeEnv { gateway, limits };
    let mut steps = 0usize;
    let mut current = graph.entry.clone();
    loop {
        if !graph.visit(&current, &mut state, &env, &mut steps) || graph.is_terminal(&current) {
            break;
        }
        current = match &graph.edges[&current] {
            Edge::Static(to) => to.clone(),
            Edge::Conditional { targets, route } => {
                let target = route(&state, limits);
                if !targets.contains(&target) {
                    let node = current.clone();
                    fail(&mut state, &current, WorkflowError::BadRoute { node, target });
                    break;
                }
                target
            }
            Edge::FanOut { branches, join } => {
                if !branches.iter().all(|b| graph.visit(b, &mut state, &env, &mut steps)) {
                    break;
                }
                join.clone()
            }
        };
    }
    state
}
