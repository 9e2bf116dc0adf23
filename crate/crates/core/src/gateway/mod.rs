//! Chat-with-tools access to a language model, with usage accounting.

mod openai;
mod replay;
mod usage;

use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use openai::{parse_response, OpenAiBackend, OpenAiConfig, API_KEY_VAR};
pub use replay::{
    parse_transcript, render_transcript, RecordingBackend, ReplayBackend, ReplayMode,
    ScriptedBackend, TranscriptEntry, TranscriptUsage,
};
pub use usage::{estimate_cost, estimate_energy, energy_per_token, NegativeTokens, Rates, UsageStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    /// JSON-encoded arguments, as the model produced them.
    pub arguments: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    fn plain(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn tool_calls(calls: Vec<ToolCall>) -> Self {
        ChatMessage {
            tool_calls: calls,
            ..Self::plain(Role::Assistant, "")
        }
    }

    pub fn tool_result(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        ChatMessage {
            tool_call_id: Some(call_id.into()),
            ..Self::plain(Role::Tool, content)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolParam {
    pub name: String,
    /// JSON-schema type name.
    pub kind: String,
    pub description: String,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ToolParam>,
}

impl ToolSpec {
    /// JSON schema for the arguments object.
    pub fn parameter_schema(&self) -> serde_json::Value {
        let properties: serde_json::Map<String, serde_json::Value> = self
            .parameters
            .iter()
            .map(|p| {
                (
                    p.name.clone(),
                    serde_json::json!({"type": p.kind, "description": p.description}),
                )
            })
            .collect();
        let required: Vec<&str> = self
            .parameters
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.as_str())
            .collect();
        serde_json::json!({"type": "object", "properties": properties, "required": required})
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub tools: Vec<ToolSpec>,
    pub temperature: f64,
}

impl ChatRequest {
    /// Stable key used to find recorded responses.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(canonical))
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::Precondition("messages must not be empty".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(GatewayError::Precondition(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        if let Some(m) = self
            .messages
            .iter()
            .find(|m| (m.role == Role::Tool) != m.tool_call_id.is_some())
        {
            return Err(GatewayError::Precondition(format!(
                "tool_call_id is required exactly on tool messages (role {:?})",
                m.role
            )));
        }
        let mut names = std::collections::BTreeSet::new();
        if let Some(dup) = self.tools.iter().find(|t| !names.insert(&t.name)) {
            return Err(GatewayError::Precondition(format!("duplicate tool `{}`", dup.name)));
        }
        Ok(())
    }
}

/// One model answer with the usage the backend reports for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub message: ChatMessage,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Model latency, when the backend knows it better than the caller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("replay miss: no recorded response for request digest {digest}")]
    ReplayMiss { digest: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transcript i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError>;
}

/// Entry point for agents: validates requests and accumulates usage.
pub struct Gateway {
    backend: Box<dyn ChatBackend>,
    rates: Rates,
    usage: Mutex<UsageStats>,
}

impl Gateway {
    pub fn new(backend: Box<dyn ChatBackend>, rates: Rates) -> Self {
        Gateway {
            backend,
            rates,
            usage: Mutex::new(UsageStats::default()),
        }
    }

    pub fn complete(
        &self,
        messages: Vec<ChatMessage>,
        tools: Vec<ToolSpec>,
        temperature: f64,
    ) -> Result<(ChatMessage, UsageStats), GatewayError> {
        let request = ChatRequest {
            messages,
            tools,
            temperature,
        };
        request.validate()?;
        let started = Instant::now();
        let completion = self.backend.complete(&request)?;
        let latency = completion
            .latency_ms
            .unwrap_or_else(|| started.elapsed().as_millis() as u64);
        let delta = UsageStats::for_call(
            completion.input_tokens,
            completion.output_tokens,
            latency,
            &self.rates,
        );
        *self.usage.lock().unwrap_or_else(|e| e.into_inner()) += delta;
        Ok((completion.message, delta))
    }

    pub fn usage(&self) -> UsageStats {
        *self.usage.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn rates(&self) -> Rates {
        self.rates
    }
}
