use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatBackend, ChatMessage, ChatRequest, Completion, GatewayError, Role, ToolCall};

/// Environment variable holding the API key.
pub const API_KEY_VAR: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone)]
pub struct OpenAiConfig {
    /// Base URL up to and including the version segment.
    pub endpoint: String,
    pub model: String,
    pub api_key: String,
    pub timeout: Duration,
}

impl OpenAiConfig {
    pub fn from_env(endpoint: Option<String>, model: Option<String>) -> Result<Self, GatewayError> {
        let api_key = std::env::var(API_KEY_VAR)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| GatewayError::Config(format!("{API_KEY_VAR} is not set")))?;
        Ok(OpenAiConfig {
            endpoint: endpoint.unwrap_or_else(|| "https://api.openai.com/v1".into()),
            model: model.unwrap_or_else(|| "gpt-4o-mini".into()),
            api_key,
            timeout: Duration::from_secs(120),
        })
    }
}

/// Client for an OpenAI-compatible chat-completions endpoint.
pub struct OpenAiBackend {
    config: OpenAiConfig,
    agent: ureq::Agent,
}

impl OpenAiBackend {
    pub fn new(config: OpenAiConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        OpenAiBackend { config, agent }
    }

    pub fn request_body(&self, request: &ChatRequest) -> Value {
        let messages: Vec<Value> = request.messages.iter().map(wire_message).collect();
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
        });
        if !request.tools.is_empty() {
            body["tools"] = request
                .tools
                .iter()
                .map(|t| {
                    json!({"type": "function", "function": {
                        "name": t.name,
                        "description": t.description,
                        "parameters": t.parameter_schema(),
                    }})
                })
                .collect();
        }
        body
    }
}

fn wire_message(m: &ChatMessage) -> Value {
    let role = match m.role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
        Role::Tool => "tool",
    };
    let mut out = json!({"role": role, "content": m.content});
    if !m.tool_calls.is_empty() {
        if m.content.is_empty() {
            out["content"] = Value::Null;
        }
        out["tool_calls"] = m
            .tool_calls
            .iter()
            .map(|c| json!({"id": c.id, "type": "function", "function": {"name": c.name, "arguments": c.arguments}}))
            .collect();
    }
    if let Some(id) = &m.tool_call_id {
        out["tool_call_id"] = json!(id);
    }
    out
}

/// Decode a chat-completions response body.
pub fn parse_response(body: &Value) -> Result<Completion, GatewayError> {
    let malformed = |what: &str| GatewayError::Malformed(what.to_string());
    let message = body
        .pointer("/choices/0/message")
        .ok_or_else(|| malformed("missing choices[0].message"))?;
    let content = message
        .get("content")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();
    let mut tool_calls = Vec::new();
    if let Some(calls) = message.get("tool_calls").and_then(Value::as_array) {
        for call in calls {
            let text = |ptr: &str| {
                call.pointer(ptr)
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| malformed(&format!("tool call without {ptr}")))
            };
            tool_calls.push(ToolCall {
                id: text("/id")?,
                name: text("/function/name")?,
                arguments: text("/function/arguments")?,
            });
        }
    }
    let count = |ptr: &str| body.pointer(ptr).and_then(Value::as_u64).unwrap_or(0);
    Ok(Completion {
        message: ChatMessage {
            role: Role::Assistant,
            content,
            tool_calls,
            tool_call_id: None,
        },
        input_tokens: count("/usage/prompt_tokens"),
        output_tokens: count("/usage/completion_tokens"),
        latency_ms: None,
    })
}

impl ChatBackend for OpenAiBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        let url = format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'));
        let result = self
            .agent
            .post(&url)
            .set("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(self.request_body(request));
        let response = match result {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                let detail = r.into_string().unwrap_or_default();
                return Err(GatewayError::Transport(format!("HTTP {code}: {detail}")));
            }
            Err(ureq::Error::Transport(t)) => return Err(GatewayError::Transport(t.to_string())),
        };
        let body: Value = response
            .into_json()
            .map_err(|e| GatewayError::Malformed(e.to_string()))?;
        parse_response(&body)
    }
}
