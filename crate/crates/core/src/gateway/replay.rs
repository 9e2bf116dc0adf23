//! Deterministic backends: transcript replay, transcript recording and
//! scripted answers.
//!
//! A transcript is line-delimited JSON, one [`TranscriptEntry`] per model call
//! in call order.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatMessage, ChatRequest, Completion, GatewayError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub digest: String,
    pub response: ChatMessage,
    pub usage: TranscriptUsage,
}

pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptEntry>, GatewayError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| GatewayError::Malformed(format!("transcript line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn render_transcript(entries: &[TranscriptEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("entry serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    /// Every request must match a recorded digest.
    Strict,
    /// Digest matches are preferred; otherwise the next unused entry is served.
    Lenient,
}

struct ReplayState {
    entries: Vec<TranscriptEntry>,
    used: Vec<bool>,
    cursor: usize,
}

pub struct ReplayBackend {
    mode: ReplayMode,
    state: Mutex<ReplayState>,
}

impl ReplayBackend {
    pub fn new(entries: Vec<TranscriptEntry>, mode: ReplayMode) -> Self {
        let used = vec![false; entries.len()];
        ReplayBackend {
            mode,
            state: Mutex::new(ReplayState {
                entries,
                used,
                cursor: 0,
            }),
        }
    }

    pub fn load(path: &Path, mode: ReplayMode) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(parse_transcript(&text)?, mode))
    }

    /// Entries not served yet.
    pub fn remaining(&self) -> usize {
        let state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        state.used.iter().filter(|u| !**u).count()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        let digest = request.digest();
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let by_digest = (0..state.entries.len())
            .find(|&i| !state.used[i] && state.entries[i].digest == digest);
        let index = match (by_digest, self.mode) {
            (Some(i), _) => i,
            (None, ReplayMode::Strict) => return Err(GatewayError::ReplayMiss { digest }),
            (None, ReplayMode::Lenient) => {
                let start = state.cursor;
                (start..state.entries.len())
                    .find(|&i| !state.used[i])
                    .ok_or(GatewayError::ReplayMiss { digest })?
            }
        };
        state.used[index] = true;
        state.cursor = state.cursor.max(index + 1);
        let entry = &state.entries[index];
        Ok(Completion {
            message: entry.response.clone(),
            input_tokens: entry.usage.input_tokens,
            output_tokens: entry.usage.output_tokens,
            latency_ms: Some(entry.usage.latency_ms),
        })
    }
}

/// Passes calls through to `inner` and writes every exchange to a transcript.
pub struct RecordingBackend {
    inner: Box<dyn ChatBackend>,
    path: PathBuf,
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl RecordingBackend {
    pub fn new(inner: Box<dyn ChatBackend>, path: impl Into<PathBuf>) -> Self {
        RecordingBackend {
            inner,
            path: path.into(),
            entries: Mutex::new(Vec::new()),
        }
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl ChatBackend for RecordingBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        let started = Instant::now();
        let mut completion = self.inner.complete(request)?;
        let latency_ms = completion
            .latency_ms
            .unwrap_or_else(|| started.elapsed().as_millis() as u64);
        completion.latency_ms = Some(latency_ms);
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        let seq = entries.len() as u64;
        entries.push(TranscriptEntry {
            seq,
            digest: request.digest(),
            response: completion.message.clone(),
            usage: TranscriptUsage {
                input_tokens: completion.input_tokens,
                output_tokens: completion.output_tokens,
                latency_ms,
            },
        });
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&self.path, render_transcript(&entries))?;
        Ok(completion)
    }
}

type Responder = dyn Fn(&ChatRequest) -> Result<ChatMessage, GatewayError> + Send + Sync;

/// Answers from a fixed script. Token counts are estimated at four
/// characters per token and latency is derived from the output size, so
/// scripted runs are fully deterministic.
pub struct ScriptedBackend {
    responder: Box<Responder>,
}

impl ScriptedBackend {
    pub fn from_fn(
        f: impl Fn(&ChatRequest) -> Result<ChatMessage, GatewayError> + Send + Sync + 'static,
    ) -> Self {
        ScriptedBackend {
            responder: Box::new(f),
        }
    }

    /// Serve `responses` in order, whatever the requests.
    pub fn sequence(responses: Vec<ChatMessage>) -> Self {
        let queue = Mutex::new(VecDeque::from(responses));
        Self::from_fn(move |request| {
            queue
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .pop_front()
                .ok_or(GatewayError::ReplayMiss {
                    digest: request.digest(),
                })
        })
    }
}

pub(crate) fn estimate_tokens(messages: &[&ChatMessage]) -> u64 {
    let chars: usize = messages
        .iter()
        .map(|m| {
            m.content.chars().count()
                + m.tool_calls
                    .iter()
                    .map(|c| c.name.len() + c.arguments.chars().count())
                    .sum::<usize>()
        })
        .sum();
    (chars as u64).div_ceil(4)
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        let message = (self.responder)(request)?;
        let tool_chars: usize = request
            .tools
            .iter()
            .map(|t| serde_json::to_string(t).map_or(0, |s| s.len()))
            .sum();
        let input_tokens =
            estimate_tokens(&request.messages.iter().collect::<Vec<_>>()) + (tool_chars as u64).div_ceil(4);
        let output_tokens = estimate_tokens(&[&message]);
        Ok(Completion {
            message,
            input_tokens,
            output_tokens,
            latency_ms: Some(300 + 15 * output_tokens),
        })
    }
}
