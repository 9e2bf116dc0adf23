use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::spec_index::{HttpMethod, ParamLocation};

/// Names of the parameters a request supplied, by location.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuppliedParams {
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub path: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub query: BTreeSet<String>,
    /// Lower-cased header names.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub header: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub form: BTreeSet<String>,
}

impl SuppliedParams {
    pub fn contains(&self, location: ParamLocation, name: &str) -> bool {
        match location {
            ParamLocation::Path => self.path.contains(name),
            ParamLocation::Query => self.query.contains(name),
            ParamLocation::Header => self.header.contains(&name.to_ascii_lowercase()),
            ParamLocation::Form => self.form.contains(name),
        }
    }
}

/// One observed request/response pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub seq: u64,
    pub method: HttpMethod,
    /// Matched path template, or `unmatched`.
    pub template: String,
    /// Path and query relative to the target base URL.
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_content_type: Option<String>,
    #[serde(default)]
    pub params: SuppliedParams,
    pub status: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_content_type: Option<String>,
    pub body_sha256: String,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    target: String,
}

/// Append-only, ordered list of interactions against one target.
///
/// On disk: line-delimited JSON, a `{"target": ...}` header line followed by
/// one record per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionLog {
    pub target: String,
    records: Vec<InteractionRecord>,
}

impl InteractionLog {
    pub fn new(target: impl Into<String>) -> Self {
        InteractionLog {
            target: target.into(),
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[InteractionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Append a record; its sequence number is reassigned to keep them increasing.
    pub fn push(&mut self, mut record: InteractionRecord) {
        record.seq = self.records.last().map_or(0, |r| r.seq + 1);
        self.records.push(record);
    }

    pub fn extend_from(&mut self, other: &InteractionLog) {
        for r in &other.records {
            self.push(r.clone());
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&LogHeader {
            target: self.target.clone(),
        })
        .expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        Self::read(text.as_bytes())
    }

    pub fn read(reader: impl BufRead) -> Result<Self, LogError> {
        let mut log = InteractionLog::default();
        let mut last_seq: Option<u64> = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| LogError::Malformed {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if value.get("seq").is_none() {
                let header: LogHeader =
                    serde_json::from_value(value).map_err(|e| LogError::Malformed {
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                log.target = header.target;
                continue;
            }
            let record: InteractionRecord =
                serde_json::from_value(value).map_err(|e| LogError::Malformed {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if !(100..=599).contains(&record.status) {
                return Err(LogError::Malformed {
                    line: i + 1,
                    message: format!("status {} outside 100..599", record.status),
                });
            }
            if last_seq.is_some_and(|s| record.seq <= s) {
                return Err(LogError::Malformed {
                    line: i + 1,
                    message: "sequence numbers must strictly increase".into(),
                });
            }
            last_seq = Some(record.seq);
            log.records.push(record);
        }
        Ok(log)
    }

    pub fn write_to(&self, mut writer: impl Write) -> std::io::Result<()> {
        writer.write_all(self.to_jsonl().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, LogError> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }
}
