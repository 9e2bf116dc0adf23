//! Structural API coverage from interaction logs.
//!
//! All element metrics count per-operation pairs: code 200 on two operations
//! is two targets. A record counts only when it matched a documented
//! operation and its response (status plus content type) is documented for
//! that operation; every other observation is listed as undocumented and has
//! no effect on any ratio.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::runner::{InteractionLog, InteractionRecord, UNMATCHED};
use crate::spec_index::{HttpMethod, OperationEntry, ParamLocation, SpecIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Path,
    Operation,
    StatusClass,
    Status,
    ResponseType,
    RequestType,
    Parameter,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Path,
        Metric::Operation,
        Metric::StatusClass,
        Metric::Status,
        Metric::ResponseType,
        Metric::RequestType,
        Metric::Parameter,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Path => "Path",
            Metric::Operation => "Operation",
            Metric::StatusClass => "Status Class",
            Metric::Status => "Status",
            Metric::ResponseType => "Response Type",
            Metric::RequestType => "Request Type",
            Metric::Parameter => "Parameter",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub covered: usize,
    pub total: usize,
    pub ratio: f64,
    /// The denominator is zero; the ratio is reported as 1.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub vacuous: bool,
}

impl Ratio {
    pub fn new(covered: usize, total: usize) -> Ratio {
        if total == 0 {
            Ratio {
                covered,
                total,
                ratio: 1.0,
                vacuous: true,
            }
        } else {
            Ratio {
                covered,
                total,
                ratio: covered as f64 / total as f64,
                vacuous: false,
            }
        }
    }

    /// Integer percentage, halves rounded up.
    pub fn percent(&self) -> u32 {
        if self.total == 0 {
            return 100;
        }
        ((200 * self.covered + self.total) / (2 * self.total)) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    Status,
    ResponseType,
    RequestType,
}

/// Something the target did or was sent that the document does not list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Undocumented {
    /// `METHOD /template`.
    pub operation: String,
    pub kind: ObservationKind,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub fingerprint: String,
    pub records: usize,
    pub path: Ratio,
    pub operation: Ratio,
    pub status_class: Ratio,
    pub status: Ratio,
    pub response_type: Ratio,
    pub request_type: Ratio,
    pub parameter: Ratio,
    pub undocumented: Vec<Undocumented>,
    /// Requests no documented operation claims, as `METHOD url`.
    pub unmatched: Vec<String>,
}

impl CoverageReport {
    pub fn metric(&self, metric: Metric) -> Ratio {
        match metric {
            Metric::Path => self.path,
            Metric::Operation => self.operation,
            Metric::StatusClass => self.status_class,
            Metric::Status => self.status,
            Metric::ResponseType => self.response_type,
            Metric::RequestType => self.request_type,
            Metric::Parameter => self.parameter,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<14} {:>8} {:>6} {:>6}", "Criterion", "Covered", "Total", "Ratio").unwrap();
        for metric in Metric::ALL {
            let r = self.metric(metric);
            let flag = if r.vacuous { " (vacuous)" } else { "" };
            writeln!(
                out,
                "{:<14} {:>8} {:>6} {:>5}%{flag}",
                metric.label(),
                r.covered,
                r.total,
                r.percent()
            )
            .unwrap();
        }
        if !self.undocumented.is_empty() {
            writeln!(out, "undocumented:").unwrap();
            for u in &self.undocumented {
                let kind = match u.kind {
                    ObservationKind::Status => "status",
                    ObservationKind::ResponseType => "response type",
                    ObservationKind::RequestType => "request type",
                };
                writeln!(out, "  {} {kind} {}", u.operation, u.value).unwrap();
            }
        }
        if !self.unmatched.is_empty() {
            writeln!(out, "unmatched requests: {}", self.unmatched.len()).unwrap();
        }
        out
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CoverageError {
    #[error("coverage reports come from different documents")]
    Mismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: Metric,
    pub covered: i64,
    pub ratio: f64,
}

fn op_label(template: &str, method: HttpMethod) -> String {
    format!("{method} {template}")
}

/// Response side of `record` is documented for `op`.
fn response_documented(op: &OperationEntry, record: &InteractionRecord) -> Result<(), Undocumented> {
    let Some(response) = op.responses.get(&record.status) else {
        return Err(Undocumented {
            operation: String::new(),
            kind: ObservationKind::Status,
            value: record.status.to_string(),
        });
    };
    let ok = match &record.response_content_type {
        Some(ct) => response.content_types.contains(ct),
        None => response.content_types.is_empty(),
    };
    if ok {
        Ok(())
    } else {
        Err(Undocumented {
            operation: String::new(),
            kind: ObservationKind::ResponseType,
            value: format!(
                "{} {}",
                record.status,
                record.response_content_type.as_deref().unwrap_or("<none>")
            ),
        })
    }
}

pub fn compute_coverage<'a>(
    index: &SpecIndex,
    logs: impl IntoIterator<Item = &'a InteractionLog>,
) -> CoverageReport {
    let mut paths = BTreeSet::new();
    let mut operations = BTreeSet::new();
    let mut classes = BTreeSet::new();
    let mut statuses = BTreeSet::new();
    let mut response_types = BTreeSet::new();
    let mut request_types = BTreeSet::new();
    let mut parameters = BTreeSet::new();
    let mut undocumented = BTreeSet::new();
    let mut unmatched = BTreeSet::new();
    let mut records = 0;

    for record in logs.into_iter().flat_map(|l| l.records()) {
        records += 1;
        let op = (record.template != UNMATCHED)
            .then(|| index.operation(&record.template, record.method))
            .flatten();
        let Some(op) = op else {
            unmatched.insert(format!("{} {}", record.method, record.url));
            continue;
        };
        let label = op_label(&record.template, record.method);
        if let Some(ct) = &record.request_content_type {
            if !op.request_types.contains(ct) {
                undocumented.insert(Undocumented {
                    operation: label.clone(),
                    kind: ObservationKind::RequestType,
                    value: ct.clone(),
                });
            }
        }
        if let Err(mut u) = response_documented(op, record) {
            u.operation = label;
            undocumented.insert(u);
            continue;
        }
        let key = (record.template.as_str(), record.method);
        paths.insert(record.template.as_str());
        operations.insert(key);
        classes.insert((key, record.status / 100));
        statuses.insert((key, record.status));
        if let Some(ct) = &record.response_content_type {
            response_types.insert((key, ct.as_str()));
        }
        if let Some(ct) = &record.request_content_type {
            if op.request_types.contains(ct) {
                request_types.insert((key, ct.as_str()));
            }
        }
        for p in &op.parameters {
            if p.location == ParamLocation::Path || record.params.contains(p.location, &p.name) {
                parameters.insert((key, p.location, p.name.as_str()));
            }
        }
    }

    let mut totals = [0usize; 7];
    for (_, op) in index.operations() {
        totals[2] += op.status_classes().len();
        totals[3] += op.responses.len();
        totals[4] += op.response_types().len();
        totals[5] += op.request_types.len();
        totals[6] += op.parameters.len();
    }
    totals[0] = index.paths.len();
    totals[1] = index.operation_count();

    CoverageReport {
        fingerprint: index.fingerprint(),
        records,
        path: Ratio::new(paths.len(), totals[0]),
        operation: Ratio::new(operations.len(), totals[1]),
        status_class: Ratio::new(classes.len(), totals[2]),
        status: Ratio::new(statuses.len(), totals[3]),
        response_type: Ratio::new(response_types.len(), totals[4]),
        request_type: Ratio::new(request_types.len(), totals[5]),
        parameter: Ratio::new(parameters.len(), totals[6]),
        undocumented: undocumented.into_iter().collect(),
        unmatched: unmatched.into_iter().collect(),
    }
}

/// Per-metric `after - before`.
pub fn diff_coverage(
    before: &CoverageReport,
    after: &CoverageReport,
) -> Result<Vec<MetricDelta>, CoverageError> {
    if before.fingerprint != after.fingerprint {
        return Err(CoverageError::Mismatch);
    }
    Metric::ALL
        .into_iter()
        .map(|metric| {
            let (b, a) = (before.metric(metric), after.metric(metric));
            if a.total != b.total {
                return Err(CoverageError::Mismatch);
            }
            Ok(MetricDelta {
                metric,
                covered: a.covered as i64 - b.covered as i64,
                ratio: a.ratio - b.ratio,
            })
        })
        .collect()
}
