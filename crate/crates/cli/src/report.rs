//! Result tables over one or more `amplify` output directories.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::Serialize;

use restamp_core::coverage::{CoverageReport, Metric};
use restamp_core::dsl::{parse_suite, Origin};
use restamp_core::runner::{ExecutionReport, Verdict};
use restamp_core::triage::{Category, Triage};

use crate::args::ReportArgs;
use crate::{config, pretty_json, read_input, CliError, EXIT_OK};

/// Raw numbers of one amplification run.
#[derive(Debug, Clone, Default)]
pub struct RunFigures {
    pub name: String,
    pub generated: u64,
    pub successful: u64,
    pub failed: u64,
    pub bug_exposing: u64,
    pub categories: [u64; 4],
    pub initial_coverage: [(u64, u64); 7],
    pub coverage: [(u64, u64); 7],
    pub wall_time: Decimal,
    pub tokens: u64,
    pub cost: Decimal,
    pub energy: Decimal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub label: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn render(&self) -> String {
        let label_width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(8);
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|i| {
                self.rows
                    .iter()
                    .map(|r| r.values[i].len())
                    .chain([self.columns[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        writeln!(out, "{}", self.title).unwrap();
        write!(out, "{:<label_width$}", "").unwrap();
        for (c, w) in self.columns.iter().zip(&widths) {
            write!(out, "  {c:>w$}").unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "{:<label_width$}", row.label).unwrap();
            for (v, w) in row.values.iter().zip(&widths) {
                write!(out, "  {v:>w$}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn read_json<T: serde::de::DeserializeOwned>(dir: &Path, file: &str) -> Result<T, CliError> {
    let path = dir.join(file);
    serde_json::from_str(&read_input(&path, "run output")?)
        .map_err(|e| config(format!("{}: {e}", path.display())))
}

fn decimal_field(value: &serde_json::Value, key: &str, dir: &Path) -> Result<Decimal, CliError> {
    value
        .get(key)
        .and_then(|v| v.as_str())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| config(format!("{}: usage.json lacks `{key}`", dir.display())))
}

fn coverage_pairs(report: &CoverageReport) -> [(u64, u64); 7] {
    Metric::ALL.map(|m| {
        let r = report.metric(m);
        (r.covered as u64, r.total as u64)
    })
}

/// Read the figures of one output directory.
pub fn load_run(dir: &Path) -> Result<RunFigures, CliError> {
    if !dir.join("run.json").is_file() {
        return Err(config(format!(
            "{} is not an amplification output directory (no run.json)",
            dir.display()
        )));
    }
    let suite_path = dir.join("suite.json");
    let suite = parse_suite(&read_input(&suite_path, "suite")?)
        .map_err(|e| config(format!("{}:\n{e}", suite_path.display())))?;
    let report: ExecutionReport = read_json(dir, "execution_report.json")?;
    let triage: Triage = read_json(dir, "triage.json")?;
    let initial: CoverageReport = read_json(dir, "coverage_initial.json")?;
    let coverage: CoverageReport = read_json(dir, "coverage.json")?;
    let usage: serde_json::Value = read_json(dir, "usage.json")?;

    let mut fig = RunFigures {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string()),
        initial_coverage: coverage_pairs(&initial),
        coverage: coverage_pairs(&coverage),
        wall_time: decimal_field(&usage, "wall_time_s", dir)?,
        tokens: usage.get("total_tokens").and_then(|v| v.as_u64()).unwrap_or(0),
        cost: decimal_field(&usage, "cost", dir)?,
        energy: decimal_field(&usage, "energy_wh", dir)?,
        ..RunFigures::default()
    };
    for result in &report.cases {
        let generated = suite.case(&result.name).is_some_and(|c| c.origin != Origin::Seed);
        if !generated {
            continue;
        }
        fig.generated += 1;
        if result.verdict == Verdict::Passed {
            fig.successful += 1;
            continue;
        }
        fig.failed += 1;
        if let Some(label) = triage.get(&result.name) {
            let slot = Category::ALL.iter().position(|c| *c == label.label).expect("known category");
            fig.categories[slot] += 1;
            if label.label == Category::BugExposed {
                fig.bug_exposing += 1;
            }
        }
    }
    Ok(fig)
}

/// Integer percentage of `n` in `d`, halves rounded up.
pub fn percent(n: u64, d: u64) -> String {
    if d == 0 {
        return "-".into();
    }
    format!("{}%", (200 * n + d) / (2 * d))
}

fn mean(values: impl Iterator<Item = Decimal>, runs: usize, dp: u32) -> String {
    let sum: Decimal = values.sum();
    let m = sum / Decimal::from(runs as u64);
    m.round_dp_with_strategy(dp, RoundingStrategy::MidpointAwayFromZero).normalize().to_string()
}

fn fixed(value: Decimal, dp: u32) -> String {
    let mut v = value.round_dp_with_strategy(dp, RoundingStrategy::MidpointAwayFromZero);
    v.rescale(dp);
    v.to_string()
}

type Field = dyn Fn(&RunFigures) -> Decimal;

/// Build the four result tables.
pub fn build_tables(runs: &[RunFigures], aggregate: bool) -> Vec<Table> {
    // In aggregate mode every run folds into one column: counts are averaged
    // and shares are taken over summed counts.
    let groups: Vec<(String, Vec<&RunFigures>)> = if aggregate {
        vec![(format!("mean of {}", runs.len()), runs.iter().collect())]
    } else {
        runs.iter().map(|r| (r.name.clone(), vec![r])).collect()
    };
    let columns: Vec<String> = groups.iter().map(|(n, _)| n.clone()).collect();
    let count = |g: &[&RunFigures], f: &dyn Fn(&RunFigures) -> u64| -> (String, u64) {
        let sum: u64 = g.iter().map(|r| f(r)).sum();
        let shown = if g.len() == 1 {
            sum.to_string()
        } else {
            mean(g.iter().map(|r| Decimal::from(f(r))), g.len(), 2)
        };
        (shown, sum)
    };
    let shared = |g: &[&RunFigures], f: &dyn Fn(&RunFigures) -> u64, base: &dyn Fn(&RunFigures) -> u64| {
        let (shown, n) = count(g, f);
        let (_, d) = count(g, base);
        format!("{shown} ({})", percent(n, d))
    };

    let mut tables = Vec::new();

    let t1 = [
        ("generated", None),
        ("successful", Some(0)),
        ("failed", Some(1)),
        ("bug-exposing", Some(2)),
    ];
    let mut rows = Vec::new();
    for (label, which) in t1 {
        let values = groups
            .iter()
            .map(|(_, g)| match which {
                None => count(g, &|r| r.generated).0,
                Some(0) => shared(g, &|r| r.successful, &|r| r.generated),
                Some(1) => shared(g, &|r| r.failed, &|r| r.generated),
                _ => shared(g, &|r| r.bug_exposing, &|r| r.generated),
            })
            .collect();
        rows.push(Row { label: label.into(), values });
    }
    tables.push(Table {
        title: "Generated tests".into(),
        columns: columns.clone(),
        rows,
    });

    let mut rows = vec![Row {
        label: "failed".into(),
        values: groups.iter().map(|(_, g)| count(g, &|r| r.failed).0).collect(),
    }];
    for (slot, category) in Category::ALL.iter().enumerate() {
        rows.push(Row {
            label: category.title().to_string(),
            values: groups
                .iter()
                .map(|(_, g)| shared(g, &|r| r.categories[slot], &|r| r.failed))
                .collect(),
        });
    }
    tables.push(Table {
        title: "Failure analysis".into(),
        columns: columns.clone(),
        rows,
    });

    let mut cov_columns = vec!["initial".to_string()];
    cov_columns.extend(columns.iter().cloned());
    let mut rows = Vec::new();
    for (slot, metric) in Metric::ALL.iter().enumerate() {
        let cell = |pairs: &dyn Fn(&RunFigures) -> (u64, u64), g: &[&RunFigures]| {
            let covered: u64 = g.iter().map(|r| pairs(r).0).sum();
            let total: u64 = g.iter().map(|r| pairs(r).1).sum();
            let shown = if g.len() == 1 {
                format!("{covered}/{total}")
            } else {
                format!(
                    "{}/{}",
                    mean(g.iter().map(|r| Decimal::from(pairs(r).0)), g.len(), 2),
                    mean(g.iter().map(|r| Decimal::from(pairs(r).1)), g.len(), 2)
                )
            };
            let share = if total == 0 { "100%".to_string() } else { percent(covered, total) };
            format!("{shown} ({share})")
        };
        let all: Vec<&RunFigures> = runs.iter().collect();
        let initial_group: &[&RunFigures] = if aggregate { &all } else { &all[..1] };
        let mut values = vec![cell(&|r| r.initial_coverage[slot], initial_group)];
        values.extend(groups.iter().map(|(_, g)| cell(&|r| r.coverage[slot], g)));
        rows.push(Row {
            label: metric.label().to_string(),
            values,
        });
    }
    tables.push(Table {
        title: "Coverage".into(),
        columns: cov_columns,
        rows,
    });

    let cost_rows: [(&str, u32, &Field); 4] = [
        ("time (s)", 1, &|r| r.wall_time),
        ("tokens", 0, &|r| Decimal::from(r.tokens)),
        ("cost (USD)", 5, &|r| r.cost),
        ("energy (Wh)", 2, &|r| r.energy),
    ];
    let rows = cost_rows
        .iter()
        .map(|(label, dp, f)| Row {
            label: label.to_string(),
            values: groups
                .iter()
                .map(|(_, g)| {
                    let sum: Decimal = g.iter().map(|r| f(r)).sum();
                    fixed(sum / Decimal::from(g.len() as u64), *dp)
                })
                .collect(),
        })
        .collect();
    tables.push(Table {
        title: "Cost".into(),
        columns,
        rows,
    });
    tables
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let runs = args
        .dirs
        .iter()
        .map(|d| load_run(d))
        .collect::<Result<Vec<_>, _>>()?;
    let tables = build_tables(&runs, args.aggregate);
    if args.json {
        write!(out, "{}", pretty_json(&tables)).ok();
    } else {
        for (i, t) in tables.iter().enumerate() {
            if i > 0 {
                writeln!(out).ok();
            }
            write!(out, "{}", t.render()).ok();
        }
    }
    Ok(EXIT_OK)
}
