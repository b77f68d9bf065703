//! Success-rate aggregation and report rendering.
//!
//! Rates are kept in integer tenths of a percent and rounded half up, so
//! a report is identical on every platform.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::orchestrator::{TaskOutcome, Termination};
use crate::protocol::{Budgets, Difficulty, Task};

pub const REPORT_VERSION: u32 = 1;

/// Success rate in tenths of a percent, rounded half up. Zero tasks give 0.
pub fn sr_tenths(successes: u32, tasks: u32) -> u32 {
    if tasks == 0 {
        return 0;
    }
    let (s, n) = (successes as u64, tasks as u64);
    ((2000 * s + n) / (2 * n)) as u32
}

/// Half-up mean of values in tenths.
pub fn mean_tenths(values: &[u32]) -> u32 {
    if values.is_empty() {
        return 0;
    }
    let sum: u64 = values.iter().map(|&v| v as u64).sum();
    let k = values.len() as u64;
    ((2 * sum + k) / (2 * k)) as u32
}

pub fn tenths_to_percent(t: u32) -> f64 {
    t as f64 / 10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stats {
    pub n_tasks: u32,
    pub n_success: u32,
    /// Percent with one decimal.
    pub sr: f64,
}

impl Stats {
    pub fn new(n_success: u32, n_tasks: u32) -> Self {
        Self {
            n_tasks,
            n_success,
            sr: tenths_to_percent(sr_tenths(n_success, n_tasks)),
        }
    }

    pub fn tenths(&self) -> u32 {
        sr_tenths(self.n_success, self.n_tasks)
    }

    fn add(&mut self, success: bool) {
        *self = Stats::new(self.n_success + success as u32, self.n_tasks + 1);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub backend: String,
    pub budgets: Budgets,
    pub temperature: f64,
    pub augment_search: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// How runs ended, by termination reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TerminationCounts {
    pub completed: u32,
    pub force_stopped: u32,
    pub budget_exhausted: u32,
    pub protocol_error: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub version: u32,
    pub per_category: BTreeMap<String, Stats>,
    /// Rows for labeled difficulties present in the suite; unlabeled tasks
    /// are reported apart.
    pub per_difficulty: BTreeMap<Difficulty, Stats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unlabeled: Option<Stats>,
    /// Mean of category rates when categories are equal in size, else the
    /// pooled rate.
    pub overall_sr: f64,
    pub overall: Stats,
    pub terminations: TerminationCounts,
    pub config_echo: ConfigEcho,
}

/// Labels a report needs from a task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskLabels {
    pub site_category: String,
    pub difficulty: Difficulty,
}

impl From<&Task> for TaskLabels {
    fn from(t: &Task) -> Self {
        Self {
            site_category: t.site_category.clone(),
            difficulty: t.difficulty,
        }
    }
}

/// Overall rate in tenths from per-category stats.
pub fn overall_tenths(per_category: &BTreeMap<String, Stats>) -> u32 {
    let sizes: Vec<u32> = per_category.values().map(|s| s.n_tasks).collect();
    let equal = sizes.windows(2).all(|w| w[0] == w[1]);
    if equal {
        let rates: Vec<u32> = per_category.values().map(Stats::tenths).collect();
        mean_tenths(&rates)
    } else {
        let s = per_category.values().map(|s| s.n_success).sum();
        let n = per_category.values().map(|s| s.n_tasks).sum();
        sr_tenths(s, n)
    }
}

impl SuiteReport {
    pub fn build(runs: &[(TaskLabels, &TaskOutcome)], config_echo: ConfigEcho) -> Self {
        let mut per_category: BTreeMap<String, Stats> = BTreeMap::new();
        let mut per_difficulty: BTreeMap<Difficulty, Stats> = BTreeMap::new();
        let mut unlabeled: Option<Stats> = None;
        let mut overall = Stats::default();
        let mut terminations = TerminationCounts::default();
        for (labels, outcome) in runs {
            per_category
                .entry(labels.site_category.clone())
                .or_default()
                .add(outcome.success);
            match labels.difficulty {
                Difficulty::Unlabeled => unlabeled.get_or_insert_with(Stats::default).add(outcome.success),
                d => per_difficulty.entry(d).or_default().add(outcome.success),
            }
            overall.add(outcome.success);
            match outcome.termination {
                Termination::Completed => terminations.completed += 1,
                Termination::ForceStopped => terminations.force_stopped += 1,
                Termination::BudgetExhausted => terminations.budget_exhausted += 1,
                Termination::ProtocolError(_) => terminations.protocol_error += 1,
            }
        }
        Self {
            version: REPORT_VERSION,
            overall_sr: tenths_to_percent(overall_tenths(&per_category)),
            per_category,
            per_difficulty,
            unlabeled,
            overall,
            terminations,
            config_echo,
        }
    }

    /// Human-readable summary.
    pub fn render_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| Category | Tasks | Success | SR (%) |");
        let _ = writeln!(out, "|---|---:|---:|---:|");
        for (name, s) in &self.per_category {
            let _ = writeln!(out, "| {name} | {} | {} | {:.1} |", s.n_tasks, s.n_success, s.sr);
        }
        let _ = writeln!(
            out,
            "| Overall | {} | {} | {:.1} |",
            self.overall.n_tasks, self.overall.n_success, self.overall_sr
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "| Difficulty | Tasks | Success | SR (%) |");
        let _ = writeln!(out, "|---|---:|---:|---:|");
        let rows = self.per_difficulty.iter().map(|(d, s)| (d.to_string(), s));
        for (name, s) in rows.chain(self.unlabeled.as_ref().map(|s| ("Unlabeled".to_string(), s))) {
            let _ = writeln!(out, "| {name} | {} | {} | {:.1} |", s.n_tasks, s.n_success, s.sr);
        }
        let t = &self.terminations;
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "completed {}, force stopped {}, budget exhausted {}, protocol error {}",
            t.completed, t.force_stopped, t.budget_exhausted, t.protocol_error
        );
        out
    }
}

/// One row of a method-by-category comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub cells: BTreeMap<String, f64>,
    pub avg: Option<f64>,
}

impl TableRow {
    pub fn from_report(label: impl Into<String>, report: &SuiteReport) -> Self {
        Self {
            label: label.into(),
            cells: report.per_category.iter().map(|(k, s)| (k.clone(), s.sr)).collect(),
            avg: Some(report.overall_sr),
        }
    }
}

/// Markdown table with one column per category plus `Avg`. Cells a row
/// has no value for are left blank.
pub fn render_table(rows: &[TableRow], categories: &[String]) -> String {
    let mut out = String::from("| Method |");
    for c in categories {
        let _ = write!(out, " {c} |");
    }
    out.push_str(" Avg |\n|---|");
    out.push_str(&"---:|".repeat(categories.len() + 1));
    out.push('\n');
    for row in rows {
        let _ = write!(out, "| {} |", row.label);
        for c in categories {
            match row.cells.get(c) {
                Some(v) => {
                    let _ = write!(out, " {v:.1} |");
                }
                None => out.push_str("  |"),
            }
        }
        match row.avg {
            Some(v) => {
                let _ = writeln!(out, " {v:.1} |");
            }
            None => out.push_str("  |\n"),
        }
    }
    out
}
