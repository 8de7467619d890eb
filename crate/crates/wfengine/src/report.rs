//! Run statistics in the layout of `pegasus-statistics`, plus per-transformation
//! memory and runtime tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::provenance::{AttemptRecord, FailureReason, Status};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TaskCounts {
    pub succeeded: usize,
    pub failed: usize,
    pub incomplete: usize,
    pub total: usize,
    pub retries: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub tasks: TaskCounts,
    pub workflow_wall_time_s: f64,
    pub cumulative_job_wall_time_s: f64,
    pub cumulative_badput_s: f64,
    pub files_checksums_compared: u64,
    pub checksum_compare_s: f64,
    pub files_checksums_generated: u64,
    pub checksum_generate_s: f64,
    pub integrity_errors_total: u64,
    /// Failed tasks whose last attempt ended in an integrity error.
    pub failures_with_integrity_errors: usize,
}

impl RunReport {
    /// `total_tasks` is the DAG size; tasks absent from the log are incomplete.
    /// A task counts as succeeded when its last attempt succeeded.
    pub fn from_log(log: &[AttemptRecord], total_tasks: usize) -> Self {
        let mut last: BTreeMap<&str, &AttemptRecord> = BTreeMap::new();
        let mut r = RunReport::default();
        let (mut first_start, mut last_end) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in log {
            let slot = last.entry(a.task_id.as_str()).or_insert(a);
            if (a.end_s(), a.attempt_no) >= (slot.end_s(), slot.attempt_no) {
                *slot = a;
            }
            r.cumulative_job_wall_time_s += a.duration_s;
            if a.status == Status::Failed {
                r.cumulative_badput_s += a.duration_s;
            }
            r.files_checksums_compared += a.checksums_compared as u64;
            r.checksum_compare_s += a.checksum_compare_s;
            r.files_checksums_generated += a.checksums_generated as u64;
            r.checksum_generate_s += a.checksum_generate_s;
            r.integrity_errors_total += a.integrity_errors as u64;
            first_start = first_start.min(a.start_s);
            last_end = last_end.max(a.end_s());
        }
        if !log.is_empty() {
            r.workflow_wall_time_s = last_end - first_start;
        }
        let attempted = last.len();
        let succeeded = last
            .values()
            .filter(|a| a.status == Status::Success)
            .count();
        r.failures_with_integrity_errors = last
            .values()
            .filter(|a| {
                a.status == Status::Failed && a.failure_reason == FailureReason::IntegrityError
            })
            .count();
        r.tasks = TaskCounts {
            succeeded,
            failed: attempted - succeeded,
            incomplete: total_tasks.saturating_sub(attempted),
            total: total_tasks.max(attempted),
            retries: log.len() - attempted,
        };
        r
    }

    pub fn render(&self) -> String {
        let rule = "-".repeat(77);
        let t = &self.tasks;
        let mut out = String::new();
        let _ = writeln!(out, "{rule}");
        let _ = writeln!(
            out,
            "Type           Succeeded Failed  Incomplete  Total     Retries"
        );
        // Tasks map one-to-one onto jobs here; sub-workflows are flattened.
        for (label, c) in [
            ("Tasks", *t),
            ("Jobs", *t),
            ("Sub-Workflows", TaskCounts::default()),
        ] {
            let _ = writeln!(
                out,
                "{:<15}{:<10}{:<8}{:<12}{:<10}{:<12}",
                label, c.succeeded, c.failed, c.incomplete, c.total, c.retries
            );
        }
        let _ = writeln!(out, "{rule}");
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<57}: {}",
            "Workflow wall time",
            format_duration(self.workflow_wall_time_s)
        );
        let _ = writeln!(
            out,
            "{:<57}: {}",
            "Cumulative job wall time",
            format_duration(self.cumulative_job_wall_time_s)
        );
        let _ = writeln!(
            out,
            "{:<57}: {}",
            "Cumulative job badput wall time",
            format_duration(self.cumulative_badput_s)
        );
        out.push('\n');
        out.push_str("# Integrity Metrics\n");
        out.push_str("# Number of files for which checksums were compared/computed along\n");
        out.push_str("# with total time spent doing it. \n");
        let _ = writeln!(
            out,
            "{} files checksums compared with total duration of {}",
            self.files_checksums_compared,
            format_duration(self.checksum_compare_s)
        );
        let _ = writeln!(
            out,
            "{} files checksums generated with total duration of {}",
            self.files_checksums_generated,
            format_duration(self.checksum_generate_s)
        );
        out.push('\n');
        out.push_str("# Integrity Errors\n");
        out.push_str("# Total:\n");
        out.push_str("#       Total number of integrity errors encountered across all job \n");
        out.push_str("#       executions(including retries) of a workflow.\n");
        out.push_str("# Failures:\n");
        out.push_str(
            "#       Number of failed jobs where the last job instance had integrity errors.\n",
        );
        let _ = writeln!(
            out,
            "Total:    A total of {} integrity errors encountered in the workflow",
            self.integrity_errors_total
        );
        let _ = writeln!(
            out,
            "Failures: {} job failures had integrity errors",
            self.failures_with_integrity_errors
        );
        out
    }
}

/// The two largest units, e.g. "29 days, 0 hrs" or "7 hrs, 55 mins";
/// below one minute just "N secs".
pub fn format_duration(seconds: f64) -> String {
    let total = if seconds.is_finite() && seconds > 0.0 {
        seconds.round() as u64
    } else {
        0
    };
    const UNITS: [(u64, &str, &str); 5] = [
        (365 * 86_400, "year", "years"),
        (86_400, "day", "days"),
        (3_600, "hr", "hrs"),
        (60, "min", "mins"),
        (1, "sec", "secs"),
    ];
    let unit = |n: u64, i: usize| format!("{n} {}", if n == 1 { UNITS[i].1 } else { UNITS[i].2 });
    let Some(i) = UNITS
        .iter()
        .position(|(s, _, _)| total >= *s)
        .filter(|&i| i < 4)
    else {
        return unit(total, 4);
    };
    let major = total / UNITS[i].0;
    let minor = (total % UNITS[i].0) / UNITS[i + 1].0;
    format!("{}, {}", unit(major, i), unit(minor, i + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortBy {
    Memory,
    Runtime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformationSummary {
    pub transformation: String,
    pub count: usize,
    pub mean_runtime_s: f64,
    pub max_runtime_s: f64,
    pub min_peak_mem_mb: u64,
    pub max_peak_mem_mb: u64,
    pub mean_peak_mem_mb: f64,
}

/// All attempts grouped by transformation, sorted by descending maximum
/// peak memory or maximum runtime; name breaks ties.
pub fn summarize_transformations(log: &[AttemptRecord], by: SortBy) -> Vec<TransformationSummary> {
    let mut groups: BTreeMap<&str, Vec<&AttemptRecord>> = BTreeMap::new();
    for a in log {
        groups.entry(a.transformation.as_str()).or_default().push(a);
    }
    let mut rows: Vec<TransformationSummary> = groups
        .into_iter()
        .map(|(name, v)| {
            let n = v.len() as f64;
            TransformationSummary {
                transformation: name.to_string(),
                count: v.len(),
                mean_runtime_s: v.iter().map(|a| a.duration_s).sum::<f64>() / n,
                max_runtime_s: v.iter().map(|a| a.duration_s).fold(0.0, f64::max),
                min_peak_mem_mb: v.iter().map(|a| a.peak_mem_mb).min().unwrap_or(0),
                max_peak_mem_mb: v.iter().map(|a| a.peak_mem_mb).max().unwrap_or(0),
                mean_peak_mem_mb: v.iter().map(|a| a.peak_mem_mb as f64).sum::<f64>() / n,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        let key = match by {
            SortBy::Memory => b.max_peak_mem_mb.cmp(&a.max_peak_mem_mb),
            SortBy::Runtime => b.max_runtime_s.total_cmp(&a.max_runtime_s),
        };
        key.then_with(|| a.transformation.cmp(&b.transformation))
    });
    rows
}

pub fn render_transformations(rows: &[TransformationSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<28} {:>7} {:>14} {:>14} {:>12} {:>12} {:>12}",
        "Transformation",
        "Count",
        "Mean runtime",
        "Max runtime",
        "Min mem MB",
        "Max mem MB",
        "Mean mem MB"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<28} {:>7} {:>14.3} {:>14.3} {:>12} {:>12} {:>12.1}",
            r.transformation,
            r.count,
            r.mean_runtime_s,
            r.max_runtime_s,
            r.min_peak_mem_mb,
            r.max_peak_mem_mb,
            r.mean_peak_mem_mb
        );
    }
    out
}
