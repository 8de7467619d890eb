//! Per-attempt provenance records. The log is tab-separated, one attempt per
//! line, fields in [`FIELDS`] order, no header.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const FIELDS: [&str; 15] = [
    "task_id",
    "transformation",
    "attempt_no",
    "node_id",
    "start_s",
    "duration_s",
    "request_mem_mb",
    "peak_mem_mb",
    "status",
    "failure_reason",
    "checksums_compared",
    "checksum_compare_s",
    "checksums_generated",
    "checksum_generate_s",
    "integrity_errors",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    Success,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FailureReason {
    None,
    IncompatibleNode,
    MemoryEviction,
    IntegrityError,
    TaskError,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Success => "success",
            Status::Failed => "failed",
        })
    }
}

impl FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "success" => Ok(Status::Success),
            "failed" => Ok(Status::Failed),
            _ => Err(format!("unknown status {s:?}")),
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureReason::None => "none",
            FailureReason::IncompatibleNode => "incompatible_node",
            FailureReason::MemoryEviction => "memory_eviction",
            FailureReason::IntegrityError => "integrity_error",
            FailureReason::TaskError => "task_error",
        })
    }
}

impl FromStr for FailureReason {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(FailureReason::None),
            "incompatible_node" => Ok(FailureReason::IncompatibleNode),
            "memory_eviction" => Ok(FailureReason::MemoryEviction),
            "integrity_error" => Ok(FailureReason::IntegrityError),
            "task_error" => Ok(FailureReason::TaskError),
            _ => Err(format!("unknown failure reason {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptRecord {
    pub task_id: String,
    pub transformation: String,
    /// 1-based.
    pub attempt_no: u32,
    pub node_id: String,
    /// Virtual seconds since the workflow started.
    pub start_s: f64,
    pub duration_s: f64,
    pub request_mem_mb: u64,
    pub peak_mem_mb: u64,
    pub status: Status,
    pub failure_reason: FailureReason,
    pub checksums_compared: u32,
    pub checksum_compare_s: f64,
    pub checksums_generated: u32,
    pub checksum_generate_s: f64,
    pub integrity_errors: u32,
}

impl AttemptRecord {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }
}

/// Fixed six-decimal rendering keeps logs byte-reproducible.
fn secs(x: f64) -> String {
    format!("{x:.6}")
}

pub fn log_to_text(log: &[AttemptRecord]) -> String {
    let mut out = String::new();
    for r in log {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.task_id,
            r.transformation,
            r.attempt_no,
            r.node_id,
            secs(r.start_s),
            secs(r.duration_s),
            r.request_mem_mb,
            r.peak_mem_mb,
            r.status,
            r.failure_reason,
            r.checksums_compared,
            secs(r.checksum_compare_s),
            r.checksums_generated,
            secs(r.checksum_generate_s),
            r.integrity_errors
        );
    }
    out
}

pub fn log_from_text(text: &str) -> Result<Vec<AttemptRecord>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |detail: String| Error::Parse {
            what: "provenance log",
            line: n + 1,
            detail,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != FIELDS.len() {
            return Err(bad(format!(
                "expected {} tab-separated fields, got {}",
                FIELDS.len(),
                f.len()
            )));
        }
        fn num<T: FromStr>(f: &[&str], i: usize) -> std::result::Result<T, String>
        where
            T::Err: fmt::Display,
        {
            f[i].parse::<T>().map_err(|e| format!("{}: {e}", FIELDS[i]))
        }
        let record = (|| -> std::result::Result<AttemptRecord, String> {
            let r = AttemptRecord {
                task_id: f[0].to_string(),
                transformation: f[1].to_string(),
                attempt_no: num(&f, 2)?,
                node_id: f[3].to_string(),
                start_s: num(&f, 4)?,
                duration_s: num(&f, 5)?,
                request_mem_mb: num(&f, 6)?,
                peak_mem_mb: num(&f, 7)?,
                status: f[8].parse()?,
                failure_reason: f[9].parse()?,
                checksums_compared: num(&f, 10)?,
                checksum_compare_s: num(&f, 11)?,
                checksums_generated: num(&f, 12)?,
                checksum_generate_s: num(&f, 13)?,
                integrity_errors: num(&f, 14)?,
            };
            if r.duration_s < 0.0 {
                return Err("negative duration".into());
            }
            if (r.status == Status::Success) != (r.failure_reason == FailureReason::None) {
                return Err(format!(
                    "status {} with failure reason {}",
                    r.status, r.failure_reason
                ));
            }
            Ok(r)
        })()
        .map_err(bad)?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(
        task: &str,
        attempt: u32,
        duration: f64,
        reason: FailureReason,
    ) -> AttemptRecord {
        AttemptRecord {
            task_id: task.into(),
            transformation: "inspiral".into(),
            attempt_no: attempt,
            node_id: "n0".into(),
            start_s: 10.0,
            duration_s: duration,
            request_mem_mb: 2048,
            peak_mem_mb: 1500,
            status: if reason == FailureReason::None {
                Status::Success
            } else {
                Status::Failed
            },
            failure_reason: reason,
            checksums_compared: 2,
            checksum_compare_s: 0.25,
            checksums_generated: 1,
            checksum_generate_s: 0.125,
            integrity_errors: 0,
        }
    }

    #[test]
    fn log_round_trip() {
        let log = vec![
            record("t1", 1, 33.5, FailureReason::MemoryEviction),
            record("t1", 2, 50.0, FailureReason::None),
        ];
        let text = log_to_text(&log);
        assert_eq!(
            text.lines().next().unwrap(),
            "t1\tinspiral\t1\tn0\t10.000000\t33.500000\t2048\t1500\tfailed\tmemory_eviction\t2\t0.250000\t1\t0.125000\t0"
        );
        assert_eq!(log_from_text(&text).unwrap(), log);
    }

    #[test]
    fn rejects_inconsistent_status() {
        let mut r = record("t1", 1, 1.0, FailureReason::None);
        r.status = Status::Failed;
        assert!(log_from_text(&log_to_text(&[r])).is_err());
        assert!(log_from_text("a\tb\n").is_err());
    }
}
