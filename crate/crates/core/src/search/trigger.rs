use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::format::{sig9, time9};
use crate::strain_io::sha256_hex;
use crate::synth::DetectorId;

pub const TRIGGER_HEADER: &str = "detector,template_id,end_time_s,snr,chisq_r,stat";

/// Single-detector candidate after clustering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    pub detector: DetectorId,
    pub template_id: u32,
    pub end_time_s: f64,
    pub snr: f64,
    pub chisq_r: f64,
    pub stat: f64,
}

impl Trigger {
    pub fn new(
        detector: DetectorId,
        template_id: u32,
        end_time_s: f64,
        snr: f64,
        chisq_r: f64,
    ) -> Self {
        Trigger {
            detector,
            template_id,
            end_time_s,
            snr,
            chisq_r,
            stat: reweight(snr, chisq_r),
        }
    }
}

/// Chi-squared reweighted SNR ("newSNR").
pub fn reweight(snr: f64, chisq_r: f64) -> f64 {
    if chisq_r <= 1.0 {
        snr
    } else {
        snr * ((1.0 + chisq_r.powi(3)) / 2.0).powf(-1.0 / 6.0)
    }
}

fn by_time_then_template(a: &Trigger, b: &Trigger) -> std::cmp::Ordering {
    a.end_time_s
        .total_cmp(&b.end_time_s)
        .then(a.template_id.cmp(&b.template_id))
}

/// Stable sort by (end_time, template_id).
pub fn sort_triggers(triggers: &mut [Trigger]) {
    triggers.sort_by(by_time_then_template);
}

pub fn triggers_to_csv(triggers: &[Trigger]) -> String {
    let mut out = String::with_capacity(64 * (triggers.len() + 1));
    out.push_str(TRIGGER_HEADER);
    out.push('\n');
    for t in triggers {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            t.detector,
            t.template_id,
            time9(t.end_time_s),
            sig9(t.snr),
            sig9(t.chisq_r),
            sig9(t.stat)
        );
    }
    out
}

pub fn triggers_from_csv(text: &str) -> Result<Vec<Trigger>> {
    let bad = |detail: String| Error::Parse {
        what: "trigger file",
        detail,
    };
    let mut lines = text.lines();
    if lines.next() != Some(TRIGGER_HEADER) {
        return Err(bad(format!("expected header {TRIGGER_HEADER:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(bad(format!(
                "row {}: expected 6 fields, got {}",
                i + 1,
                fields.len()
            )));
        }
        let num = |k: usize| {
            fields[k]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))
        };
        out.push(Trigger {
            detector: fields[0].parse()?,
            template_id: fields[1]
                .parse()
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))?,
            end_time_s: num(2)?,
            snr: num(3)?,
            chisq_r: num(4)?,
            stat: num(5)?,
        });
    }
    Ok(out)
}

/// Result of merging trigger files.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedTriggers {
    pub triggers: Vec<Trigger>,
    /// SHA-256 of each input, in input order.
    pub input_checksums: Vec<String>,
}

/// Concatenates trigger files (CSV bytes) and sorts by (end_time, template_id).
/// Duplicate rows are kept.
pub fn merge_triggers(inputs: &[&[u8]]) -> Result<MergedTriggers> {
    let mut triggers = Vec::new();
    let mut input_checksums = Vec::with_capacity(inputs.len());
    for bytes in inputs {
        input_checksums.push(sha256_hex(bytes));
        let text = std::str::from_utf8(bytes)
            .map_err(|e| invalid(format!("trigger file is not UTF-8: {e}")))?;
        triggers.extend(triggers_from_csv(text)?);
    }
    sort_triggers(&mut triggers);
    Ok(MergedTriggers {
        triggers,
        input_checksums,
    })
}
