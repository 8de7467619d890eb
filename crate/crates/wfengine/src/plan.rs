//! Builds the search DAG:
//!
//! ```text
//! calculate_psd (detector × part) → inspiral (detector × segment × bank part)
//!   → hdf_trigger_merge (detector) → statmap → [distribute_background_bins] → plot_snrifar
//! ```

use std::collections::BTreeSet;

use crate::dag::{Dag, TaskSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageRequests {
    pub calculate_psd: u64,
    pub inspiral: u64,
    pub hdf_trigger_merge: u64,
    pub statmap: u64,
    pub distribute_background_bins: u64,
    pub plot_snrifar: u64,
}

impl Default for StageRequests {
    fn default() -> Self {
        StageRequests {
            calculate_psd: 1024,
            inspiral: 2048,
            hdf_trigger_merge: 1024,
            statmap: 2048,
            distribute_background_bins: 1024,
            plot_snrifar: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanConfig {
    /// Exactly two, in network order.
    pub detectors: Vec<String>,
    pub psd_parts: u32,
    pub segments: u32,
    pub bank_parts: u32,
    pub inspiral_features: BTreeSet<String>,
    /// Adds a distribute_background_bins stage after statmap.
    pub binning: bool,
    pub requests: StageRequests,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            detectors: vec!["H1".into(), "L1".into()],
            psd_parts: 2,
            segments: 4,
            bank_parts: 1,
            inspiral_features: BTreeSet::from(["fma4".to_string()]),
            binning: false,
            requests: StageRequests::default(),
        }
    }
}

pub fn strain_path(det: &str) -> String {
    format!("strain/{det}.gwsd")
}

pub fn psd_path(det: &str, part: u32) -> String {
    format!("psd/{det}-PART{part}.csv")
}

pub fn trigger_path(det: &str, seg: u32, bank: u32) -> String {
    format!("triggers/{det}-SEG{seg}-BANK{bank}.csv")
}

pub fn merged_path(det: &str) -> String {
    format!("triggers/{det}-merged.csv")
}

pub const STATMAP_PATH: &str = "results/statmap.txt";
pub const BINNED_PATH: &str = "results/statmap-binned.txt";
pub const HIST_CSV_PATH: &str = "plots/hist.csv";
pub const HIST_SVG_PATH: &str = "plots/hist.svg";

/// Files the plan expects to exist before anything runs.
pub fn initial_files(config: &PlanConfig) -> BTreeSet<String> {
    config.detectors.iter().map(|d| strain_path(d)).collect()
}

pub fn plan(config: &PlanConfig) -> Result<Dag> {
    if config.detectors.len() != 2 {
        return Err(Error::Config(format!(
            "need exactly two detectors, got {}",
            config.detectors.len()
        )));
    }
    if config.detectors[0] == config.detectors[1] {
        return Err(Error::Config("detectors must differ".into()));
    }
    for (what, n) in [
        ("segments", config.segments),
        ("PSD parts", config.psd_parts),
        ("bank parts", config.bank_parts),
    ] {
        if n == 0 {
            return Err(Error::EmptyAnalysis(format!("zero {what}")));
        }
    }
    let req = &config.requests;
    let mut tasks: Vec<TaskSpec> = Vec::new();
    let mut push = |mut t: TaskSpec| -> String {
        t.id = format!("{}_ID{}", t.id, tasks.len() + 1);
        let id = t.id.clone();
        tasks.push(t);
        id
    };

    let mut psd_ids = Vec::new();
    for det in &config.detectors {
        let mut ids = Vec::new();
        for p in 0..config.psd_parts {
            let mut t = TaskSpec::new(
                format!("calculate_psd-PART{p}-{det}"),
                "calculate_psd",
                req.calculate_psd,
            );
            t.inputs = vec![strain_path(det)];
            t.outputs = vec![psd_path(det, p)];
            ids.push(push(t));
        }
        psd_ids.push(ids);
    }

    let mut inspiral_ids = Vec::new();
    for (d, det) in config.detectors.iter().enumerate() {
        let mut ids = Vec::new();
        for s in 0..config.segments {
            for b in 0..config.bank_parts {
                let mut t = TaskSpec::new(
                    format!("inspiral-FULL_DATA-SEG{s}-BANK{b}-{det}"),
                    "inspiral",
                    req.inspiral,
                );
                t.parents = psd_ids[d].clone();
                t.inputs = std::iter::once(strain_path(det))
                    .chain((0..config.psd_parts).map(|p| psd_path(det, p)))
                    .collect();
                t.outputs = vec![trigger_path(det, s, b)];
                t.required_features = config.inspiral_features.clone();
                ids.push(push(t));
            }
        }
        inspiral_ids.push(ids);
    }

    let mut merge_ids = Vec::new();
    for (d, det) in config.detectors.iter().enumerate() {
        let mut t = TaskSpec::new(
            format!("hdf_trigger_merge-FULL_DATA-{det}"),
            "hdf_trigger_merge",
            req.hdf_trigger_merge,
        );
        t.parents = inspiral_ids[d].clone();
        t.inputs = (0..config.segments)
            .flat_map(|s| (0..config.bank_parts).map(move |b| trigger_path(det, s, b)))
            .collect();
        t.outputs = vec![merged_path(det)];
        merge_ids.push(push(t));
    }

    let network = config.detectors.concat();
    let merged: Vec<String> = config.detectors.iter().map(|d| merged_path(d)).collect();
    let mut statmap = TaskSpec::new(
        format!("statmap-FULL_DATA-{network}"),
        "statmap",
        req.statmap,
    );
    statmap.parents = merge_ids.clone();
    statmap.inputs = merged.clone();
    statmap.outputs = vec![STATMAP_PATH.into()];
    let statmap_id = push(statmap);

    let (final_parent, final_path) = if config.binning {
        let mut t = TaskSpec::new(
            format!("distribute_background_bins-FULL_DATA-{network}"),
            "distribute_background_bins",
            req.distribute_background_bins,
        );
        t.parents = std::iter::once(statmap_id).chain(merge_ids).collect();
        t.inputs = std::iter::once(STATMAP_PATH.to_string())
            .chain(merged)
            .collect();
        t.outputs = vec![BINNED_PATH.into()];
        (push(t), BINNED_PATH)
    } else {
        (statmap_id, STATMAP_PATH)
    };

    let mut plot = TaskSpec::new(
        format!("plot_snrifar-FULL_DATA-{network}"),
        "plot_snrifar",
        req.plot_snrifar,
    );
    plot.parents = vec![final_parent];
    plot.inputs = vec![final_path.into()];
    plot.outputs = vec![HIST_CSV_PATH.into(), HIST_SVG_PATH.into()];
    push(plot);

    Ok(Dag::new(tasks))
}

/// Detector, PSD part, segment and bank part encoded in a planned task id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageLabels {
    pub detector: Option<String>,
    pub part: Option<u32>,
    pub segment: Option<u32>,
    pub bank: Option<u32>,
}

pub fn parse_labels(task_id: &str) -> StageLabels {
    let base = match task_id.rsplit_once("_ID") {
        Some((b, n)) if !n.is_empty() && n.bytes().all(|c| c.is_ascii_digit()) => b,
        _ => task_id,
    };
    let mut labels = StageLabels::default();
    let words: Vec<&str> = base.split('-').collect();
    for w in &words[1..] {
        let num = |prefix: &str| w.strip_prefix(prefix).and_then(|v| v.parse::<u32>().ok());
        if let Some(p) = num("PART") {
            labels.part = Some(p);
        } else if let Some(s) = num("SEG") {
            labels.segment = Some(s);
        } else if let Some(b) = num("BANK") {
            labels.bank = Some(b);
        }
    }
    if words.len() > 1 {
        let last = words[words.len() - 1];
        if last != "FULL_DATA"
            && !last.starts_with("PART")
            && !last.starts_with("SEG")
            && !last.starts_with("BANK")
        {
            labels.detector = Some(last.to_string());
        }
    }
    labels
}
