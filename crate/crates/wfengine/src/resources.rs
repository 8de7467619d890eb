//! Execution nodes, matchmaking and retry escalation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::provenance::FailureReason;

/// `NODE <id> mem=<mb> features=<a,b> speed=<f>`
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: String,
    pub mem_mb: u64,
    pub features: BTreeSet<String>,
    /// Runtime multiplier.
    pub speed_factor: f64,
}

impl NodeSpec {
    pub fn new(id: impl Into<String>, mem_mb: u64, features: &[&str], speed_factor: f64) -> Self {
        NodeSpec {
            id: id.into(),
            mem_mb,
            features: features.iter().map(|s| s.to_string()).collect(),
            speed_factor,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.mem_mb == 0 {
            return Err(format!("node {} has no memory", self.id));
        }
        if !(self.speed_factor > 0.0) || !self.speed_factor.is_finite() {
            return Err(format!("node {} speed must be positive", self.id));
        }
        Ok(())
    }
}

pub fn nodes_to_text(nodes: &[NodeSpec]) -> String {
    let mut out = String::new();
    for n in nodes {
        let features: Vec<&str> = n.features.iter().map(String::as_str).collect();
        let features = if features.is_empty() {
            "-".to_string()
        } else {
            features.join(",")
        };
        let _ = writeln!(
            out,
            "NODE {} mem={} features={} speed={}",
            n.id, n.mem_mb, features, n.speed_factor
        );
    }
    out
}

pub fn parse_nodes(text: &str) -> Result<Vec<NodeSpec>> {
    let mut nodes: Vec<NodeSpec> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |detail: String| Error::Parse {
            what: "node pool",
            line: n + 1,
            detail,
        };
        let mut words = line.split_whitespace();
        if words.next() != Some("NODE") {
            return Err(bad("expected NODE".into()));
        }
        let id = words.next().ok_or_else(|| bad("missing node id".into()))?;
        let (mut mem, mut speed, mut features) = (None, None, BTreeSet::new());
        for w in words {
            match w.split_once('=') {
                Some(("mem", v)) => {
                    mem = Some(v.parse::<u64>().map_err(|e| bad(format!("mem: {e}")))?)
                }
                Some(("speed", v)) => {
                    speed = Some(v.parse::<f64>().map_err(|e| bad(format!("speed: {e}")))?)
                }
                Some(("features", v)) => {
                    features = v
                        .split(',')
                        .filter(|f| !f.is_empty() && *f != "-")
                        .map(str::to_string)
                        .collect()
                }
                _ => return Err(bad(format!("unexpected {w:?}"))),
            }
        }
        let node = NodeSpec {
            id: id.to_string(),
            mem_mb: mem.ok_or_else(|| bad("missing mem=".into()))?,
            features,
            speed_factor: speed.unwrap_or(1.0),
        };
        node.validate().map_err(bad)?;
        if nodes.iter().any(|m| m.id == node.id) {
            return Err(bad(format!("duplicate node id {}", node.id)));
        }
        nodes.push(node);
    }
    Ok(nodes)
}

/// What a task attempt asks of a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Requirements {
    pub mem_mb: u64,
    pub features: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeLoad {
    pub running: usize,
    pub used_mem_mb: u64,
}

impl Requirements {
    /// Whether some node could ever host this request.
    pub fn satisfiable(&self, nodes: &[NodeSpec]) -> bool {
        nodes
            .iter()
            .any(|n| n.mem_mb >= self.mem_mb && self.features.is_subset(&n.features))
    }
}

/// Eligible nodes have every required feature and enough free memory; the
/// least loaded wins, then the lowest id. `None` means the task waits.
pub fn matchmake(req: &Requirements, nodes: &[NodeSpec], occupancy: &[NodeLoad]) -> Option<usize> {
    nodes
        .iter()
        .zip(occupancy)
        .enumerate()
        .filter(|(_, (n, load))| {
            req.features.is_subset(&n.features)
                && n.mem_mb.saturating_sub(load.used_mem_mb) >= req.mem_mb
        })
        .min_by(|(_, (a, la)), (_, (b, lb))| {
            la.running.cmp(&lb.running).then_with(|| a.id.cmp(&b.id))
        })
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    /// Memory multiplier after an eviction.
    pub escalation_factor: f64,
    /// Retries after the first attempt, unless the task sets its own.
    pub max_retries: u32,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            escalation_factor: 2.0,
            max_retries: 5,
        }
    }
}

/// Requirements for the next attempt after a failure.
pub fn escalate(
    policy: &Policy,
    last: &Requirements,
    reason: FailureReason,
    missing_features: &[String],
) -> Requirements {
    let mut next = last.clone();
    match reason {
        FailureReason::MemoryEviction => {
            next.mem_mb = ((last.mem_mb as f64) * policy.escalation_factor).ceil() as u64;
        }
        FailureReason::IncompatibleNode => {
            next.features.extend(missing_features.iter().cloned());
        }
        _ => {}
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(mem: u64, features: &[&str]) -> Requirements {
        Requirements {
            mem_mb: mem,
            features: features.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn matchmaking_rules() {
        let lacking = [NodeSpec::new("n0", 64_000, &["sse4"], 1.0)];
        assert_eq!(
            matchmake(&req(1000, &["fma4"]), &lacking, &[NodeLoad::default()]),
            None
        );

        let two = [
            NodeSpec::new("b", 64_000, &["fma4"], 1.0),
            NodeSpec::new("a", 64_000, &["fma4"], 1.0),
        ];
        let idle = [NodeLoad::default(); 2];
        assert_eq!(
            matchmake(&req(1000, &["fma4"]), &two, &idle),
            Some(1),
            "lower id wins a tie"
        );
        let busy = [
            NodeLoad::default(),
            NodeLoad {
                running: 1,
                used_mem_mb: 1000,
            },
        ];
        assert_eq!(
            matchmake(&req(1000, &[]), &two, &busy),
            Some(0),
            "least loaded first"
        );

        let pool = [
            NodeSpec::new("n0", 64_000, &[], 1.0),
            NodeSpec::new("n1", 64_000, &[], 1.0),
        ];
        assert_eq!(
            matchmake(&req(130_000, &[]), &pool, &[NodeLoad::default(); 2]),
            None
        );
        assert!(!req(130_000, &[]).satisfiable(&pool));
    }

    #[test]
    fn escalation_rules() {
        let p = Policy::default();
        let r = req(2048, &[]);
        assert_eq!(
            escalate(&p, &r, FailureReason::MemoryEviction, &[]).mem_mb,
            4096
        );
        let e = escalate(
            &p,
            &r,
            FailureReason::IncompatibleNode,
            &["fma4".to_string()],
        );
        assert_eq!(e, req(2048, &["fma4"]));
        assert_eq!(escalate(&p, &r, FailureReason::TaskError, &[]), r);
        assert_eq!(escalate(&p, &r, FailureReason::IntegrityError, &[]), r);
    }

    #[test]
    fn node_file_round_trip() {
        let nodes = vec![
            NodeSpec::new("n0", 16384, &["fma4", "avx"], 1.5),
            NodeSpec::new("n1", 8192, &[], 1.0),
        ];
        let text = nodes_to_text(&nodes);
        assert_eq!(
            text,
            "NODE n0 mem=16384 features=avx,fma4 speed=1.5\nNODE n1 mem=8192 features=- speed=1\n"
        );
        assert_eq!(parse_nodes(&text).unwrap(), nodes);
        assert!(parse_nodes("NODE x mem=0").is_err());
        assert!(parse_nodes("NODE x mem=1 speed=-1").is_err());
    }
}
