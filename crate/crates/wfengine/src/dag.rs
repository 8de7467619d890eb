//! Task graph and its line-oriented text form:
//!
//! ```text
//! TASK <id> <transformation> mem=<mb> features=<a,b> parents=<id,id> in=<paths> out=<paths>
//! ```
//!
//! Empty lists are written as `-`. An optional trailing `retries=<n>`
//! overrides the policy's retry limit for that task.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub id: String,
    pub transformation: String,
    pub parents: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub request_mem_mb: u64,
    pub required_features: BTreeSet<String>,
    pub max_retries: Option<u32>,
}

impl TaskSpec {
    pub fn new(
        id: impl Into<String>,
        transformation: impl Into<String>,
        request_mem_mb: u64,
    ) -> Self {
        TaskSpec {
            id: id.into(),
            transformation: transformation.into(),
            parents: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            request_mem_mb,
            required_features: BTreeSet::new(),
            max_retries: None,
        }
    }
}

/// Tasks in planning order. Indices into `tasks` are the engine's task handles.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dag {
    pub tasks: Vec<TaskSpec>,
}

fn list(items: impl IntoIterator<Item = impl AsRef<str>>) -> String {
    let joined: Vec<String> = items.into_iter().map(|s| s.as_ref().to_string()).collect();
    if joined.is_empty() {
        "-".into()
    } else {
        joined.join(",")
    }
}

fn parse_list(v: &str) -> Vec<String> {
    if v == "-" || v.is_empty() {
        Vec::new()
    } else {
        v.split(',').map(str::to_string).collect()
    }
}

impl Dag {
    pub fn new(tasks: Vec<TaskSpec>) -> Self {
        Dag { tasks }
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    /// Checks ids, parent links, acyclicity and that every input is either
    /// an initial file or an output of one of the task's parents.
    pub fn validate(&self, initial_files: &BTreeSet<String>) -> Result<()> {
        let mut index = BTreeMap::new();
        for (i, t) in self.tasks.iter().enumerate() {
            if t.id.is_empty() || t.id.contains(char::is_whitespace) {
                return Err(Error::InvalidDag(format!("bad task id {:?}", t.id)));
            }
            if index.insert(t.id.as_str(), i).is_some() {
                return Err(Error::InvalidDag(format!("duplicate task id {}", t.id)));
            }
        }
        let mut producer: BTreeMap<&str, &str> = BTreeMap::new();
        for t in &self.tasks {
            for o in &t.outputs {
                if initial_files.contains(o) {
                    return Err(Error::InvalidDag(format!(
                        "{} overwrites initial file {o}",
                        t.id
                    )));
                }
                if let Some(other) = producer.insert(o, &t.id) {
                    return Err(Error::InvalidDag(format!(
                        "{o} is produced by both {other} and {}",
                        t.id
                    )));
                }
            }
        }
        for t in &self.tasks {
            for p in &t.parents {
                if !index.contains_key(p.as_str()) {
                    return Err(Error::InvalidDag(format!(
                        "{} names unknown parent {p}",
                        t.id
                    )));
                }
            }
            for input in &t.inputs {
                if initial_files.contains(input) {
                    continue;
                }
                match producer.get(input.as_str()) {
                    Some(p) if t.parents.iter().any(|q| q == p) => {}
                    Some(p) => {
                        return Err(Error::InvalidDag(format!(
                            "{} reads {input} from {p}, which is not a parent",
                            t.id
                        )))
                    }
                    None => {
                        return Err(Error::InvalidDag(format!(
                            "{} reads {input}, which nothing provides",
                            t.id
                        )))
                    }
                }
            }
        }
        self.topological_order().map(|_| ())
    }

    /// Kahn's algorithm, smallest planning index first among ready tasks.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.tasks.len();
        let index: BTreeMap<&str, usize> = self
            .tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.as_str(), i))
            .collect();
        let mut indegree = vec![0usize; n];
        let mut children = vec![Vec::new(); n];
        for (i, t) in self.tasks.iter().enumerate() {
            for p in &t.parents {
                let &pi = index
                    .get(p.as_str())
                    .ok_or_else(|| Error::InvalidDag(format!("unknown parent {p}")))?;
                indegree[i] += 1;
                children[pi].push(i);
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap();
            return Err(Error::Cycle(self.tasks[stuck].id.clone()));
        }
        Ok(order)
    }

    /// Child indices of every task.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let index: BTreeMap<&str, usize> = self
            .tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.as_str(), i))
            .collect();
        let mut out = vec![Vec::new(); self.tasks.len()];
        for (i, t) in self.tasks.iter().enumerate() {
            for p in &t.parents {
                if let Some(&pi) = index.get(p.as_str()) {
                    out[pi].push(i);
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tasks {
            let _ = write!(
                out,
                "TASK {} {} mem={} features={} parents={} in={} out={}",
                t.id,
                t.transformation,
                t.request_mem_mb,
                list(&t.required_features),
                list(&t.parents),
                list(&t.inputs),
                list(&t.outputs)
            );
            if let Some(r) = t.max_retries {
                let _ = write!(out, " retries={r}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tasks = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |detail: String| Error::Parse {
                what: "DAG",
                line: n + 1,
                detail,
            };
            let mut words = line.split_whitespace();
            if words.next() != Some("TASK") {
                return Err(bad("expected TASK".into()));
            }
            let id = words.next().ok_or_else(|| bad("missing task id".into()))?;
            let transformation = words
                .next()
                .ok_or_else(|| bad("missing transformation".into()))?;
            let mut task = TaskSpec::new(id, transformation, 0);
            let mut seen = BTreeSet::new();
            for w in words {
                let (k, v) = w
                    .split_once('=')
                    .ok_or_else(|| bad(format!("expected key=value, got {w:?}")))?;
                if !seen.insert(k) {
                    return Err(bad(format!("repeated key {k}")));
                }
                match k {
                    "mem" => {
                        task.request_mem_mb = v.parse().map_err(|e| bad(format!("mem: {e}")))?
                    }
                    "features" => task.required_features = parse_list(v).into_iter().collect(),
                    "parents" => task.parents = parse_list(v),
                    "in" => task.inputs = parse_list(v),
                    "out" => task.outputs = parse_list(v),
                    "retries" => {
                        task.max_retries =
                            Some(v.parse().map_err(|e| bad(format!("retries: {e}")))?)
                    }
                    _ => return Err(bad(format!("unknown key {k}"))),
                }
            }
            if !seen.contains("mem") {
                return Err(bad("missing mem=".into()));
            }
            tasks.push(task);
        }
        Ok(Dag { tasks })
    }
}
