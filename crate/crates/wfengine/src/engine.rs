//! Discrete-event execution of a DAG on a simulated node pool.
//!
//! Stage computations are real and run in-process; what a node grants
//! (memory, features) and how long an attempt takes are simulated on a
//! virtual clock, so a run is reproducible from its seed.
//!
//! Each attempt goes through, in order: checksum comparison of every input,
//! the hidden-feature check, the stage computation, the memory check, any
//! injected task error, and finally checksum generation for the outputs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dag::{Dag, TaskSpec};
use crate::error::{Error, Result};
use crate::faults::FaultConfig;
use crate::memory::MemoryModel;
use crate::provenance::{AttemptRecord, FailureReason, Status};
use crate::report::RunReport;
use crate::resources::{escalate, matchmake, NodeLoad, NodeSpec, Policy, Requirements};

/// Virtual duration of an attempt that dies before doing any work.
pub const FAIL_FAST_S: f64 = 1.0;

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub files: BTreeMap<String, Vec<u8>>,
    /// Runtime on a node with speed factor 1, in virtual seconds.
    pub nominal_cost_s: f64,
}

/// The science behind each transformation. Must be a pure function of the
/// task and its inputs.
pub trait StageRunner: Sync {
    fn run(
        &self,
        task: &TaskSpec,
        inputs: &BTreeMap<String, Arc<Vec<u8>>>,
    ) -> std::result::Result<StageOutput, String>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredFile {
    pub data: Arc<Vec<u8>>,
    /// Recorded when the file was written.
    pub checksum: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileStore {
    files: BTreeMap<String, StoredFile>,
}

impl FileStore {
    pub fn new() -> Self {
        FileStore::default()
    }

    /// Stores `data` and returns its recorded checksum.
    pub fn insert(&mut self, path: impl Into<String>, data: Vec<u8>) -> String {
        let checksum = sha256_hex(&data);
        self.files.insert(
            path.into(),
            StoredFile {
                data: Arc::new(data),
                checksum: checksum.clone(),
            },
        );
        checksum
    }

    pub fn get(&self, path: &str) -> Option<&StoredFile> {
        self.files.get(path)
    }

    pub fn bytes(&self, path: &str) -> Option<&[u8]> {
        self.files.get(path).map(|f| f.data.as_slice())
    }

    pub fn contains(&self, path: &str) -> bool {
        self.files.contains_key(path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn remove(&mut self, path: &str) -> Option<StoredFile> {
        self.files.remove(path)
    }

    /// Whether the content still matches the recorded checksum.
    pub fn verify(&self, path: &str) -> Option<bool> {
        self.files
            .get(path)
            .map(|f| sha256_hex(&f.data) == f.checksum)
    }

    /// Flips one byte without touching the recorded checksum.
    pub fn corrupt(&mut self, path: &str) -> bool {
        match self.files.get_mut(path) {
            Some(f) if !f.data.is_empty() => {
                let data = Arc::make_mut(&mut f.data);
                let mid = data.len() / 2;
                data[mid] ^= 0xff;
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExecConfig {
    pub seed: u64,
    /// Threads for stage computations. Does not affect results.
    pub workers: usize,
    pub memory: MemoryModel,
    pub faults: FaultConfig,
    /// Virtual checksum throughput.
    pub checksum_bytes_per_s: f64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            seed: 0,
            workers: 1,
            memory: MemoryModel::default(),
            faults: FaultConfig::default(),
            checksum_bytes_per_s: 500e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskState {
    Succeeded,
    /// Attempted but never succeeded.
    Failed,
    /// Never attempted.
    Incomplete,
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub report: RunReport,
    pub log: Vec<AttemptRecord>,
    pub store: FileStore,
    pub states: Vec<TaskState>,
    /// Tasks whose requirements no node can ever meet.
    pub held: Vec<String>,
    pub diagnostics: Vec<String>,
}

impl Execution {
    pub fn all_succeeded(&self) -> bool {
        self.states.iter().all(|s| *s == TaskState::Succeeded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Pending,
    Running,
    Succeeded,
    Failed,
    Held,
}

struct Track {
    phase: Phase,
    attempts: u32,
    /// Counted against the retry limit. A re-run forced by a consumer's
    /// integrity error is not a failure of the producer.
    failures: u32,
    req: Requirements,
    need_mb: Option<u64>,
}

type StageResult = Arc<std::result::Result<StageOutput, String>>;

struct Completion {
    end: f64,
    seq: u64,
    task: usize,
    node: usize,
    record: AttemptRecord,
    outputs: Option<StageResult>,
    missing_features: Vec<String>,
}

/// An attempt between dispatch and the parallel stage computation.
struct Launch {
    task: usize,
    node: usize,
    start: f64,
    compared: u32,
    compare_s: f64,
    integrity_errors: u32,
    missing_features: Vec<String>,
    inputs: BTreeMap<String, Arc<Vec<u8>>>,
    cache_key: Vec<String>,
    stage: Option<StageResult>,
}

pub fn execute(
    dag: &Dag,
    nodes: &[NodeSpec],
    policy: &Policy,
    runner: &dyn StageRunner,
    config: &ExecConfig,
    mut store: FileStore,
) -> Result<Execution> {
    let initial: BTreeSet<String> = store.paths().map(str::to_string).collect();
    dag.validate(&initial)?;
    if config.workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    if !(config.checksum_bytes_per_s > 0.0) {
        return Err(Error::Config("checksum rate must be positive".into()));
    }
    if !(policy.escalation_factor >= 1.0) {
        return Err(Error::Config("escalation factor must be at least 1".into()));
    }
    config.memory.validate()?;
    if nodes.is_empty() && !dag.is_empty() {
        return Err(Error::NoNodes);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::WorkerPool(e.to_string()))?;

    let n = dag.len();
    let index: HashMap<&str, usize> = dag
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id.as_str(), i))
        .collect();
    let parents: Vec<Vec<usize>> = dag
        .tasks
        .iter()
        .map(|t| t.parents.iter().map(|p| index[p.as_str()]).collect())
        .collect();
    let producer: HashMap<&str, usize> = dag
        .tasks
        .iter()
        .enumerate()
        .flat_map(|(i, t)| t.outputs.iter().map(move |o| (o.as_str(), i)))
        .collect();
    let mut tracks: Vec<Track> = dag
        .tasks
        .iter()
        .map(|t| Track {
            phase: Phase::Pending,
            attempts: 0,
            failures: 0,
            req: Requirements {
                mem_mb: t.request_mem_mb,
                features: t.required_features.clone(),
            },
            need_mb: None,
        })
        .collect();

    let mut load = vec![NodeLoad::default(); nodes.len()];
    let mut cache: HashMap<(usize, Vec<String>), StageResult> = HashMap::new();
    let mut corrupted: BTreeSet<String> = BTreeSet::new();
    let mut running: Vec<Completion> = Vec::new();
    let mut log = Vec::new();
    let mut held = Vec::new();
    let mut diagnostics = Vec::new();
    let (mut now, mut seq) = (0.0f64, 0u64);
    let rate = config.checksum_bytes_per_s;

    loop {
        let mut launches = Vec::new();
        for i in 0..n {
            if tracks[i].phase != Phase::Pending
                || !parents[i]
                    .iter()
                    .all(|&p| tracks[p].phase == Phase::Succeeded)
            {
                continue;
            }
            let task = &dag.tasks[i];
            if !tracks[i].req.satisfiable(nodes) {
                tracks[i].phase = Phase::Held;
                held.push(task.id.clone());
                let features: Vec<&str> =
                    tracks[i].req.features.iter().map(String::as_str).collect();
                diagnostics.push(format!(
                    "{}: no compatible resource (mem {} MB, features [{}])",
                    task.id,
                    tracks[i].req.mem_mb,
                    features.join(",")
                ));
                continue;
            }
            let Some(k) = matchmake(&tracks[i].req, nodes, &load) else {
                continue;
            };
            load[k].running += 1;
            load[k].used_mem_mb += tracks[i].req.mem_mb;
            tracks[i].phase = Phase::Running;
            tracks[i].attempts += 1;

            // Every input is compared against the checksum recorded when it was written.
            let (mut bytes, mut mismatched) = (0u64, Vec::new());
            let mut inputs = BTreeMap::new();
            let mut cache_key = Vec::new();
            for path in &task.inputs {
                let f = store.get(path).expect("inputs of a ready task are present");
                bytes += f.data.len() as u64;
                if sha256_hex(&f.data) != f.checksum {
                    mismatched.push(path.clone());
                }
                inputs.insert(path.clone(), Arc::clone(&f.data));
                cache_key.push(f.checksum.clone());
            }
            if tracks[i].need_mb.is_none() {
                tracks[i].need_mb = Some(config.memory.need_mb(
                    &task.id,
                    &task.transformation,
                    bytes,
                    config.seed,
                ));
            }
            // A bad file is discarded and its producer runs again before any
            // other consumer can read it.
            for path in &mismatched {
                store.remove(path);
                if let Some(&p) = producer.get(path.as_str()) {
                    if tracks[p].phase == Phase::Succeeded {
                        tracks[p].phase = Phase::Pending;
                    }
                }
            }
            let missing_features: Vec<String> = config
                .faults
                .hidden_features
                .get(&task.transformation)
                .map(|need| need.difference(&nodes[k].features).cloned().collect())
                .unwrap_or_default();
            launches.push(Launch {
                task: i,
                node: k,
                start: now,
                compared: task.inputs.len() as u32,
                compare_s: bytes as f64 / rate,
                integrity_errors: mismatched.len() as u32,
                missing_features,
                inputs,
                cache_key,
                stage: None,
            });
        }

        // Stage computations for this batch, in parallel. Results are cached
        // per (task, input checksums), so retries do not recompute.
        let wanted: Vec<usize> = launches
            .iter()
            .enumerate()
            .filter(|(_, l)| l.integrity_errors == 0 && l.missing_features.is_empty())
            .map(|(j, _)| j)
            .collect();
        let todo: Vec<usize> = wanted
            .iter()
            .copied()
            .filter(|&j| !cache.contains_key(&(launches[j].task, launches[j].cache_key.clone())))
            .collect();
        let computed: Vec<StageResult> = pool.install(|| {
            todo.par_iter()
                .map(|&j| {
                    let l = &launches[j];
                    let task = &dag.tasks[l.task];
                    let result = runner
                        .run(task, &l.inputs)
                        .and_then(|out| check_outputs(task, out));
                    Arc::new(result)
                })
                .collect()
        });
        for (&j, result) in todo.iter().zip(computed) {
            cache.insert((launches[j].task, launches[j].cache_key.clone()), result);
        }
        for &j in &wanted {
            let key = (launches[j].task, launches[j].cache_key.clone());
            launches[j].stage = Some(Arc::clone(&cache[&key]));
        }

        for l in launches {
            let task = &dag.tasks[l.task];
            let track = &tracks[l.task];
            let granted = track.req.mem_mb;
            let need = track.need_mb.expect("set at dispatch");
            let speed = nodes[l.node].speed_factor;
            let mut record = AttemptRecord {
                task_id: task.id.clone(),
                transformation: task.transformation.clone(),
                attempt_no: track.attempts,
                node_id: nodes[l.node].id.clone(),
                start_s: l.start,
                duration_s: l.compare_s,
                request_mem_mb: granted,
                peak_mem_mb: 0,
                status: Status::Failed,
                failure_reason: FailureReason::None,
                checksums_compared: l.compared,
                checksum_compare_s: l.compare_s,
                checksums_generated: 0,
                checksum_generate_s: 0.0,
                integrity_errors: l.integrity_errors,
            };
            let injected = config
                .faults
                .task_errors
                .get(&task.id)
                .copied()
                .unwrap_or(0);
            let mut outputs = None;
            if l.integrity_errors > 0 {
                record.failure_reason = FailureReason::IntegrityError;
            } else if !l.missing_features.is_empty() {
                record.failure_reason = FailureReason::IncompatibleNode;
                record.duration_s += FAIL_FAST_S;
            } else {
                let stage = l.stage.as_ref().expect("stage computed for this attempt");
                match stage.as_ref() {
                    Err(_) => {
                        record.failure_reason = FailureReason::TaskError;
                        record.duration_s += FAIL_FAST_S;
                    }
                    Ok(out) => {
                        let run_s = out.nominal_cost_s * speed;
                        if need > granted {
                            record.failure_reason = FailureReason::MemoryEviction;
                            record.duration_s += run_s * granted as f64 / need as f64;
                            record.peak_mem_mb = granted;
                        } else if track.attempts <= injected {
                            record.failure_reason = FailureReason::TaskError;
                            record.duration_s += run_s;
                            record.peak_mem_mb = need;
                        } else {
                            let generated: u64 = out.files.values().map(|d| d.len() as u64).sum();
                            record.status = Status::Success;
                            record.peak_mem_mb = need;
                            record.checksums_generated = out.files.len() as u32;
                            record.checksum_generate_s = generated as f64 / rate;
                            record.duration_s += run_s + record.checksum_generate_s;
                            outputs = Some(Arc::clone(stage));
                        }
                    }
                }
            }
            if let Some(Err(msg)) = l.stage.as_ref().map(|s| s.as_ref().as_ref()) {
                diagnostics.push(format!("{} attempt {}: {msg}", task.id, track.attempts));
            }
            running.push(Completion {
                end: record.end_s(),
                seq,
                task: l.task,
                node: l.node,
                record,
                outputs,
                missing_features: l.missing_features,
            });
            seq += 1;
        }

        if running.is_empty() {
            break;
        }
        now = running.iter().map(|c| c.end).fold(f64::INFINITY, f64::min);
        let (mut done, rest): (Vec<Completion>, Vec<Completion>) =
            running.drain(..).partition(|c| c.end <= now);
        running = rest;
        done.sort_by_key(|c| c.seq);
        for c in done {
            let i = c.task;
            load[c.node].running -= 1;
            load[c.node].used_mem_mb -= c.record.request_mem_mb;
            match c.outputs {
                Some(result) => {
                    let out = result.as_ref().as_ref().expect("successful stage");
                    for (path, data) in &out.files {
                        store.insert(path.clone(), data.clone());
                        if config.faults.corrupt_once.contains(path)
                            && corrupted.insert(path.clone())
                        {
                            store.corrupt(path);
                        }
                    }
                    tracks[i].phase = Phase::Succeeded;
                }
                None => {
                    let limit = dag.tasks[i].max_retries.unwrap_or(policy.max_retries);
                    tracks[i].failures += 1;
                    if tracks[i].failures > limit {
                        tracks[i].phase = Phase::Failed;
                        diagnostics.push(format!(
                            "{}: giving up after {} attempts ({})",
                            dag.tasks[i].id, tracks[i].attempts, c.record.failure_reason
                        ));
                    } else {
                        tracks[i].req = escalate(
                            policy,
                            &tracks[i].req,
                            c.record.failure_reason,
                            &c.missing_features,
                        );
                        tracks[i].phase = Phase::Pending;
                    }
                }
            }
            log.push(c.record);
        }
    }

    let states = tracks
        .iter()
        .map(|t| match t.phase {
            Phase::Succeeded => TaskState::Succeeded,
            _ if t.attempts > 0 => TaskState::Failed,
            _ => TaskState::Incomplete,
        })
        .collect();
    let report = RunReport::from_log(&log, n);
    Ok(Execution {
        report,
        log,
        store,
        states,
        held,
        diagnostics,
    })
}

fn check_outputs(task: &TaskSpec, out: StageOutput) -> std::result::Result<StageOutput, String> {
    let declared: BTreeSet<&str> = task.outputs.iter().map(String::as_str).collect();
    let produced: BTreeSet<&str> = out.files.keys().map(String::as_str).collect();
    if declared != produced {
        return Err(format!("produced {produced:?}, declared {declared:?}"));
    }
    if !(out.nominal_cost_s >= 0.0) || !out.nominal_cost_s.is_finite() {
        return Err(format!("invalid nominal cost {}", out.nominal_cost_s));
    }
    Ok(out)
}
