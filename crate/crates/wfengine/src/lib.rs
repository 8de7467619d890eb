//! Workflow planning and simulated execution: a DAG of pipeline stages run
//! against a pool of heterogeneous nodes with memory eviction, retries with
//! escalation, checksum verification and per-attempt provenance.

pub mod dag;
pub mod engine;
pub mod error;
pub mod faults;
pub mod memory;
pub mod plan;
pub mod provenance;
pub mod report;
pub mod resources;

pub use dag::{Dag, TaskSpec};
pub use engine::{
    execute, ExecConfig, Execution, FileStore, StageOutput, StageRunner, StoredFile, TaskState,
};
pub use error::{Error, Result};
pub use faults::FaultConfig;
pub use memory::MemoryModel;
pub use plan::{parse_labels, plan, PlanConfig, StageLabels, StageRequests};
pub use provenance::{log_from_text, log_to_text, AttemptRecord, FailureReason, Status};
pub use report::{
    format_duration, render_transformations, summarize_transformations, RunReport, SortBy,
    TaskCounts, TransformationSummary,
};
pub use resources::{
    escalate, matchmake, nodes_to_text, parse_nodes, NodeLoad, NodeSpec, Policy, Requirements,
};
