//! Fault injection for exercising the failure paths.

use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultConfig {
    /// Output files that get one byte flipped after their checksum is
    /// recorded, the first time they are written.
    pub corrupt_once: BTreeSet<String>,
    /// Features a transformation needs at run time without declaring them.
    pub hidden_features: BTreeMap<String, BTreeSet<String>>,
    /// Number of leading attempts of a task that end in a task error.
    pub task_errors: BTreeMap<String, u32>,
}

impl FaultConfig {
    pub fn is_empty(&self) -> bool {
        self.corrupt_once.is_empty()
            && self.hidden_features.is_empty()
            && self.task_errors.is_empty()
    }
}
