//! Simulated true memory need of a task.
//!
//! need = base(transformation) × (1 + input_MB / 1024) × lognormal(0, σ),
//! with the lognormal draw seeded from the run seed and the task id, so a
//! task needs the same amount on every attempt.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryModel {
    pub base_mb: BTreeMap<String, f64>,
    /// Used for transformations missing from `base_mb`.
    pub default_base_mb: f64,
    pub sigma_ln: f64,
    /// Fixed need per task id, bypassing the model.
    pub overrides: BTreeMap<String, u64>,
}

impl Default for MemoryModel {
    fn default() -> Self {
        let base_mb = [
            ("calculate_psd", 600.0),
            ("inspiral", 1800.0),
            ("hdf_trigger_merge", 400.0),
            ("statmap", 1200.0),
            ("distribute_background_bins", 800.0),
            ("plot_snrifar", 300.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        MemoryModel {
            base_mb,
            default_base_mb: 500.0,
            sigma_ln: 0.3,
            overrides: BTreeMap::new(),
        }
    }
}

/// Per-task seed that does not depend on std's hasher.
fn task_seed(seed: u64, task_id: &str) -> u64 {
    let digest = Sha256::digest(task_id.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(b)
}

impl MemoryModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_ln >= 0.0) || !self.sigma_ln.is_finite() {
            return Err(Error::Config(
                "memory sigma must be finite and non-negative".into(),
            ));
        }
        if self
            .base_mb
            .values()
            .chain([&self.default_base_mb])
            .any(|b| !(*b > 0.0) || !b.is_finite())
        {
            return Err(Error::Config("memory bases must be positive".into()));
        }
        Ok(())
    }

    pub fn need_mb(&self, task_id: &str, transformation: &str, input_bytes: u64, seed: u64) -> u64 {
        if let Some(&fixed) = self.overrides.get(task_id) {
            return fixed;
        }
        let base = self
            .base_mb
            .get(transformation)
            .copied()
            .unwrap_or(self.default_base_mb);
        let size = 1.0 + input_bytes as f64 / (1024.0 * 1024.0) / 1024.0;
        let jitter = if self.sigma_ln > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(task_seed(seed, task_id));
            LogNormal::new(0.0, self.sigma_ln)
                .expect("sigma checked")
                .sample(&mut rng)
        } else {
            1.0
        };
        (base * size * jitter).ceil().max(1.0) as u64
    }
}
