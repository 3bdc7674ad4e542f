// SPDX-License-Identifier: Apache-2.0

//! Campaign description files (TOML).
//!
//! ```toml
//! kernel = "matmul24"
//! mode = "tmr"
//! timeout_factor = 4
//! resync_delay = 0
//!
//! [faults.random]
//! count = 1000
//! seed = 42
//! targets = ["gpr", "csr", "interface"]
//! ```
//!
//! Instead of `[faults.random]`, faults can be listed one by one:
//!
//! ```toml
//! [[faults.explicit]]
//! cycle = 1200
//! core = 1
//! target = { gpr = 10 }
//! bit = 3
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FaultSpec, FaultTarget, DEFAULT_TIMEOUT_FACTOR};
use crate::bench::DEFAULT_SEED;
use crate::cluster::CORES;
use crate::cpu::{Csr, Signal};
use crate::firmware::KernelKind;
use crate::odrg::Mode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("campaign config: {0}")]
    Parse(String),
    #[error("campaign config field `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Gpr,
    Csr,
    Pc,
    Interface,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFaults {
    pub count: usize,
    pub seed: u64,
    #[serde(default = "all_targets")]
    pub targets: Vec<TargetKind>,
}

fn all_targets() -> Vec<TargetKind> {
    vec![TargetKind::Gpr, TargetKind::Csr, TargetKind::Pc, TargetKind::Interface]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultSource {
    Random(RandomFaults),
    Explicit(Vec<FaultSpec>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub kernel: KernelKind,
    pub mode: Mode,
    /// Seed of the kernel's input data.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub faults: FaultSource,
    #[serde(default = "default_timeout_factor")]
    pub timeout_factor: u64,
    #[serde(default)]
    pub resync_delay: u32,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_timeout_factor() -> u64 {
    DEFAULT_TIMEOUT_FACTOR
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: CampaignConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.timeout_factor == 0 {
            return Err(ConfigError::Field { field: "timeout_factor", message: "must be at least 1".into() });
        }
        if let FaultSource::Random(r) = &self.faults {
            if r.targets.is_empty() {
                return Err(ConfigError::Field {
                    field: "faults.random.targets",
                    message: "needs at least one target kind".into(),
                });
            }
        }
        Ok(())
    }
}

/// CSRs worth flipping: everything software can write.
fn writable_csrs() -> Vec<Csr> {
    Csr::ALL.into_iter().filter(|c| !c.is_read_only()).collect()
}

/// Draws `spec.count` faults with injection cycles in `[0, golden_cycles)`.
/// `x0` and read-only CSRs are never chosen.
pub fn sample_faults(spec: &RandomFaults, golden_cycles: u64) -> Vec<FaultSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let csrs = writable_csrs();
    (0..spec.count)
        .map(|_| {
            let cycle = rng.gen_range(0..golden_cycles.max(1));
            let core = rng.gen_range(0..CORES);
            let (target, width) = match spec.targets[rng.gen_range(0..spec.targets.len())] {
                TargetKind::Gpr => (FaultTarget::Gpr(rng.gen_range(1..32)), 32),
                TargetKind::Csr => (FaultTarget::Csr(csrs[rng.gen_range(0..csrs.len())].number()), 32),
                TargetKind::Pc => (FaultTarget::Pc, 32),
                TargetKind::Interface => {
                    let signal = Signal::ALL[rng.gen_range(0..Signal::ALL.len())];
                    (FaultTarget::Interface(signal), signal.width())
                }
            };
            FaultSpec { cycle, core, target, bit: rng.gen_range(0..width) }
        })
        .collect()
}
