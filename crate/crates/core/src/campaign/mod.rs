// SPDX-License-Identifier: Apache-2.0

//! Single-event-upset injection.
//!
//! A campaign first records a fault-free golden run, keeping periodic
//! checkpoints. Each faulted run restarts from the last checkpoint before
//! its injection cycle, flips one bit, and runs to completion. A faulted run
//! whose whole cluster state matches a later golden checkpoint (with no
//! resync involved) cannot diverge any more and is classified immediately.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{Cluster, ClusterError, CycleStatus, Observer, CORES};
use crate::cpu::{Csr, CoreInterface, FlipTarget, Signal};
use crate::firmware::runtime::STACKS_BASE;
use crate::firmware::{gen_kernel, FirmwareError, KernelSpec};
use crate::map;
use crate::odrg::{Mode, GROUP_SIZE};
use crate::program::ProgramImage;

pub mod config;
pub mod report;

pub use config::{CampaignConfig, ConfigError, FaultSource, RandomFaults, TargetKind};
pub use report::{CampaignReport, RunRecord, Summary};

/// Distance between golden checkpoints, in cycles.
pub const CHECKPOINT_INTERVAL: u64 = 2048;
pub const DEFAULT_TIMEOUT_FACTOR: u64 = 4;
/// Upper bound for golden runs.
pub const GOLDEN_CYCLE_LIMIT: u64 = 20_000_000;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("golden run did not finish within {0} cycles")]
    Timeout(u64),
    #[error("invalid fault {fault}: {reason}")]
    InvalidFault { fault: FaultSpec, reason: String },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Firmware(#[from] FirmwareError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultTarget {
    Gpr(u8),
    Pc,
    Csr(u16),
    /// One output wire of the core, between the core and the voter.
    Interface(Signal),
}

impl fmt::Display for FaultTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultTarget::Gpr(i) => write!(f, "x{i}"),
            FaultTarget::Pc => f.write_str("pc"),
            FaultTarget::Csr(n) => match Csr::from_number(*n) {
                Some(csr) => f.write_str(csr.name()),
                None => write!(f, "csr{n:#x}"),
            },
            FaultTarget::Interface(s) => write!(f, "if.{}", s.name()),
        }
    }
}

/// One bit flip: in an architectural register at the start of `cycle`, or on
/// an interface wire during `cycle`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub cycle: u64,
    pub core: usize,
    pub target: FaultTarget,
    pub bit: u8,
}

impl fmt::Display for FaultSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "core {} {}[{}] @{}", self.core, self.target, self.bit, self.cycle)
    }
}

impl FaultSpec {
    pub fn validate(&self, golden_cycles: u64) -> Result<(), CampaignError> {
        let invalid = |reason: String| Err(CampaignError::InvalidFault { fault: *self, reason });
        if self.core >= CORES {
            return invalid(format!("core must be below {CORES}"));
        }
        if self.cycle >= golden_cycles {
            return invalid(format!("cycle must be below the golden run length {golden_cycles}"));
        }
        let width = match self.target {
            FaultTarget::Gpr(i) if !(1..32).contains(&i) => return invalid("gpr must be x1..x31".into()),
            FaultTarget::Csr(n) if Csr::from_number(n).is_none() => {
                return invalid(format!("no CSR {n:#x}"))
            }
            FaultTarget::Interface(s) => s.width(),
            _ => 32,
        };
        if self.bit >= width {
            return invalid(format!("bit must be below {width}"));
        }
        Ok(())
    }

    fn flip_target(&self) -> Option<FlipTarget> {
        match self.target {
            FaultTarget::Gpr(i) => Some(FlipTarget::Gpr(i)),
            FaultTarget::Pc => Some(FlipTarget::Pc),
            FaultTarget::Csr(n) => Some(FlipTarget::Csr(n)),
            FaultTarget::Interface(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    Masked,
    DetectedCorrected,
    SilentDataCorruption,
    Hang,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 4] = [
        OutcomeClass::Masked,
        OutcomeClass::DetectedCorrected,
        OutcomeClass::SilentDataCorruption,
        OutcomeClass::Hang,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OutcomeClass::Masked => "masked",
            OutcomeClass::DetectedCorrected => "detected_corrected",
            OutcomeClass::SilentDataCorruption => "silent_data_corruption",
            OutcomeClass::Hang => "hang",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub class: OutcomeClass,
    /// Length of the first resync episode of the faulted group.
    pub resync_cycles: Option<u64>,
    pub resyncs: u32,
    /// Mismatch counters of the faulted group at the end of the run.
    pub mismatch_counts: [u32; 3],
    pub total_cycles: u64,
    pub exit_code: Option<u32>,
    /// All three cores of the faulted group hold identical architectural
    /// state at the end of the run.
    pub group_agrees: bool,
}

/// Reference execution used to classify faulted runs.
#[derive(Clone, Debug)]
pub struct GoldenRef {
    pub mode: Mode,
    pub exit_code: u32,
    pub total_cycles: u64,
    /// Final TCDM contents outside the stacks.
    pub data: Vec<u32>,
    checkpoints: Vec<Cluster>,
    timeout_factor: u64,
    resync_delay: u32,
}

fn data_words(cluster: &Cluster) -> Vec<u32> {
    let n = ((STACKS_BASE - map::TCDM_BASE) / 4) as usize;
    cluster.tcdm().words()[..n].to_vec()
}

impl GoldenRef {
    pub fn timeout_cycles(&self) -> u64 {
        self.total_cycles.saturating_mul(self.timeout_factor)
    }

    pub fn resync_delay(&self) -> u32 {
        self.resync_delay
    }

    fn checkpoint_before(&self, cycle: u64) -> &Cluster {
        &self.checkpoints[(cycle / CHECKPOINT_INTERVAL) as usize]
    }

    fn checkpoint_at(&self, cycle: u64) -> Option<&Cluster> {
        if cycle % CHECKPOINT_INTERVAL != 0 {
            return None;
        }
        self.checkpoints.get((cycle / CHECKPOINT_INTERVAL) as usize)
    }
}

/// Options shared by golden and faulted runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub timeout_factor: u64,
    pub resync_delay: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { timeout_factor: DEFAULT_TIMEOUT_FACTOR, resync_delay: 0 }
    }
}

fn boot(image: &ProgramImage, mode: Mode, resync_delay: u32) -> Result<Cluster, ClusterError> {
    let mut cluster = Cluster::new();
    for g in 0..cluster_groups() {
        cluster.odrg_mut(g).set_resync_delay(resync_delay);
    }
    cluster.reset_and_boot(mode, image, image.entry)?;
    Ok(cluster)
}

fn cluster_groups() -> usize {
    CORES / GROUP_SIZE
}

pub fn golden_run(image: &ProgramImage, mode: Mode) -> Result<GoldenRef, CampaignError> {
    golden_run_with(image, mode, RunOptions::default())
}

pub fn golden_run_with(
    image: &ProgramImage,
    mode: Mode,
    options: RunOptions,
) -> Result<GoldenRef, CampaignError> {
    let mut cluster = boot(image, mode, options.resync_delay)?;
    let mut checkpoints = Vec::new();
    let exit_code = loop {
        if cluster.cycle_count() >= GOLDEN_CYCLE_LIMIT {
            return Err(CampaignError::Timeout(GOLDEN_CYCLE_LIMIT));
        }
        if cluster.cycle_count() % CHECKPOINT_INTERVAL == 0 {
            checkpoints.push(cluster.clone());
        }
        if let CycleStatus::Halted(code) = cluster.cycle() {
            break code;
        }
    };
    Ok(GoldenRef {
        mode,
        exit_code,
        total_cycles: cluster.cycle_count(),
        data: data_words(&cluster),
        checkpoints,
        timeout_factor: options.timeout_factor.max(1),
        resync_delay: options.resync_delay,
    })
}

struct InterfaceFlip {
    cycle: u64,
    core: usize,
    signal: Signal,
    bit: u8,
}

impl Observer for InterfaceFlip {
    fn core_outputs(&mut self, cycle: u64, outs: &mut [CoreInterface; CORES]) {
        if cycle == self.cycle {
            outs[self.core].flip(self.signal, self.bit);
        }
    }
}

/// Side observations of a faulted run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunTrace {
    /// Instructions started by the other group's leader while the faulted
    /// group was resynchronizing.
    pub other_group_progress: u64,
}

pub fn run_with_fault(golden: &GoldenRef, fault: &FaultSpec) -> Result<Outcome, CampaignError> {
    run_traced(golden, fault).map(|(outcome, _)| outcome)
}

/// Like [`run_with_fault`], also reporting what the other group did.
pub fn run_traced(golden: &GoldenRef, fault: &FaultSpec) -> Result<(Outcome, RunTrace), CampaignError> {
    fault.validate(golden.total_cycles)?;
    let group = fault.core / GROUP_SIZE;
    let other_leader = ((group + 1) % cluster_groups()) * GROUP_SIZE;
    let limit = golden.timeout_cycles();
    let mut cluster = golden.checkpoint_before(fault.cycle).clone();
    while cluster.cycle_count() < fault.cycle {
        cluster.cycle();
    }

    let mut flip = InterfaceFlip { cycle: u64::MAX, core: fault.core, signal: Signal::FetchValid, bit: 0 };
    match (fault.flip_target(), fault.target) {
        (Some(target), _) => {
            cluster.core_mut(fault.core).flip_bit(target, fault.bit).map_err(|e| {
                CampaignError::InvalidFault { fault: *fault, reason: e.to_string() }
            })?;
        }
        (None, FaultTarget::Interface(signal)) => {
            flip = InterfaceFlip { cycle: fault.cycle, core: fault.core, signal, bit: fault.bit };
        }
        (None, _) => unreachable!(),
    }

    let mut trace = RunTrace::default();
    let mut step = |cluster: &mut Cluster, flip: &mut InterfaceFlip| {
        let resyncing = cluster.odrg(group).open_episode().is_some();
        let before = cluster.retired_counts()[other_leader];
        let status = cluster.cycle_with(flip);
        if resyncing {
            trace.other_group_progress += cluster.retired_counts()[other_leader] - before;
        }
        status
    };

    let mut exit_code = None;
    while cluster.cycle_count() < limit {
        if let CycleStatus::Halted(code) = step(&mut cluster, &mut flip) {
            exit_code = Some(code);
            break;
        }
        let quiet = cluster.odrg(group).episodes().is_empty() && cluster.redundancy_settled();
        if quiet && cluster.cycle_count() > fault.cycle {
            if let Some(reference) = golden.checkpoint_at(cluster.cycle_count()) {
                if *reference == cluster {
                    let outcome = Outcome {
                        class: OutcomeClass::Masked,
                        resync_cycles: None,
                        resyncs: 0,
                        mismatch_counts: [0; 3],
                        total_cycles: golden.total_cycles,
                        exit_code: Some(golden.exit_code),
                        group_agrees: true,
                    };
                    return Ok((outcome, trace));
                }
            }
        }
    }
    while exit_code.is_some() && !cluster.redundancy_settled() && cluster.cycle_count() < limit {
        step(&mut cluster, &mut flip);
    }
    let finished = exit_code.is_some() && cluster.redundancy_settled();
    Ok((classify(golden, &cluster, group, exit_code.filter(|_| finished)), trace))
}

/// Classification of a finished (or timed-out) faulted run.
fn classify(golden: &GoldenRef, cluster: &Cluster, group: usize, exit_code: Option<u32>) -> Outcome {
    let unit = cluster.odrg(group);
    let episodes = unit.episodes();
    let snaps = cluster.snapshots();
    let base = group * GROUP_SIZE;
    let group_agrees = match golden.mode {
        Mode::Tmr => snaps[base] == snaps[base + 1] && snaps[base] == snaps[base + 2],
        Mode::Performance => true,
    };
    let detected = !episodes.is_empty();
    let class = match exit_code {
        None => OutcomeClass::Hang,
        Some(code) => {
            let correct = code == golden.exit_code && data_words(cluster) == golden.data;
            match (correct, detected) {
                (true, false) => OutcomeClass::Masked,
                (true, true) => OutcomeClass::DetectedCorrected,
                (false, _) => OutcomeClass::SilentDataCorruption,
            }
        }
    };
    Outcome {
        class,
        resync_cycles: episodes.first().map(|e| e.cycles()),
        resyncs: episodes.len() as u32,
        mismatch_counts: unit.mismatch_counts(),
        total_cycles: cluster.cycle_count(),
        exit_code,
        group_agrees,
    }
}

/// Per-injection resync latencies of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResyncSweep {
    pub runs: Vec<(FaultSpec, Outcome, u64)>,
    pub min: u64,
    pub max: u64,
    pub mean: f64,
}

impl ResyncSweep {
    pub fn spread(&self) -> u64 {
        self.max - self.min
    }

    pub fn all_corrected(&self) -> bool {
        self.runs.iter().all(|(_, o, _)| o.class == OutcomeClass::DetectedCorrected)
    }

    /// The other group kept executing during every resync episode.
    pub fn other_group_progressed(&self) -> bool {
        self.runs.iter().all(|(_, _, progress)| *progress > 0)
    }
}

/// Injects `template` (with its cycle replaced) at each of `cycles` and
/// collects the resync latencies.
pub fn measure_resync(
    golden: &GoldenRef,
    template: FaultSpec,
    cycles: &[u64],
) -> Result<ResyncSweep, CampaignError> {
    let mut runs = Vec::with_capacity(cycles.len());
    for &cycle in cycles {
        let fault = FaultSpec { cycle, ..template };
        let (outcome, trace) = run_traced(golden, &fault)?;
        runs.push((fault, outcome, trace.other_group_progress));
    }
    let latencies: Vec<u64> = runs.iter().filter_map(|(_, o, _)| o.resync_cycles).collect();
    let (min, max) = match (latencies.iter().min(), latencies.iter().max()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => (0, 0),
    };
    let mean = if latencies.is_empty() {
        0.0
    } else {
        latencies.iter().sum::<u64>() as f64 / latencies.len() as f64
    };
    Ok(ResyncSweep { runs, min, max, mean })
}

/// `count` injection cycles spread evenly over `[first, last]`.
pub fn spread_cycles(first: u64, last: u64, count: usize) -> Vec<u64> {
    match count {
        0 => Vec::new(),
        1 => vec![first],
        n => (0..n as u64).map(|i| first + i * (last - first) / (n as u64 - 1)).collect(),
    }
}

/// Runs a campaign described by `config` against its kernel.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignReport, CampaignError> {
    use rayon::prelude::*;

    config.validate()?;
    let spec = KernelSpec::for_mode(config.kernel, config.mode, config.seed);
    let image = gen_kernel(&spec)?;
    let options = RunOptions { timeout_factor: config.timeout_factor, resync_delay: config.resync_delay };
    let golden = golden_run_with(&image, config.mode, options)?;
    let faults = match &config.faults {
        FaultSource::Random(random) => config::sample_faults(random, golden.total_cycles),
        FaultSource::Explicit(list) => list.clone(),
    };
    for fault in &faults {
        fault.validate(golden.total_cycles)?;
    }
    let outcomes = faults
        .par_iter()
        .map(|fault| run_with_fault(&golden, fault))
        .collect::<Result<Vec<_>, _>>()?;
    let records = faults
        .into_iter()
        .zip(outcomes)
        .enumerate()
        .map(|(index, (fault, outcome))| RunRecord { index, fault, outcome })
        .collect();
    Ok(CampaignReport::new(config.kernel, config.mode, golden.total_cycles, records))
}
