// SPDX-License-Identifier: Apache-2.0

//! Cycle counts of the benchmark kernels in both modes.

use std::fmt::Write;

use serde::Serialize;
use thiserror::Error;

use crate::cluster::{Cluster, ClusterError};
use crate::firmware::{gen_kernel, FirmwareError, KernelKind, KernelSpec};
use crate::odrg::Mode;
use crate::program::ProgramImage;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MAX_CYCLES: u64 = 5_000_000;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Firmware(#[from] FirmwareError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("{kind} in {mode} mode did not finish within {cycles} cycles")]
    Timeout { kind: KernelKind, mode: &'static str, cycles: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KernelRun {
    pub cycles: u64,
    pub exit_code: u32,
    /// Modeled cost of reconfiguring and rebooting into this image.
    pub reboot_cycles: u64,
    /// Final contents of the kernel's output region.
    pub output: Vec<u32>,
}

/// Output region words of `image` in `cluster`'s TCDM.
pub fn output_region(cluster: &Cluster, image: &ProgramImage) -> Vec<u32> {
    image
        .expected
        .iter()
        .flat_map(|(addr, words)| {
            (0..words.len()).map(move |i| addr + 4 * i as u32)
        })
        .map(|a| cluster.tcdm().read(a).unwrap_or(0))
        .collect()
}

pub fn run_image(kind: KernelKind, mode: Mode, image: &ProgramImage) -> Result<KernelRun, BenchError> {
    let (mut cluster, reboot_cycles) = Cluster::boot(mode, image)?;
    let result = cluster.run(DEFAULT_MAX_CYCLES);
    let exit_code = result.exit_code.ok_or(BenchError::Timeout {
        kind,
        mode: mode.name(),
        cycles: DEFAULT_MAX_CYCLES,
    })?;
    Ok(KernelRun { cycles: result.cycles, exit_code, reboot_cycles, output: output_region(&cluster, image) })
}

/// Builds `kind` for every hart of `mode` and runs it to completion.
pub fn run_kernel(kind: KernelKind, mode: Mode, seed: u64) -> Result<KernelRun, BenchError> {
    let image = gen_kernel(&KernelSpec::for_mode(kind, mode, seed))?;
    run_image(kind, mode, &image)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub kernel: KernelKind,
    pub tmr: KernelRun,
    pub performance: KernelRun,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.tmr.cycles as f64 / self.performance.cycles as f64
    }

    pub fn passed(&self) -> bool {
        self.tmr.exit_code == 0 && self.performance.exit_code == 0
    }
}

pub fn bench(seed: u64) -> Result<Vec<BenchRow>, BenchError> {
    KernelKind::ALL
        .into_iter()
        .map(|kernel| {
            Ok(BenchRow {
                kernel,
                tmr: run_kernel(kernel, Mode::Tmr, seed)?,
                performance: run_kernel(kernel, Mode::Performance, seed)?,
            })
        })
        .collect()
}

/// Speedup table, one row per kernel.
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<24} {:>12} {:>12} {:>8}", "Kernel", "TMR", "Performance", "Speedup");
    for row in rows {
        let _ = writeln!(
            s,
            "{:<24} {:>12} {:>12} {:>7.2}x{}",
            row.kernel.title(),
            row.tmr.cycles,
            row.performance.cycles,
            row.speedup(),
            if row.passed() { "" } else { "  FAILED" }
        );
    }
    s
}

/// CSV form of the table.
pub fn format_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("kernel,tmr_cycles,performance_cycles,speedup\n");
    for row in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.4}",
            row.kernel.name(),
            row.tmr.cycles,
            row.performance.cycles,
            row.speedup()
        );
    }
    s
}
