// SPDX-License-Identifier: Apache-2.0

//! Single simulation runs configured from files and command-line flags.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asm::{self, AsmError};
use crate::bench::{DEFAULT_MAX_CYCLES, DEFAULT_SEED};
use crate::cluster::{Cluster, ClusterError, TraceWriter, GROUPS};
use crate::firmware::{gen_kernel, FirmwareError, KernelKind, KernelSpec};
use crate::odrg::Mode;
use crate::program::ProgramImage;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("give exactly one of a kernel or a program")]
    Usage,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("run config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Asm { path: PathBuf, source: AsmError },
    #[error(transparent)]
    Firmware(#[from] FirmwareError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Settings of one run. Every field is optional so that a config file and
/// command-line flags can be layered with [`RunConfig::overlay`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub kernel: Option<KernelKind>,
    pub program: Option<PathBuf>,
    pub trace: Option<bool>,
    pub max_cycles: Option<u64>,
    pub resync_delay: Option<u32>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| RunError::Config { path: path.to_path_buf(), message: e.to_string() })?;
        // program paths are relative to the config file
        if let (Some(program), Some(dir)) = (&config.program, path.parent()) {
            config.program = Some(dir.join(program));
        }
        Ok(config)
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        RunConfig {
            mode: top.mode.or(self.mode),
            kernel: top.kernel.or(self.kernel),
            program: top.program.or(self.program),
            trace: top.trace.or(self.trace),
            max_cycles: top.max_cycles.or(self.max_cycles),
            resync_delay: top.resync_delay.or(self.resync_delay),
            seed: top.seed.or(self.seed),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or_default()
    }

    pub fn max_cycles(&self) -> u64 {
        self.max_cycles.unwrap_or(DEFAULT_MAX_CYCLES)
    }

    /// Builds the program image to run.
    pub fn image(&self) -> Result<ProgramImage, RunError> {
        match (&self.kernel, &self.program) {
            (Some(kind), None) => {
                let spec = KernelSpec::for_mode(*kind, self.mode(), self.seed.unwrap_or(DEFAULT_SEED));
                Ok(gen_kernel(&spec)?)
            }
            (None, Some(path)) => load_program(path),
            _ => Err(RunError::Usage),
        }
    }
}

/// Reads and assembles an assembly source file.
pub fn load_program(path: &Path) -> Result<ProgramImage, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
    asm::assemble(&text).map_err(|source| RunError::Asm { path: path.to_path_buf(), source })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub cycles: u64,
    /// `None` if the program did not finish within the cycle limit.
    pub exit_code: Option<u32>,
    pub mismatch_counts: [[u32; 3]; GROUPS],
    pub resyncs: [usize; GROUPS],
    pub retired: [u64; crate::cluster::CORES],
}

impl RunSummary {
    /// Process exit status for this run: the exit register truncated to a
    /// byte (nonzero values stay nonzero), or 124 on timeout.
    pub fn process_status(&self) -> i32 {
        match self.exit_code {
            Some(0) => 0,
            Some(code) if code & 0xff == 0 => 1,
            Some(code) => (code & 0xff) as i32,
            None => 124,
        }
    }
}

/// Runs `config`, writing an instruction trace to `trace` if given.
pub fn execute(config: &RunConfig, trace: Option<&mut dyn Write>) -> Result<RunSummary, RunError> {
    let image = config.image()?;
    let mode = config.mode();
    let mut cluster = Cluster::new();
    for g in 0..GROUPS {
        cluster.odrg_mut(g).set_resync_delay(config.resync_delay.unwrap_or(0));
    }
    cluster.reset_and_boot(mode, &image, image.entry)?;
    let result = match trace {
        Some(out) => cluster.run_with(config.max_cycles(), &mut TraceWriter::new(out)),
        None => cluster.run(config.max_cycles()),
    };
    Ok(RunSummary {
        mode,
        cycles: result.cycles,
        exit_code: result.exit_code,
        mismatch_counts: std::array::from_fn(|g| cluster.odrg(g).mismatch_counts()),
        resyncs: std::array::from_fn(|g| cluster.odrg(g).episodes().len()),
        retired: cluster.retired_counts(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = RunConfig { mode: Some(Mode::Tmr), seed: Some(5), ..Default::default() };
        let flags = RunConfig { seed: Some(9), kernel: Some(KernelKind::Conv2D16), ..Default::default() };
        let merged = file.overlay(flags);
        assert_eq!(merged.mode, Some(Mode::Tmr));
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.kernel, Some(KernelKind::Conv2D16));
    }

    #[test]
    fn needs_exactly_one_source() {
        assert!(matches!(RunConfig::default().image(), Err(RunError::Usage)));
        let both = RunConfig {
            kernel: Some(KernelKind::MatMul24),
            program: Some("x.s".into()),
            ..Default::default()
        };
        assert!(matches!(both.image(), Err(RunError::Usage)));
    }

    #[test]
    fn status_mirrors_exit_register() {
        let mut s = RunSummary {
            mode: Mode::Tmr,
            cycles: 1,
            exit_code: Some(0),
            mismatch_counts: [[0; 3]; GROUPS],
            resyncs: [0; GROUPS],
            retired: [0; 6],
        };
        assert_eq!(s.process_status(), 0);
        s.exit_code = Some(0x100);
        assert_eq!(s.process_status(), 1);
        s.exit_code = Some(3);
        assert_eq!(s.process_status(), 3);
        s.exit_code = None;
        assert_eq!(s.process_status(), 124);
    }
}
