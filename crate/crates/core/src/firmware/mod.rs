// SPDX-License-Identifier: Apache-2.0

//! Software that runs on the cluster: boot code, the trap handler that
//! implements re-synchronization, and the benchmark kernels.

use thiserror::Error;

use crate::asm::AsmError;

pub mod handler;
pub mod kernels;
pub mod lcg;
pub mod runtime;

pub use handler::gen_resync_handler;
pub use kernels::{gen_kernel, gen_kernel_with, reference_output, KernelInputs, KernelKind, KernelSpec};
pub use runtime::runtime_prologue;

#[derive(Debug, Error)]
pub enum FirmwareError {
    #[error("unknown kernel `{0}` (expected conv16, matmul24 or matmul32)")]
    UnknownKernel(String),
    #[error("{0} harts requested; the cluster has between 1 and 6")]
    BadHartCount(usize),
    #[error("operands do not match the {0} kernel")]
    InputShape(KernelKind),
    #[error("kernel data {start:#x}..{end:#x} overlaps the runtime area")]
    LayoutOverlap { start: u32, end: u32 },
    #[error(transparent)]
    Asm(#[from] AsmError),
}
