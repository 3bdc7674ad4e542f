// SPDX-License-Identifier: Apache-2.0

//! Self-checking parallel benchmark kernels.
//!
//! Output rows are split into contiguous blocks, one per hart. Every hart
//! checks its own block against the expected copy embedded in the image;
//! after the final barrier hart 0 reports pass (0) or fail (1).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lcg::Lcg;
use super::runtime::{self, DATA_BASE};
use super::{handler, FirmwareError};
use crate::asm;
use crate::odrg::Mode;
use crate::program::ProgramImage;

pub const CONV_SIZE: usize = 32;
pub const CONV_TAPS: usize = 3;
const CONV_PADDED: usize = CONV_SIZE + CONV_TAPS - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "conv16")]
    Conv2D16,
    #[serde(rename = "matmul24")]
    MatMul24,
    #[serde(rename = "matmul32")]
    MatMul32,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Conv2D16, KernelKind::MatMul24, KernelKind::MatMul32];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Conv2D16 => "conv16",
            KernelKind::MatMul24 => "matmul24",
            KernelKind::MatMul32 => "matmul32",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            KernelKind::Conv2D16 => "16-bit 2D Convolution",
            KernelKind::MatMul24 => "32-bit 24x24 MatMul",
            KernelKind::MatMul32 => "32-bit 32x32 MatMul",
        }
    }

    /// Matrix dimension for the matmul kernels.
    pub fn matmul_size(self) -> Option<usize> {
        match self {
            KernelKind::Conv2D16 => None,
            KernelKind::MatMul24 => Some(24),
            KernelKind::MatMul32 => Some(32),
        }
    }

    /// Bytes of one output row.
    fn out_row_bytes(self) -> u32 {
        match self.matmul_size() {
            Some(n) => 4 * n as u32,
            None => 2 * CONV_SIZE as u32,
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = FirmwareError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| FirmwareError::UnknownKernel(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub ncores_logical: usize,
    pub seed: u64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, ncores_logical: usize, seed: u64) -> Self {
        KernelSpec { kind, ncores_logical, seed }
    }

    /// Uses every logical hart `mode` provides.
    pub fn for_mode(kind: KernelKind, mode: Mode, seed: u64) -> Self {
        KernelSpec::new(kind, mode.logical_harts(), seed)
    }
}

/// Input operands of a kernel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KernelInputs {
    /// Row-major `n`x`n` matrices.
    MatMul { n: usize, a: Vec<u32>, b: Vec<u32> },
    /// Row-major 3x3 weights and 32x32 image.
    Conv { weights: [i16; 9], input: Vec<i16> },
}

impl KernelInputs {
    /// Draws the operands from the seeded generator: `a` then `b` for the
    /// matmuls, the weights then the image for the convolution.
    pub fn generate(kind: KernelKind, seed: u64) -> Self {
        let mut lcg = Lcg::new(seed);
        match kind.matmul_size() {
            Some(n) => {
                let a = (0..n * n).map(|_| lcg.next_u32()).collect();
                let b = (0..n * n).map(|_| lcg.next_u32()).collect();
                KernelInputs::MatMul { n, a, b }
            }
            None => {
                let weights = std::array::from_fn(|_| lcg.next_i16());
                let input = (0..CONV_SIZE * CONV_SIZE).map(|_| lcg.next_i16()).collect();
                KernelInputs::Conv { weights, input }
            }
        }
    }

    fn fits(&self, kind: KernelKind) -> bool {
        match (self, kind.matmul_size()) {
            (KernelInputs::MatMul { n, a, b }, Some(size)) => {
                *n == size && a.len() == n * n && b.len() == n * n
            }
            (KernelInputs::Conv { input, .. }, None) => input.len() == CONV_SIZE * CONV_SIZE,
            _ => false,
        }
    }
}

/// Output region contents as stored in memory.
pub fn reference_output(inputs: &KernelInputs) -> Vec<u32> {
    match inputs {
        KernelInputs::MatMul { n, a, b } => {
            let n = *n;
            let mut c = vec![0u32; n * n];
            for i in 0..n {
                for j in 0..n {
                    c[i * n + j] = (0..n).fold(0u32, |acc, k| {
                        acc.wrapping_add(a[i * n + k].wrapping_mul(b[k * n + j]))
                    });
                }
            }
            c
        }
        KernelInputs::Conv { weights, input } => {
            let padded = pad(input);
            let mut out = vec![0u16; CONV_SIZE * CONV_SIZE];
            for r in 0..CONV_SIZE {
                for c in 0..CONV_SIZE {
                    let mut acc = 0u32;
                    for dr in 0..CONV_TAPS {
                        for dc in 0..CONV_TAPS {
                            let x = padded[(r + dr) * CONV_PADDED + c + dc] as i32 as u32;
                            let w = weights[dr * CONV_TAPS + dc] as i32 as u32;
                            acc = acc.wrapping_add(x.wrapping_mul(w));
                        }
                    }
                    out[r * CONV_SIZE + c] = acc as u16;
                }
            }
            pack_halves(&out)
        }
    }
}

fn pad(input: &[i16]) -> Vec<u16> {
    let mut padded = vec![0u16; CONV_PADDED * CONV_PADDED];
    for r in 0..CONV_SIZE {
        for c in 0..CONV_SIZE {
            padded[(r + 1) * CONV_PADDED + c + 1] = input[r * CONV_SIZE + c] as u16;
        }
    }
    padded
}

/// Little-endian packing of halfwords into words.
fn pack_halves(halves: &[u16]) -> Vec<u32> {
    halves
        .chunks(2)
        .map(|p| p[0] as u32 | (p.get(1).copied().unwrap_or(0) as u32) << 16)
        .collect()
}

fn align64(addr: u32) -> u32 {
    (addr + 63) & !63
}

pub fn gen_kernel(spec: &KernelSpec) -> Result<ProgramImage, FirmwareError> {
    gen_kernel_with(spec, &KernelInputs::generate(spec.kind, spec.seed))
}

/// Builds the kernel image for explicit operands.
pub fn gen_kernel_with(spec: &KernelSpec, inputs: &KernelInputs) -> Result<ProgramImage, FirmwareError> {
    let ncores = spec.ncores_logical;
    if ncores == 0 || ncores > runtime::MAX_HARTS {
        return Err(FirmwareError::BadHartCount(ncores));
    }
    if !inputs.fits(spec.kind) {
        return Err(FirmwareError::InputShape(spec.kind));
    }
    let expected = reference_output(inputs);
    let mut data: Vec<(&str, u32, Vec<u32>)> = Vec::new();
    let body = match inputs {
        KernelInputs::MatMul { n, a, b } => {
            let bytes = 4 * (n * n) as u32;
            let a_addr = DATA_BASE;
            let b_addr = a_addr + bytes;
            let c_addr = b_addr + bytes;
            data.push(("a", a_addr, a.clone()));
            data.push(("b", b_addr, b.clone()));
            data.push(("out", c_addr, Vec::new()));
            matmul_body(*n, a_addr, b_addr, c_addr)
        }
        KernelInputs::Conv { weights, input } => {
            let w_addr = DATA_BASE;
            let in_addr = w_addr + 0x40;
            let in_words = pack_halves(&pad(input));
            let out_addr = align64(in_addr + 4 * in_words.len() as u32);
            data.push(("weights", w_addr, weights.iter().map(|w| *w as i32 as u32).collect()));
            data.push(("input", in_addr, in_words));
            data.push(("out", out_addr, Vec::new()));
            conv_body(w_addr, in_addr, out_addr)
        }
    };
    let out_addr = data.iter().find(|d| d.0 == "out").unwrap().1;
    let expected_addr = align64(out_addr + 4 * expected.len() as u32);
    let data_end = expected_addr + 4 * expected.len() as u32;
    runtime::check_layout(DATA_BASE, data_end)?;

    let mut source = runtime::runtime_prologue(ncores);
    source.push_str("kernel:\n");
    source.push_str(&runtime::row_block(row_count(spec.kind), ncores));
    source.push_str(&body);
    source.push_str(&runtime::check_and_exit(out_addr, expected_addr, spec.kind.out_row_bytes(), ncores));
    source.push_str(&handler::gen_resync_handler());

    let mut image = asm::assemble(&source)?;
    for (name, addr, words) in &data {
        image.symbols.push((name.to_string(), *addr));
        if !words.is_empty() {
            image.data_init.push((*addr, words.clone()));
        }
    }
    image.symbols.push(("expected".into(), expected_addr));
    image.symbols.push(("results".into(), runtime::RESULTS_BASE));
    image.data_init.push((expected_addr, expected.clone()));
    image.expected.push((out_addr, expected));
    Ok(image)
}

fn row_count(kind: KernelKind) -> usize {
    kind.matmul_size().unwrap_or(CONV_SIZE)
}

/// Product `c = a * b`; the inner product is unrolled eight times.
fn matmul_body(n: usize, a: u32, b: u32, c: u32) -> String {
    const UNROLL: usize = 8;
    let rb = 4 * n;
    let mut s = format!(
        "\
    li s2, {a:#x}
    li s3, {b:#x}
    li s4, {c:#x}
    li s10, {n}
    mv s5, s0
mm_row:
    bgeu s5, s1, check
    li t0, {rb}
    mul t1, s5, t0
    add s7, s2, t1
    add s8, s4, t1
    li s9, 0
mm_col:
    slli t0, s9, 2
    add a1, s3, t0
    mv a2, s7
    addi a3, s7, {rb}
    li a4, 0
mm_k:
"
    );
    for u in 0..UNROLL {
        s += &format!(
            "    lw t0, {}(a2)\n    lw t1, {}(a1)\n    mul t0, t0, t1\n    add a4, a4, t0\n",
            4 * u,
            u * rb
        );
    }
    s += &format!(
        "\
    addi a2, a2, {}
    addi a1, a1, {}
    bne a2, a3, mm_k
    sw a4, 0(s8)
    addi s8, s8, 4
    addi s9, s9, 1
    bne s9, s10, mm_col
    addi s5, s5, 1
    j mm_row
",
        4 * UNROLL,
        UNROLL * rb
    );
    s
}

/// 3x3 correlation over the zero-padded image; weights live in s2..s10.
fn conv_body(w: u32, input: u32, out: u32) -> String {
    let in_rb = 2 * CONV_PADDED;
    let out_rb = 2 * CONV_SIZE;
    let mut s = format!("    li t0, {w:#x}\n");
    for k in 0..9 {
        s += &format!("    lw s{}, {}(t0)\n", k + 2, 4 * k);
    }
    s += &format!(
        "\
    mv s11, s0
conv_row:
    bgeu s11, s1, check
    li t0, {in_rb}
    mul t1, s11, t0
    li t0, {input:#x}
    add a1, t0, t1
    addi a2, a1, {out_rb}
    slli t1, s11, {shift}
    li t0, {out:#x}
    add a3, t0, t1
conv_col:
",
        shift = out_rb.trailing_zeros()
    );
    for dr in 0..CONV_TAPS {
        for dc in 0..CONV_TAPS {
            let k = dr * CONV_TAPS + dc;
            let off = dr * in_rb + 2 * dc;
            if k == 0 {
                s += &format!("    lh t0, {off}(a1)\n    mul a4, t0, s2\n");
            } else {
                s += &format!("    lh t0, {off}(a1)\n    mul t0, t0, s{}\n    add a4, a4, t0\n", k + 2);
            }
        }
    }
    s += "\
    sh a4, 0(a3)
    addi a1, a1, 2
    addi a3, a3, 2
    bne a1, a2, conv_col
    addi s11, s11, 1
    j conv_row
";
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_names_round_trip() {
        for k in KernelKind::ALL {
            assert_eq!(k.name().parse::<KernelKind>().unwrap(), k);
        }
        assert!("fft".parse::<KernelKind>().is_err());
    }

    #[test]
    fn images_assemble_for_both_hart_counts() {
        for kind in KernelKind::ALL {
            for n in [2, 6] {
                let image = gen_kernel(&KernelSpec::new(kind, n, 1)).unwrap();
                assert_eq!(image.entry, image.symbol("_start").unwrap());
                assert_eq!(image.expected.len(), 1);
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let spec = KernelSpec::new(KernelKind::MatMul24, 7, 1);
        assert!(matches!(gen_kernel(&spec), Err(FirmwareError::BadHartCount(7))));
        let spec = KernelSpec::new(KernelKind::MatMul24, 2, 1);
        let wrong = KernelInputs::generate(KernelKind::MatMul32, 1);
        assert!(matches!(gen_kernel_with(&spec, &wrong), Err(FirmwareError::InputShape(_))));
    }

    #[test]
    fn packing_is_little_endian() {
        assert_eq!(pack_halves(&[0x1111, 0x2222, 0x3333]), vec![0x2222_1111, 0x3333]);
    }
}
