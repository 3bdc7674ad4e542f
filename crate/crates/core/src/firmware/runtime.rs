// SPDX-License-Identifier: Apache-2.0

//! Boot code and parallel runtime shared by all kernels.
//!
//! TCDM layout:
//!
//! | region            | address                              |
//! |-------------------|--------------------------------------|
//! | per-hart results  | `RESULTS_BASE`, one word per hart    |
//! | kernel data       | `DATA_BASE` upwards                  |
//! | stacks            | top of TCDM, hart `h` below hart `h-1` |

use crate::cpu::Csr;
use crate::event_unit;
use crate::map;
use crate::odrg::{self, frame};

use super::FirmwareError;

pub const MAX_HARTS: usize = 6;
pub const RESULTS_BASE: u32 = map::TCDM_BASE;
pub const DATA_BASE: u32 = map::TCDM_BASE + 0x100;
pub const STACK_SIZE: u32 = 512;
pub const STACK_TOP: u32 = map::TCDM_END;
pub const STACKS_BASE: u32 = STACK_TOP - MAX_HARTS as u32 * STACK_SIZE;

/// Byte range `[start, end)` of hart `hart`'s stack.
pub fn stack_region(hart: usize) -> (u32, u32) {
    let top = STACK_TOP - hart as u32 * STACK_SIZE;
    (top - STACK_SIZE, top)
}

/// Fails if kernel data `[start, end)` reaches into the result slots or the
/// stacks.
pub fn check_layout(start: u32, end: u32) -> Result<(), FirmwareError> {
    if start < DATA_BASE || end > STACKS_BASE {
        return Err(FirmwareError::LayoutOverlap { start, end });
    }
    Ok(())
}

/// Entry code: harts below `ncores` take their stack, install the trap
/// handler, set the barrier size and jump to `kernel` with the hart id in
/// `a0`; the rest sleep in `park`.
///
/// `mtvec` resets to the entry point, so a trap taken before the handler is
/// installed lands here with a nonzero `mcause`. A resync interrupt in that
/// window completes the unload/reload handshake with a frame whose saved
/// `mepc` is `_start`, clears the architectural state and restarts the boot
/// sequence. Any other early trap is fatal.
pub fn runtime_prologue(ncores: usize) -> String {
    let mepc_slot = 4 * frame::csr_slot(Csr::Mepc);
    let mut s = format!(
        "\
_start:
    csrr a0, mcause
    bnez a0, early_trap
    csrr a0, mhartid
    li t0, {ncores}
    bgeu a0, t0, park
    li sp, {top:#x}
    slli t1, a0, {shift}
    sub sp, sp, t1
    la t1, resync_handler
    csrw mtvec, t1
    li t1, {eu:#x}
    sw t0, {target}(t1)
    j kernel
park:
    wfi
    j park
early_trap:
    mv x1, a0
    bgez a0, trap_fatal
    csrr a0, mhartid
    li sp, {top:#x}
    slli t1, a0, {shift}
    sub sp, sp, t1
    addi t2, sp, -{frame_bytes}
    la t1, _start
    sw t1, {mepc_slot}(t2)
    slli t3, a0, {odrg_shift}
    li t4, {odrg:#x}
    add t3, t3, t4
    sw t2, {sp_store}(t3)
    lw t2, {sp_store}(t3)
    lw t1, {mepc_slot}(t2)
    csrw mepc, t1
    la t1, _start
    csrw mtvec, t1
",
        top = STACK_TOP,
        shift = STACK_SIZE.trailing_zeros(),
        eu = map::EVENT_UNIT_BASE,
        target = event_unit::reg::BARRIER_TARGET,
        frame_bytes = frame::BYTES,
        odrg_shift = map::ODRG_WINDOW.trailing_zeros(),
        odrg = map::odrg_base(0),
        sp_store = odrg::reg::SP_STORE,
    );
    for csr in [Csr::Mstatus, Csr::Mcause, Csr::Mtval, Csr::Mscratch, Csr::Mie, Csr::Mip, Csr::Mcycle] {
        s += &format!("    csrw {}, x0\n", csr.name());
    }
    for i in 1..32 {
        s += &format!("    mv x{i}, x0\n");
    }
    s += "    mret\n";
    s
}

/// Row block of hart `a0`: `s0 = a0 * rows / ncores`,
/// `s1 = (a0 + 1) * rows / ncores`.
pub fn row_block(rows: usize, ncores: usize) -> String {
    format!(
        "\
    li t0, {rows}
    li t1, {ncores}
    mul t2, a0, t0
    divu s0, t2, t1
    add t2, t2, t0
    divu s1, t2, t1
"
    )
}

/// Compares output rows `[s0, s1)` with the expected copy, publishes the
/// mismatch count, waits at the barrier, and lets hart 0 write the verdict
/// (0 pass, 1 fail) to the exit register.
pub fn check_and_exit(out: u32, expected: u32, row_bytes: u32, ncores: usize) -> String {
    format!(
        "\
check:
    li t0, {row_bytes}
    mul t1, s0, t0
    mul t2, s1, t0
    li t3, {out:#x}
    add a1, t3, t1
    add a3, t3, t2
    li t3, {expected:#x}
    add a2, t3, t1
    li a5, 0
    beq a1, a3, report
check_loop:
    lw t0, 0(a1)
    lw t1, 0(a2)
    beq t0, t1, check_next
    addi a5, a5, 1
check_next:
    addi a1, a1, 4
    addi a2, a2, 4
    bne a1, a3, check_loop
report:
    li t0, {results:#x}
    slli t1, a0, 2
    add t0, t0, t1
    sw a5, 0(t0)
    li t0, {barrier:#x}
    lw t0, 0(t0)
    bnez a0, park
    li t0, {results:#x}
    li t1, 0
    li t2, {ncores}
sum_loop:
    lw t3, 0(t0)
    add t1, t1, t3
    addi t0, t0, 4
    addi t2, t2, -1
    bnez t2, sum_loop
    snez t1, t1
    li t0, {exit:#x}
    sw t1, 0(t0)
done:
    j done
",
        results = RESULTS_BASE,
        barrier = map::EVENT_UNIT_BASE + event_unit::reg::BARRIER_WAIT,
        exit = map::EXIT_ADDR,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacks_are_disjoint_and_inside_tcdm() {
        for a in 0..MAX_HARTS {
            let (s, e) = stack_region(a);
            assert!(s >= STACKS_BASE && e <= map::TCDM_END);
            for b in a + 1..MAX_HARTS {
                let (s2, e2) = stack_region(b);
                assert!(e2 <= s || e <= s2);
            }
        }
    }

    #[test]
    fn layout_check_rejects_stack_overlap() {
        assert!(check_layout(DATA_BASE, STACKS_BASE).is_ok());
        assert!(check_layout(DATA_BASE, STACKS_BASE + 4).is_err());
        assert!(check_layout(RESULTS_BASE, DATA_BASE + 4).is_err());
    }
}
