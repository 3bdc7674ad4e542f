// SPDX-License-Identifier: Apache-2.0

//! Machine trap handler with the re-synchronization routine.
//!
//! On the resync interrupt every core of the group runs this routine in
//! lockstep. Stores go through the voter, so the frame in memory holds the
//! majority state. Writing the frame address to `SP_STORE` ends the unload
//! phase; the routine then reloads every word of the frame and returns with
//! `mret`. Synchronous exceptions are fatal and report `0x100 | mcause` on
//! the exit register.

use crate::cpu::RESYNC_SAVE_CSRS;
use crate::map;
use crate::odrg::{frame, reg};

pub const HANDLER_LABEL: &str = "resync_handler";

/// Exit code base for unexpected synchronous traps.
pub const FATAL_TRAP_EXIT: u32 = 0x100;

pub fn gen_resync_handler() -> String {
    let gpr_off = |i: usize| 4 * frame::gpr_slot(i);
    let csr_off = |k: usize| 4 * (31 + k);
    let mut s = String::new();
    let mut line = |text: String| {
        s.push_str(&text);
        s.push('\n');
    };

    line(format!("{HANDLER_LABEL}:"));
    line(format!("    addi sp, sp, -{}", frame::BYTES));
    line(format!("    sw x1, {}(sp)", gpr_off(1)));
    line("    csrr x1, mcause".into());
    line("    bge x1, x0, trap_fatal".into());
    line(format!("    addi x1, sp, {}", frame::BYTES));
    line(format!("    sw x1, {}(sp)", gpr_off(2)));
    for i in 3..32 {
        line(format!("    sw x{i}, {}(sp)", gpr_off(i)));
    }
    for (k, csr) in RESYNC_SAVE_CSRS.iter().enumerate() {
        line(format!("    csrr x1, {}", csr.name()));
        line(format!("    sw x1, {}(sp)", csr_off(k)));
    }

    // x3 = this group's ODRG window
    line("    mv x1, sp".into());
    line("    csrr x3, mhartid".into());
    line(format!("    slli x3, x3, {}", map::ODRG_WINDOW.trailing_zeros()));
    line(format!("    lui x4, {:#x}", map::odrg_base(0) >> 12));
    line("    add x3, x3, x4".into());
    line(format!("    sw x1, {}(x3)", reg::SP_STORE));
    line(format!("    lw x1, {}(x3)", reg::SP_STORE));

    for (k, csr) in RESYNC_SAVE_CSRS.iter().enumerate() {
        line(format!("    lw x2, {}(x1)", csr_off(k)));
        if !csr.is_read_only() {
            line(format!("    csrw {}, x2", csr.name()));
        }
    }
    for i in 3..32 {
        line(format!("    lw x{i}, {}(x1)", gpr_off(i)));
    }
    line(format!("    lw x2, {}(x1)", gpr_off(2)));
    line(format!("    lw x1, {}(x1)", gpr_off(1)));
    line("    mret".into());

    line("trap_fatal:".into());
    line(format!("    addi x1, x1, {FATAL_TRAP_EXIT:#x}"));
    let (hi, lo) = split(map::EXIT_ADDR);
    line(format!("    lui x3, {hi:#x}"));
    line(format!("    sw x1, {lo}(x3)"));
    line("trap_hang:".into());
    line("    j trap_hang".into());
    s
}

/// `lui`/offset pair addressing `addr`.
fn split(addr: u32) -> (u32, i32) {
    let lo = ((addr & 0xfff) as i32) << 20 >> 20;
    (addr.wrapping_sub(lo as u32) >> 12, lo)
}
