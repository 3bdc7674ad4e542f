// SPDX-License-Identifier: Apache-2.0

//! Single-issue, in-order RV32IM core with an explicit per-cycle interface.
//!
//! A [`Core`] never touches memory itself. Each call to [`Core::step`]
//! consumes the responses to the requests it emitted in the previous cycle
//! and returns the request bundle for the next one, so three cores fed
//! identical [`CoreInput`]s produce bit-identical [`CoreInterface`]s.
//!
//! Timing: one instruction per cycle; loads and stores complete in the cycle
//! after issue unless the interconnect stalls them; taken branches, jumps and
//! `mret` cost two cycles; `div`/`rem` cost [`DIV_CYCLES`].

use thiserror::Error;

use crate::isa::{self, AluOp, BranchOp, CsrOp, CsrSrc, Instr, LoadOp, MulOp, Reg, StoreOp};

pub const DIV_CYCLES: u32 = 37;
pub const JUMP_CYCLES: u32 = 2;

/// Interrupt cause used by the redundancy unit to start re-synchronization.
/// It cannot be masked.
pub const RESYNC_CAUSE: u8 = 30;

pub const MSTATUS_MIE: u32 = 1 << 3;
pub const MSTATUS_MPIE: u32 = 1 << 7;
pub const MCAUSE_INTERRUPT: u32 = 1 << 31;

/// Synchronous exception codes.
pub mod cause {
    pub const INSTR_MISALIGNED: u32 = 0;
    pub const INSTR_ACCESS_FAULT: u32 = 1;
    pub const ILLEGAL_INSTRUCTION: u32 = 2;
    pub const BREAKPOINT: u32 = 3;
    pub const LOAD_MISALIGNED: u32 = 4;
    pub const LOAD_ACCESS_FAULT: u32 = 5;
    pub const STORE_MISALIGNED: u32 = 6;
    pub const STORE_ACCESS_FAULT: u32 = 7;
    pub const ECALL_M: u32 = 11;
}

/// The machine-mode CSRs the core implements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Csr {
    Mstatus,
    Mtvec,
    Mepc,
    Mcause,
    Mtval,
    Mscratch,
    Mie,
    Mip,
    Mhartid,
    Mcycle,
}

/// CSRs written to the stack by the re-synchronization routine, in frame
/// order. Together with the 31 writable GPRs this is the 41-word save set.
pub const RESYNC_SAVE_CSRS: [Csr; 10] = [
    Csr::Mstatus,
    Csr::Mtvec,
    Csr::Mepc,
    Csr::Mcause,
    Csr::Mtval,
    Csr::Mscratch,
    Csr::Mie,
    Csr::Mip,
    Csr::Mhartid,
    Csr::Mcycle,
];

pub const CSR_COUNT: usize = RESYNC_SAVE_CSRS.len();

impl Csr {
    pub const ALL: [Csr; CSR_COUNT] = RESYNC_SAVE_CSRS;

    pub fn number(self) -> u16 {
        match self {
            Csr::Mstatus => 0x300,
            Csr::Mie => 0x304,
            Csr::Mtvec => 0x305,
            Csr::Mscratch => 0x340,
            Csr::Mepc => 0x341,
            Csr::Mcause => 0x342,
            Csr::Mtval => 0x343,
            Csr::Mip => 0x344,
            Csr::Mcycle => 0xb00,
            Csr::Mhartid => 0xf14,
        }
    }

    pub fn from_number(number: u16) -> Option<Csr> {
        Csr::ALL.into_iter().find(|c| c.number() == number)
    }

    pub fn name(self) -> &'static str {
        match self {
            Csr::Mstatus => "mstatus",
            Csr::Mtvec => "mtvec",
            Csr::Mepc => "mepc",
            Csr::Mcause => "mcause",
            Csr::Mtval => "mtval",
            Csr::Mscratch => "mscratch",
            Csr::Mie => "mie",
            Csr::Mip => "mip",
            Csr::Mhartid => "mhartid",
            Csr::Mcycle => "mcycle",
        }
    }

    pub fn from_name(name: &str) -> Option<Csr> {
        Csr::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn is_read_only(self) -> bool {
        self == Csr::Mhartid
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Architectural state of one hart.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ArchState {
    gpr: [u32; 31],
    pub pc: u32,
    csr: [u32; CSR_COUNT],
}

impl ArchState {
    /// Reset state: execution starts at `pc`, which is also the initial
    /// trap vector.
    pub fn new(pc: u32, hartid: u32) -> Self {
        let mut state = ArchState { pc, ..Default::default() };
        state.csr[Csr::Mhartid.slot()] = hartid;
        state.csr[Csr::Mtvec.slot()] = pc;
        state
    }

    pub fn reg(&self, r: Reg) -> u32 {
        match r.index() {
            0 => 0,
            i => self.gpr[i - 1],
        }
    }

    pub fn set_reg(&mut self, r: Reg, value: u32) {
        if r.index() != 0 {
            self.gpr[r.index() - 1] = value;
        }
    }

    pub fn csr(&self, csr: Csr) -> u32 {
        self.csr[csr.slot()]
    }

    /// Raw CSR write; bypasses the read-only check applied to software.
    pub fn set_csr(&mut self, csr: Csr, value: u32) {
        self.csr[csr.slot()] = value;
    }

    fn enter_trap(&mut self, mcause: u32, epc: u32, tval: u32) {
        let mstatus = self.csr(Csr::Mstatus);
        let mpie = if mstatus & MSTATUS_MIE != 0 { MSTATUS_MPIE } else { 0 };
        self.set_csr(Csr::Mstatus, (mstatus & !(MSTATUS_MIE | MSTATUS_MPIE)) | mpie);
        self.set_csr(Csr::Mepc, epc);
        self.set_csr(Csr::Mcause, mcause);
        self.set_csr(Csr::Mtval, tval);
        self.pc = self.csr(Csr::Mtvec) & !3;
    }

    /// Interrupt entry in direct mode.
    pub fn take_irq(&mut self, cause: u8) {
        let pc = self.pc;
        self.enter_trap(MCAUSE_INTERRUPT | (cause & 0x1f) as u32, pc, 0);
    }

    pub fn take_exception(&mut self, code: u32, tval: u32) {
        let pc = self.pc;
        self.enter_trap(code, pc, tval);
    }

    pub fn mret(&mut self) {
        let mstatus = self.csr(Csr::Mstatus);
        let mie = if mstatus & MSTATUS_MPIE != 0 { MSTATUS_MIE } else { 0 };
        self.set_csr(Csr::Mstatus, (mstatus & !MSTATUS_MIE) | mie | MSTATUS_MPIE);
        self.pc = self.csr(Csr::Mepc) & !3;
    }

    pub fn snapshot(&self) -> ArchSnapshot {
        let mut words = [0u32; SNAPSHOT_WORDS];
        words[..31].copy_from_slice(&self.gpr);
        words[31] = self.pc;
        words[32..].copy_from_slice(&self.csr);
        ArchSnapshot(words)
    }

    pub fn restore(snapshot: &ArchSnapshot) -> ArchState {
        let w = &snapshot.0;
        let mut state = ArchState { pc: w[31], ..Default::default() };
        state.gpr.copy_from_slice(&w[..31]);
        state.csr.copy_from_slice(&w[32..]);
        state
    }

    /// Inverts one bit of a register. Flipping `x0` is a no-op.
    pub fn flip_bit(&mut self, target: FlipTarget, bit: u8) -> Result<(), FlipError> {
        if bit > 31 {
            return Err(FlipError::BitOutOfRange(bit));
        }
        let mask = 1u32 << bit;
        match target {
            FlipTarget::Gpr(0) => {}
            FlipTarget::Gpr(i) if i < 32 => self.gpr[i as usize - 1] ^= mask,
            FlipTarget::Gpr(i) => return Err(FlipError::UnknownTarget(format!("x{i}"))),
            FlipTarget::Pc => self.pc ^= mask,
            FlipTarget::Csr(n) => {
                let csr = Csr::from_number(n)
                    .ok_or_else(|| FlipError::UnknownTarget(format!("csr {n:#x}")))?;
                self.csr[csr.slot()] ^= mask;
            }
        }
        Ok(())
    }
}

pub const SNAPSHOT_WORDS: usize = 31 + 1 + CSR_COUNT;

/// Flat image of an [`ArchState`]: x1..x31, pc, then the CSRs in save order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ArchSnapshot(pub [u32; SNAPSHOT_WORDS]);

impl ArchSnapshot {
    /// Number of differing bits between two snapshots.
    pub fn bit_distance(&self, other: &ArchSnapshot) -> u32 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a ^ b).count_ones()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FlipTarget {
    Gpr(u8),
    Pc,
    Csr(u16),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlipError {
    #[error("unknown fault target {0}")]
    UnknownTarget(String),
    #[error("bit index {0} out of range")]
    BitOutOfRange(u8),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct FetchReq {
    pub valid: bool,
    pub addr: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct DataReq {
    pub valid: bool,
    /// Word-aligned address.
    pub addr: u32,
    pub write: bool,
    pub byte_enable: u8,
    pub wdata: u32,
}

/// Everything a core drives towards the cluster in one cycle. Invalid
/// requests carry all-zero payloads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CoreInterface {
    pub fetch: FetchReq,
    pub data: DataReq,
    pub sleeping: bool,
}

/// The individual wires of a [`CoreInterface`], used to address
/// interface fault injection and to flatten the bundle for voting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    FetchValid,
    FetchAddr,
    DataValid,
    DataAddr,
    DataWrite,
    DataByteEnable,
    DataWdata,
    Sleeping,
}

impl Signal {
    pub const ALL: [Signal; 8] = [
        Signal::FetchValid,
        Signal::FetchAddr,
        Signal::DataValid,
        Signal::DataAddr,
        Signal::DataWrite,
        Signal::DataByteEnable,
        Signal::DataWdata,
        Signal::Sleeping,
    ];

    pub fn width(self) -> u8 {
        match self {
            Signal::FetchAddr | Signal::DataAddr | Signal::DataWdata => 32,
            Signal::DataByteEnable => 4,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Signal::FetchValid => "fetch_valid",
            Signal::FetchAddr => "fetch_addr",
            Signal::DataValid => "data_valid",
            Signal::DataAddr => "data_addr",
            Signal::DataWrite => "data_write",
            Signal::DataByteEnable => "data_byte_enable",
            Signal::DataWdata => "data_wdata",
            Signal::Sleeping => "sleeping",
        }
    }

    pub fn from_name(name: &str) -> Option<Signal> {
        Signal::ALL.into_iter().find(|s| s.name() == name)
    }
}

pub const INTERFACE_WORDS: usize = Signal::ALL.len();

impl CoreInterface {
    pub fn idle() -> Self {
        Self::default()
    }

    pub fn to_words(&self) -> [u32; INTERFACE_WORDS] {
        [
            self.fetch.valid as u32,
            self.fetch.addr,
            self.data.valid as u32,
            self.data.addr,
            self.data.write as u32,
            self.data.byte_enable as u32,
            self.data.wdata,
            self.sleeping as u32,
        ]
    }

    /// Rebuilds a bundle from flat words. Single-bit fields take bit 0 so a
    /// flipped high bit on a 1-bit wire has no effect, as in hardware.
    pub fn from_words(w: &[u32; INTERFACE_WORDS]) -> Self {
        CoreInterface {
            fetch: FetchReq { valid: w[0] & 1 != 0, addr: w[1] },
            data: DataReq {
                valid: w[2] & 1 != 0,
                addr: w[3],
                write: w[4] & 1 != 0,
                byte_enable: (w[5] & 0xf) as u8,
                wdata: w[6],
            },
            sleeping: w[7] & 1 != 0,
        }
    }

    pub fn flip(&mut self, signal: Signal, bit: u8) {
        let mut words = self.to_words();
        let index = Signal::ALL.iter().position(|s| *s == signal).unwrap();
        words[index] ^= 1u32 << (bit % signal.width());
        *self = CoreInterface::from_words(&words);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FetchRsp {
    pub valid: bool,
    pub instr: u32,
    pub err: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DataRsp {
    pub valid: bool,
    pub rdata: u32,
    pub err: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IrqLine {
    pub pending: bool,
    pub cause: u8,
}

impl IrqLine {
    pub fn resync() -> Self {
        IrqLine { pending: true, cause: RESYNC_CAUSE }
    }
}

/// Responses and side-band lines delivered to a core at the start of a cycle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CoreInput {
    pub fetch: FetchRsp,
    pub data: DataRsp,
    /// The data request issued last cycle was not granted.
    pub stall: bool,
    pub irq: IrqLine,
    /// Event-unit wake-up.
    pub wake: bool,
    pub hartid_override: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum MemKind {
    Load { op: LoadOp, rd: Reg },
    Store,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct PendingMem {
    pc: u32,
    addr: u32,
    kind: MemKind,
}

/// Micro-architectural state that is not software visible.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
struct Pipeline {
    out: CoreInterface,
    mem: Option<PendingMem>,
    busy: u32,
    sleeping: bool,
    event_pending: bool,
}

/// An instruction that started execution this cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Retired {
    pub pc: u32,
    pub instr: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub out: CoreInterface,
    pub retired: Option<Retired>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Core {
    pub arch: ArchState,
    pipe: Pipeline,
}

impl Core {
    pub fn new(boot_addr: u32, hartid: u32) -> Self {
        Core { arch: ArchState::new(boot_addr, hartid), pipe: Pipeline::default() }
    }

    pub fn interface(&self) -> CoreInterface {
        self.pipe.out
    }

    pub fn is_sleeping(&self) -> bool {
        self.pipe.sleeping
    }

    pub fn snapshot(&self) -> ArchSnapshot {
        self.arch.snapshot()
    }

    pub fn flip_bit(&mut self, target: FlipTarget, bit: u8) -> Result<(), FlipError> {
        self.arch.flip_bit(target, bit)
    }

    /// Advances the core by one cycle.
    pub fn step(&mut self, input: &CoreInput) -> Step {
        if input.irq.pending && input.irq.cause == RESYNC_CAUSE {
            return self.forced_resync_entry(input);
        }
        let held = Step { out: self.pipe.out, retired: None };
        if input.stall {
            return held;
        }
        if let Some(mem) = self.pipe.mem {
            if !input.data.valid {
                return held;
            }
            self.tick();
            self.pipe.mem = None;
            if input.data.err {
                let code = match mem.kind {
                    MemKind::Load { .. } => cause::LOAD_ACCESS_FAULT,
                    MemKind::Store => cause::STORE_ACCESS_FAULT,
                };
                self.arch.enter_trap(code, mem.pc, mem.addr);
                return self.emit_fetch(None);
            }
            self.complete_mem(mem, input.data.rdata);
        } else {
            let waiting_for_fetch = self.pipe.busy == 0
                && !self.pipe.sleeping
                && self.pipe.out.fetch.valid
                && !input.fetch.valid;
            if waiting_for_fetch {
                return held;
            }
            self.tick();
        }

        if self.pipe.busy > 0 {
            self.pipe.busy -= 1;
            return if self.pipe.busy == 0 { self.emit_fetch(None) } else { self.emit_idle() };
        }
        if self.pipe.sleeping {
            if input.wake || self.pipe.event_pending || self.maskable_irq(input) {
                self.pipe.sleeping = false;
                self.pipe.event_pending = false;
                return self.emit_fetch(None);
            }
            return self.emit_idle();
        }
        if input.wake {
            self.pipe.event_pending = true;
        }
        if self.maskable_irq(input) {
            self.arch.take_irq(input.irq.cause);
            return self.emit_fetch(None);
        }
        if !self.pipe.out.fetch.valid || !input.fetch.valid {
            return self.emit_fetch(None);
        }
        if input.fetch.err {
            let pc = self.arch.pc;
            self.arch.take_exception(cause::INSTR_ACCESS_FAULT, pc);
            return self.emit_fetch(None);
        }
        let retired = Retired { pc: self.arch.pc, instr: input.fetch.instr };
        let out = self.execute(input.fetch.instr, input.hartid_override);
        Step { out, retired: Some(retired) }
    }

    fn maskable_irq(&self, input: &CoreInput) -> bool {
        input.irq.pending && self.arch.csr(Csr::Mstatus) & MSTATUS_MIE != 0
    }

    fn tick(&mut self) {
        let c = self.arch.csr(Csr::Mcycle);
        self.arch.set_csr(Csr::Mcycle, c.wrapping_add(1));
    }

    /// Non-maskable entry: aborts any multi-cycle operation so all cores of a
    /// group leave this cycle with identical pipelines. An interrupted memory
    /// access that has not completed is re-executed after `mret`.
    fn forced_resync_entry(&mut self, input: &CoreInput) -> Step {
        let mut epc = self.arch.pc;
        if let Some(mem) = self.pipe.mem.take() {
            if !input.stall && input.data.valid && !input.data.err {
                self.complete_mem(mem, input.data.rdata);
            } else {
                epc = mem.pc;
            }
        }
        self.pipe.busy = 0;
        self.pipe.sleeping = false;
        self.pipe.event_pending = false;
        self.tick();
        self.arch.enter_trap(MCAUSE_INTERRUPT | RESYNC_CAUSE as u32, epc, 0);
        self.emit_fetch(None)
    }

    fn complete_mem(&mut self, mem: PendingMem, rdata: u32) {
        if let MemKind::Load { op, rd } = mem.kind {
            let shifted = rdata >> (8 * (mem.addr & 3));
            let value = match op {
                LoadOp::Lb => shifted as u8 as i8 as i32 as u32,
                LoadOp::Lbu => shifted as u8 as u32,
                LoadOp::Lh => shifted as u16 as i16 as i32 as u32,
                LoadOp::Lhu => shifted as u16 as u32,
                LoadOp::Lw => rdata,
            };
            self.arch.set_reg(rd, value);
        }
    }

    fn emit(&mut self, out: CoreInterface) -> Step {
        self.pipe.out = out;
        Step { out, retired: None }
    }

    fn emit_fetch(&mut self, data: Option<DataReq>) -> Step {
        self.emit(CoreInterface {
            fetch: FetchReq { valid: true, addr: self.arch.pc },
            data: data.unwrap_or_default(),
            sleeping: false,
        })
    }

    fn emit_idle(&mut self) -> Step {
        let sleeping = self.pipe.sleeping;
        self.emit(CoreInterface { sleeping, ..CoreInterface::idle() })
    }

    fn exception(&mut self, code: u32, tval: u32) -> CoreInterface {
        self.arch.take_exception(code, tval);
        self.emit_fetch(None).out
    }

    fn jump(&mut self, target: u32, link: Option<Reg>) -> CoreInterface {
        if target & 3 != 0 {
            return self.exception(cause::INSTR_MISALIGNED, target);
        }
        if let Some(rd) = link {
            let ret = self.arch.pc.wrapping_add(4);
            self.arch.set_reg(rd, ret);
        }
        self.arch.pc = target;
        self.pipe.busy = JUMP_CYCLES - 1;
        self.emit_idle().out
    }

    fn advance(&mut self) -> CoreInterface {
        self.arch.pc = self.arch.pc.wrapping_add(4);
        self.emit_fetch(None).out
    }

    fn execute(&mut self, word: u32, hartid_override: Option<u32>) -> CoreInterface {
        let pc = self.arch.pc;
        let r = |s: &Self, reg: Reg| s.arch.reg(reg);
        match isa::decode(word) {
            Instr::Illegal(w) => self.exception(cause::ILLEGAL_INSTRUCTION, w),
            Instr::Lui { rd, imm } => {
                self.arch.set_reg(rd, imm);
                self.advance()
            }
            Instr::Auipc { rd, imm } => {
                self.arch.set_reg(rd, pc.wrapping_add(imm));
                self.advance()
            }
            Instr::Jal { rd, offset } => self.jump(pc.wrapping_add(offset as u32), Some(rd)),
            Instr::Jalr { rd, rs1, offset } => {
                let target = r(self, rs1).wrapping_add(offset as u32) & !1;
                self.jump(target, Some(rd))
            }
            Instr::Branch { op, rs1, rs2, offset } => {
                let (a, b) = (r(self, rs1), r(self, rs2));
                let taken = match op {
                    BranchOp::Beq => a == b,
                    BranchOp::Bne => a != b,
                    BranchOp::Blt => (a as i32) < (b as i32),
                    BranchOp::Bge => (a as i32) >= (b as i32),
                    BranchOp::Bltu => a < b,
                    BranchOp::Bgeu => a >= b,
                };
                if taken {
                    self.jump(pc.wrapping_add(offset as u32), None)
                } else {
                    self.advance()
                }
            }
            Instr::Load { op, rd, rs1, offset } => {
                let addr = r(self, rs1).wrapping_add(offset as u32);
                if addr % op.width() != 0 {
                    return self.exception(cause::LOAD_MISALIGNED, addr);
                }
                self.pipe.mem = Some(PendingMem { pc, addr, kind: MemKind::Load { op, rd } });
                self.arch.pc = pc.wrapping_add(4);
                let req = DataReq { valid: true, addr: addr & !3, ..Default::default() };
                self.emit_fetch(Some(req)).out
            }
            Instr::Store { op, rs1, rs2, offset } => {
                let addr = r(self, rs1).wrapping_add(offset as u32);
                if addr % op.width() != 0 {
                    return self.exception(cause::STORE_MISALIGNED, addr);
                }
                let lane = addr & 3;
                let (mask, value) = match op {
                    StoreOp::Sb => (0b0001u8, r(self, rs2) & 0xff),
                    StoreOp::Sh => (0b0011, r(self, rs2) & 0xffff),
                    StoreOp::Sw => (0b1111, r(self, rs2)),
                };
                self.pipe.mem = Some(PendingMem { pc, addr, kind: MemKind::Store });
                self.arch.pc = pc.wrapping_add(4);
                let req = DataReq {
                    valid: true,
                    addr: addr & !3,
                    write: true,
                    byte_enable: mask << lane,
                    wdata: value << (8 * lane),
                };
                self.emit_fetch(Some(req)).out
            }
            Instr::OpImm { op, rd, rs1, imm } => {
                let v = alu(op, r(self, rs1), imm as u32);
                self.arch.set_reg(rd, v);
                self.advance()
            }
            Instr::Op { op, rd, rs1, rs2 } => {
                let v = alu(op, r(self, rs1), r(self, rs2));
                self.arch.set_reg(rd, v);
                self.advance()
            }
            Instr::MulDiv { op, rd, rs1, rs2 } => {
                let v = muldiv(op, r(self, rs1), r(self, rs2));
                self.arch.set_reg(rd, v);
                if op.is_divide() {
                    self.arch.pc = pc.wrapping_add(4);
                    self.pipe.busy = DIV_CYCLES - 1;
                    self.emit_idle().out
                } else {
                    self.advance()
                }
            }
            Instr::Csr { op, rd, src, csr } => {
                let Some(csr) = Csr::from_number(csr) else {
                    return self.exception(cause::ILLEGAL_INSTRUCTION, word);
                };
                let operand = match src {
                    CsrSrc::Reg(rs1) => r(self, rs1),
                    CsrSrc::Imm(v) => v as u32,
                };
                let writes = match (op, src) {
                    (CsrOp::Rw, _) => true,
                    (_, CsrSrc::Reg(rs1)) => rs1 != Reg::ZERO,
                    (_, CsrSrc::Imm(v)) => v != 0,
                };
                if writes && csr.is_read_only() {
                    return self.exception(cause::ILLEGAL_INSTRUCTION, word);
                }
                let old = match (csr, hartid_override) {
                    (Csr::Mhartid, Some(id)) => id,
                    _ => self.arch.csr(csr),
                };
                if writes {
                    let new = match op {
                        CsrOp::Rw => operand,
                        CsrOp::Rs => old | operand,
                        CsrOp::Rc => old & !operand,
                    };
                    self.arch.set_csr(csr, new);
                }
                self.arch.set_reg(rd, old);
                self.advance()
            }
            Instr::Fence => self.advance(),
            Instr::Ecall => self.exception(cause::ECALL_M, 0),
            Instr::Ebreak => self.exception(cause::BREAKPOINT, pc),
            Instr::Mret => {
                self.arch.mret();
                self.pipe.busy = JUMP_CYCLES - 1;
                self.emit_idle().out
            }
            Instr::Wfi => {
                self.arch.pc = pc.wrapping_add(4);
                if self.pipe.event_pending {
                    self.pipe.event_pending = false;
                    self.emit_fetch(None).out
                } else {
                    self.pipe.sleeping = true;
                    self.emit_idle().out
                }
            }
        }
    }
}

pub fn alu(op: AluOp, a: u32, b: u32) -> u32 {
    match op {
        AluOp::Add => a.wrapping_add(b),
        AluOp::Sub => a.wrapping_sub(b),
        AluOp::Sll => a << (b & 31),
        AluOp::Slt => ((a as i32) < (b as i32)) as u32,
        AluOp::Sltu => (a < b) as u32,
        AluOp::Xor => a ^ b,
        AluOp::Srl => a >> (b & 31),
        AluOp::Sra => ((a as i32) >> (b & 31)) as u32,
        AluOp::Or => a | b,
        AluOp::And => a & b,
    }
}

pub fn muldiv(op: MulOp, a: u32, b: u32) -> u32 {
    let (sa, sb) = (a as i32, b as i32);
    match op {
        MulOp::Mul => a.wrapping_mul(b),
        MulOp::Mulh => ((sa as i64 * sb as i64) >> 32) as u32,
        MulOp::Mulhsu => ((sa as i64 * b as i64) >> 32) as u32,
        MulOp::Mulhu => ((a as u64 * b as u64) >> 32) as u32,
        MulOp::Div => match b {
            0 => u32::MAX,
            _ => sa.wrapping_div(sb) as u32,
        },
        MulOp::Divu => a.checked_div(b).unwrap_or(u32::MAX),
        MulOp::Rem => match b {
            0 => a,
            _ => sa.wrapping_rem(sb) as u32,
        },
        MulOp::Remu => a.checked_rem(b).unwrap_or(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::encode;

    fn x(i: u8) -> Reg {
        Reg::new(i).unwrap()
    }

    fn fetched(instr: u32) -> CoreInput {
        CoreInput { fetch: FetchRsp { valid: true, instr, err: false }, ..Default::default() }
    }

    /// Core that has already issued the fetch for `pc`.
    fn primed(pc: u32) -> Core {
        let mut core = Core::new(pc, 0);
        core.step(&CoreInput::default());
        assert_eq!(core.interface().fetch, FetchReq { valid: true, addr: pc });
        core
    }

    fn addi(rd: u8, rs1: u8, imm: i32) -> u32 {
        encode(&Instr::OpImm { op: AluOp::Add, rd: x(rd), rs1: x(rs1), imm })
    }

    #[test]
    fn addi_writes_and_advances() {
        let mut core = primed(0x1000);
        let step = core.step(&fetched(addi(1, 0, 5)));
        assert_eq!(core.arch.reg(x(1)), 5);
        assert_eq!(core.arch.pc, 0x1004);
        assert_eq!(step.out.fetch, FetchReq { valid: true, addr: 0x1004 });
        assert_eq!(step.retired, Some(Retired { pc: 0x1000, instr: addi(1, 0, 5) }));
    }

    #[test]
    fn x0_stays_zero() {
        let mut core = primed(0x1000);
        core.step(&fetched(addi(0, 0, 7)));
        assert_eq!(core.arch.reg(Reg::ZERO), 0);
    }

    #[test]
    fn stall_freezes_everything() {
        let mut core = primed(0x1000);
        let before = core.clone();
        let mut input = fetched(addi(1, 0, 5));
        input.stall = true;
        let step = core.step(&input);
        assert_eq!(core, before);
        assert_eq!(step.out, before.interface());
        assert!(step.retired.is_none());
    }

    #[test]
    fn irq_entry_and_mret_round_trip() {
        let mut s = ArchState::new(0x1230, 0);
        s.set_csr(Csr::Mtvec, 0x100);
        s.set_csr(Csr::Mstatus, MSTATUS_MIE);
        s.take_irq(11);
        assert_eq!(s.csr(Csr::Mepc), 0x1230);
        assert_eq!(s.pc, 0x100);
        assert_eq!(s.csr(Csr::Mcause), MCAUSE_INTERRUPT | 11);
        assert_eq!(s.csr(Csr::Mstatus) & (MSTATUS_MIE | MSTATUS_MPIE), MSTATUS_MPIE);
        s.mret();
        assert_eq!(s.pc, 0x1230);
        assert_ne!(s.csr(Csr::Mstatus) & MSTATUS_MIE, 0);
    }

    #[test]
    fn resync_irq_is_not_maskable() {
        let mut core = primed(0x1000);
        core.arch.set_csr(Csr::Mtvec, 0x2000);
        let mut input = fetched(addi(1, 0, 5));
        input.irq = IrqLine::resync();
        let step = core.step(&input);
        assert_eq!(core.arch.pc, 0x2000);
        assert_eq!(core.arch.csr(Csr::Mepc), 0x1000);
        assert_eq!(core.arch.csr(Csr::Mcause), MCAUSE_INTERRUPT | RESYNC_CAUSE as u32);
        assert_eq!(core.arch.reg(x(1)), 0, "interrupted instruction must not execute");
        assert_eq!(step.out.fetch.addr, 0x2000);
    }

    #[test]
    fn maskable_irq_waits_for_mie() {
        let mut core = primed(0x1000);
        let mut input = fetched(addi(1, 0, 5));
        input.irq = IrqLine { pending: true, cause: 11 };
        core.step(&input);
        assert_eq!(core.arch.reg(x(1)), 5);
    }

    #[test]
    fn flip_bit_is_an_involution() {
        let mut s = ArchState::new(0x1000, 0);
        s.set_reg(x(5), 4);
        let original = s.clone();
        s.flip_bit(FlipTarget::Gpr(5), 0).unwrap();
        assert_eq!(s.reg(x(5)), 5);
        assert_eq!(s.snapshot().bit_distance(&original.snapshot()), 1);
        s.flip_bit(FlipTarget::Gpr(5), 0).unwrap();
        assert_eq!(s, original);
        s.flip_bit(FlipTarget::Gpr(0), 3).unwrap();
        assert_eq!(s, original);
        assert!(s.flip_bit(FlipTarget::Csr(0x7c0), 0).is_err());
    }

    #[test]
    fn pc_flip_moves_next_fetch() {
        let mut core = primed(0x1000);
        core.flip_bit(FlipTarget::Pc, 2).unwrap();
        let step = core.step(&fetched(addi(1, 0, 1)));
        assert_eq!(step.out.fetch.addr, 0x1008);
    }

    #[test]
    fn divide_takes_configured_cycles() {
        let mut core = primed(0x1000);
        core.arch.set_reg(x(2), 100);
        core.arch.set_reg(x(3), 7);
        let div = encode(&Instr::MulDiv { op: MulOp::Div, rd: x(1), rs1: x(2), rs2: x(3) });
        core.step(&fetched(div));
        let mut cycles = 1;
        while !core.interface().fetch.valid {
            core.step(&CoreInput::default());
            cycles += 1;
        }
        assert_eq!(cycles, DIV_CYCLES);
        assert_eq!(core.arch.reg(x(1)), 14);
    }

    #[test]
    fn load_sign_extends_byte_lane() {
        let mut core = primed(0x1000);
        core.arch.set_reg(x(2), 0x1000_0003);
        let lb = encode(&Instr::Load { op: LoadOp::Lb, rd: x(1), rs1: x(2), offset: 0 });
        let step = core.step(&fetched(lb));
        assert_eq!(step.out.data, DataReq { valid: true, addr: 0x1000_0000, ..Default::default() });
        let mut input = fetched(addi(0, 0, 0));
        input.data = DataRsp { valid: true, rdata: 0x8000_0000, err: false };
        core.step(&input);
        assert_eq!(core.arch.reg(x(1)), 0xffff_ff80);
    }

    #[test]
    fn misaligned_store_traps() {
        let mut core = primed(0x1000);
        core.arch.set_csr(Csr::Mtvec, 0x40);
        core.arch.set_reg(x(2), 0x1000_0002);
        let sw = encode(&Instr::Store { op: StoreOp::Sw, rs1: x(2), rs2: x(1), offset: 0 });
        let step = core.step(&fetched(sw));
        assert!(!step.out.data.valid);
        assert_eq!(core.arch.csr(Csr::Mcause), cause::STORE_MISALIGNED);
        assert_eq!(core.arch.csr(Csr::Mtval), 0x1000_0002);
        assert_eq!(core.arch.pc, 0x40);
    }

    #[test]
    fn mhartid_is_read_only_and_overridable() {
        let mut core = primed(0x1000);
        let read = encode(&Instr::Csr {
            op: CsrOp::Rs,
            rd: x(1),
            src: CsrSrc::Reg(Reg::ZERO),
            csr: Csr::Mhartid.number(),
        });
        let mut input = fetched(read);
        input.hartid_override = Some(1);
        core.step(&input);
        assert_eq!(core.arch.reg(x(1)), 1);

        core.arch.set_csr(Csr::Mtvec, 0x80);
        let write = encode(&Instr::Csr {
            op: CsrOp::Rw,
            rd: x(0),
            src: CsrSrc::Reg(x(1)),
            csr: Csr::Mhartid.number(),
        });
        core.step(&fetched(write));
        assert_eq!(core.arch.csr(Csr::Mcause), cause::ILLEGAL_INSTRUCTION);
    }

    #[test]
    fn division_edge_cases() {
        assert_eq!(muldiv(MulOp::Div, 7, 0), u32::MAX);
        assert_eq!(muldiv(MulOp::Rem, 7, 0), 7);
        assert_eq!(muldiv(MulOp::Div, i32::MIN as u32, u32::MAX), i32::MIN as u32);
        assert_eq!(muldiv(MulOp::Rem, i32::MIN as u32, u32::MAX), 0);
        assert_eq!(muldiv(MulOp::Mulhu, u32::MAX, u32::MAX), 0xffff_fffe);
        assert_eq!(muldiv(MulOp::Mulh, u32::MAX, u32::MAX), 0);
    }

    #[test]
    fn interface_word_round_trip() {
        let mut iface = CoreInterface {
            fetch: FetchReq { valid: true, addr: 0x1234 },
            data: DataReq { valid: true, addr: 0x1000_0040, write: true, byte_enable: 0xf, wdata: 9 },
            sleeping: false,
        };
        assert_eq!(CoreInterface::from_words(&iface.to_words()), iface);
        let original = iface;
        iface.flip(Signal::DataWdata, 3);
        assert_eq!(iface.data.wdata, 9 ^ 8);
        iface.flip(Signal::DataWdata, 3);
        assert_eq!(iface, original);
    }
}
