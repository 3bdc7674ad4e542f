// SPDX-License-Identifier: Apache-2.0

//! On-demand redundancy grouping unit for one group of three cores.
//!
//! In performance mode the unit is transparent. In TMR mode every output
//! wire of the three cores is majority-voted bit by bit, the result drives
//! the group leader's port, and the leader's responses are replicated to all
//! three cores. A mismatch between any core and the voted value starts a
//! re-synchronization episode: the cores are interrupted, spill their state
//! through the voter into memory, hand the frame pointer to `SP_STORE`, and
//! reload the corrected state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpu::{
    CoreInput, CoreInterface, Csr, DataReq, DataRsp, IrqLine, INTERFACE_WORDS, RESYNC_SAVE_CSRS,
};

pub const GROUP_SIZE: usize = 3;

/// Register offsets inside a unit's peripheral window.
pub mod reg {
    pub const MODE: u32 = 0x00;
    pub const RESYNC_DELAY: u32 = 0x04;
    pub const SP_STORE: u32 = 0x08;
    pub const MISMATCH_COUNT0: u32 = 0x0c;
    pub const MISMATCH_COUNT1: u32 = 0x10;
    pub const MISMATCH_COUNT2: u32 = 0x14;
    pub const STATUS: u32 = 0x18;
    pub const FORCE_RESYNC: u32 = 0x1c;
}

/// Layout of the stack frame written by the re-synchronization routine.
/// Slot `i` lives at `frame_base + 4 * i`.
pub mod frame {
    use crate::cpu::Csr;

    pub const WORDS: usize = 31 + super::RESYNC_SAVE_CSRS.len();
    pub const BYTES: u32 = WORDS as u32 * 4;

    /// Slot of general purpose register `x{index}` (1..=31).
    pub fn gpr_slot(index: usize) -> usize {
        debug_assert!((1..32).contains(&index));
        index - 1
    }

    pub fn csr_slot(csr: Csr) -> usize {
        31 + super::RESYNC_SAVE_CSRS.iter().position(|c| *c == csr).unwrap()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Performance,
    Tmr,
}

impl Mode {
    pub fn logical_harts(self) -> usize {
        match self {
            Mode::Performance => 6,
            Mode::Tmr => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Performance => "performance",
            Mode::Tmr => "tmr",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "performance" | "perf" => Ok(Mode::Performance),
            "tmr" => Ok(Mode::Tmr),
            other => Err(format!("unknown mode `{other}` (expected performance or tmr)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Fsm {
    #[default]
    Independent,
    TmrRun,
    TmrUnload,
    TmrReload,
}

impl Fsm {
    pub fn encoding(self) -> u32 {
        match self {
            Fsm::Independent => 0,
            Fsm::TmrRun => 1,
            Fsm::TmrUnload => 2,
            Fsm::TmrReload => 3,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RegError {
    #[error("bus error at ODRG offset {0:#x}")]
    BusError(u32),
}

/// Bitwise majority of three words plus, per input, whether it disagreed
/// with the voted value.
pub fn vote3(a: u32, b: u32, c: u32) -> (u32, [bool; 3]) {
    let voted = (a & b) | (b & c) | (a & c);
    (voted, [a != voted, b != voted, c != voted])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VoteResult {
    pub voted: CoreInterface,
    pub mismatch: [bool; 3],
}

/// Votes every wire of three interface bundles.
pub fn vote_interfaces(outs: &[CoreInterface; GROUP_SIZE]) -> VoteResult {
    let words = outs.map(|o| o.to_words());
    let mut voted = [0u32; INTERFACE_WORDS];
    let mut mismatch = [false; 3];
    for i in 0..INTERFACE_WORDS {
        let (v, m) = vote3(words[0][i], words[1][i], words[2][i]);
        voted[i] = v;
        for (flag, differs) in mismatch.iter_mut().zip(m) {
            *flag |= differs;
        }
    }
    VoteResult { voted: CoreInterface::from_words(&voted), mismatch }
}

/// A completed re-synchronization, in cluster cycles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResyncEpisode {
    pub irq_cycle: u64,
    pub done_cycle: u64,
}

impl ResyncEpisode {
    pub fn cycles(&self) -> u64 {
        self.done_cycle - self.irq_cycle
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct OdrgState {
    group: u32,
    mode_reg: Mode,
    latched: Mode,
    fsm: Fsm,
    mismatch_count: [u32; 3],
    resync_delay: u32,
    saved_sp: u32,
    pending_resync: Option<u32>,
    force_resync: bool,
    irq: bool,
    irq_cycle: Option<u64>,
    return_pc: Option<u32>,
    last_voted_data: DataReq,
    episodes: Vec<ResyncEpisode>,
    protocol_violations: u32,
}

/// Result of routing one cycle's core outputs through the unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Routed {
    pub external_out: [CoreInterface; GROUP_SIZE],
    pub mismatch: [bool; 3],
}

impl OdrgState {
    pub fn new(group: u32) -> Self {
        OdrgState { group, ..Default::default() }
    }

    pub fn group(&self) -> u32 {
        self.group
    }

    pub fn mode(&self) -> Mode {
        self.latched
    }

    pub fn mode_register(&self) -> Mode {
        self.mode_reg
    }

    pub fn fsm(&self) -> Fsm {
        self.fsm
    }

    pub fn mismatch_counts(&self) -> [u32; 3] {
        self.mismatch_count
    }

    pub fn resync_delay(&self) -> u32 {
        self.resync_delay
    }

    pub fn saved_sp(&self) -> u32 {
        self.saved_sp
    }

    pub fn episodes(&self) -> &[ResyncEpisode] {
        &self.episodes
    }

    pub fn protocol_violations(&self) -> u32 {
        self.protocol_violations
    }

    /// Cycle at which the current, unfinished episode raised its interrupt.
    pub fn open_episode(&self) -> Option<u64> {
        self.irq_cycle
    }

    pub fn resync_pending(&self) -> bool {
        self.pending_resync.is_some() || self.force_resync
    }

    pub fn set_mode_register(&mut self, mode: Mode) {
        self.mode_reg = mode;
    }

    pub fn set_resync_delay(&mut self, delay: u32) {
        self.resync_delay = delay;
    }

    /// Cluster reset: the MODE register takes effect, run-time state clears.
    pub fn reboot(&mut self) {
        *self = OdrgState {
            group: self.group,
            mode_reg: self.mode_reg,
            latched: self.mode_reg,
            fsm: match self.mode_reg {
                Mode::Performance => Fsm::Independent,
                Mode::Tmr => Fsm::TmrRun,
            },
            resync_delay: self.resync_delay,
            ..Default::default()
        };
    }

    /// Distributes the external responses to the three cores.
    pub fn route_inputs(&self, external_in: &[CoreInput; GROUP_SIZE]) -> [CoreInput; GROUP_SIZE] {
        match self.latched {
            Mode::Performance => *external_in,
            Mode::Tmr => {
                let mut shared = external_in[0];
                shared.hartid_override = Some(self.group);
                if self.irq {
                    shared.irq = IrqLine::resync();
                }
                [shared; GROUP_SIZE]
            }
        }
    }

    /// Drives the external ports from the three core outputs.
    pub fn route_outputs(&self, core_outs: &[CoreInterface; GROUP_SIZE]) -> Routed {
        match self.latched {
            Mode::Performance => Routed { external_out: *core_outs, mismatch: [false; 3] },
            Mode::Tmr => {
                let vote = vote_interfaces(core_outs);
                Routed {
                    external_out: [vote.voted, CoreInterface::idle(), CoreInterface::idle()],
                    mismatch: vote.mismatch,
                }
            }
        }
    }

    /// Both routing directions for one cycle.
    pub fn route(
        &self,
        core_outs: &[CoreInterface; GROUP_SIZE],
        external_in: &[CoreInput; GROUP_SIZE],
    ) -> (Routed, [CoreInput; GROUP_SIZE]) {
        (self.route_outputs(core_outs), self.route_inputs(external_in))
    }

    /// End-of-cycle update. `voted` is this cycle's voted output and
    /// `leader_rsp` the data response the leader port received at the start
    /// of this cycle.
    pub fn fsm_step(
        &mut self,
        cycle: u64,
        mismatch: [bool; 3],
        voted: &CoreInterface,
        leader_rsp: &DataRsp,
    ) {
        self.irq = false;
        if self.latched != Mode::Tmr {
            return;
        }
        for (count, differs) in self.mismatch_count.iter_mut().zip(mismatch) {
            if differs {
                *count = count.saturating_add(1);
            }
        }
        let detected = mismatch.iter().any(|m| *m) || std::mem::take(&mut self.force_resync);

        match self.fsm {
            Fsm::TmrRun => match self.pending_resync {
                Some(remaining) => {
                    if remaining <= 1 {
                        self.fire(cycle);
                    } else {
                        self.pending_resync = Some(remaining - 1);
                    }
                }
                None if detected => {
                    if self.resync_delay == 0 {
                        self.fire(cycle);
                    } else {
                        self.pending_resync = Some(self.resync_delay);
                    }
                }
                None => {}
            },
            Fsm::TmrUnload => {}
            Fsm::TmrReload => {
                let mepc_addr = self.saved_sp.wrapping_add(4 * frame::csr_slot(Csr::Mepc) as u32);
                let prev = self.last_voted_data;
                if prev.valid && !prev.write && prev.addr == mepc_addr && leader_rsp.valid {
                    self.return_pc = Some(leader_rsp.rdata & !3);
                }
                if voted.fetch.valid && Some(voted.fetch.addr) == self.return_pc {
                    self.fsm = Fsm::TmrRun;
                    if let Some(irq_cycle) = self.irq_cycle.take() {
                        self.episodes.push(ResyncEpisode { irq_cycle, done_cycle: cycle });
                    }
                    self.return_pc = None;
                }
            }
            Fsm::Independent => {}
        }
        self.last_voted_data = voted.data;
    }

    fn fire(&mut self, cycle: u64) {
        self.pending_resync = None;
        self.fsm = Fsm::TmrUnload;
        self.irq = true;
        self.irq_cycle = Some(cycle);
        self.return_pc = None;
    }

    /// Memory-mapped register access from the peripheral bus.
    pub fn reg_access(&mut self, offset: u32, write: bool, wdata: u32) -> Result<u32, RegError> {
        let count_index = |offset: u32| ((offset - reg::MISMATCH_COUNT0) / 4) as usize;
        match (offset, write) {
            (reg::MODE, false) => Ok(self.mode_reg as u32),
            (reg::MODE, true) => {
                self.mode_reg = if wdata & 1 != 0 { Mode::Tmr } else { Mode::Performance };
                Ok(0)
            }
            (reg::RESYNC_DELAY, false) => Ok(self.resync_delay),
            (reg::RESYNC_DELAY, true) => {
                self.resync_delay = wdata;
                Ok(0)
            }
            (reg::SP_STORE, false) => Ok(self.saved_sp),
            (reg::SP_STORE, true) => {
                if self.fsm == Fsm::TmrUnload {
                    self.saved_sp = wdata;
                    self.fsm = Fsm::TmrReload;
                } else {
                    self.protocol_violations += 1;
                }
                Ok(0)
            }
            (reg::MISMATCH_COUNT0 | reg::MISMATCH_COUNT1 | reg::MISMATCH_COUNT2, false) => {
                Ok(self.mismatch_count[count_index(offset)])
            }
            (reg::MISMATCH_COUNT0 | reg::MISMATCH_COUNT1 | reg::MISMATCH_COUNT2, true) => {
                self.mismatch_count[count_index(offset)] = 0;
                Ok(0)
            }
            (reg::STATUS, false) => Ok(self.fsm.encoding()),
            (reg::FORCE_RESYNC, false) => Ok(0),
            (reg::FORCE_RESYNC, true) => {
                if wdata & 1 != 0 && self.fsm == Fsm::TmrRun {
                    self.force_resync = true;
                }
                Ok(0)
            }
            _ => Err(RegError::BusError(offset)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpu::{FetchReq, Signal};

    fn tmr_unit(delay: u32) -> OdrgState {
        let mut unit = OdrgState::new(0);
        unit.set_mode_register(Mode::Tmr);
        unit.set_resync_delay(delay);
        unit.reboot();
        unit
    }

    fn busy_iface(pc: u32) -> CoreInterface {
        CoreInterface { fetch: FetchReq { valid: true, addr: pc }, ..Default::default() }
    }

    #[test]
    fn vote3_examples() {
        assert_eq!(vote3(5, 5, 5), (5, [false, false, false]));
        assert_eq!(vote3(5, 5, 7), (5, [false, false, true]));
        assert_eq!(vote3(0xff, 0x0f, 0xf0), (0xff, [false, true, true]));
    }

    #[test]
    fn tmr_votes_onto_leader_port_only() {
        let unit = tmr_unit(0);
        let good = busy_iface(0x1000);
        let mut bad = good;
        bad.flip(Signal::FetchAddr, 4);
        let routed = unit.route_outputs(&[good, bad, good]);
        assert_eq!(routed.external_out, [good, CoreInterface::idle(), CoreInterface::idle()]);
        assert_eq!(routed.mismatch, [false, true, false]);
    }

    #[test]
    fn performance_is_pass_through() {
        let unit = OdrgState::new(1);
        let outs = [busy_iface(0x1000), busy_iface(0x2000), busy_iface(0x3000)];
        let routed = unit.route_outputs(&outs);
        assert_eq!(routed.external_out, outs);
        let mut ins = [CoreInput::default(); 3];
        ins[2].data.rdata = 7;
        assert_eq!(unit.route_inputs(&ins), ins);
    }

    #[test]
    fn tmr_replicates_leader_input_with_hartid() {
        let mut unit = OdrgState::new(1);
        unit.set_mode_register(Mode::Tmr);
        unit.reboot();
        let mut ins = [CoreInput::default(); 3];
        ins[0].data.rdata = 42;
        ins[1].data.rdata = 99;
        let routed = unit.route_inputs(&ins);
        for input in routed {
            assert_eq!(input.data.rdata, 42);
            assert_eq!(input.hartid_override, Some(1));
        }
    }

    #[test]
    fn immediate_resync_without_delay() {
        let mut unit = tmr_unit(0);
        let iface = busy_iface(0x1000);
        unit.fsm_step(10, [false, true, false], &iface, &DataRsp::default());
        assert_eq!(unit.fsm(), Fsm::TmrUnload);
        assert_eq!(unit.mismatch_counts(), [0, 1, 0]);
        let ins = unit.route_inputs(&[CoreInput::default(); 3]);
        assert!(ins.iter().all(|i| i.irq == IrqLine::resync()));
        assert_eq!(unit.open_episode(), Some(10));
    }

    #[test]
    fn delayed_resync_fires_after_countdown() {
        let mut unit = tmr_unit(100);
        let iface = busy_iface(0x1000);
        unit.fsm_step(0, [true, false, false], &iface, &DataRsp::default());
        let mut fired = None;
        for cycle in 1..=200 {
            unit.fsm_step(cycle, [false; 3], &iface, &DataRsp::default());
            if unit.fsm() == Fsm::TmrUnload {
                fired = Some(cycle);
                break;
            }
        }
        assert_eq!(fired, Some(100));
    }

    #[test]
    fn quiet_cycles_change_nothing() {
        let mut unit = tmr_unit(0);
        let before = unit.clone();
        for cycle in 0..50 {
            unit.fsm_step(cycle, [false; 3], &busy_iface(0x1000), &DataRsp::default());
        }
        assert_eq!(unit.fsm(), Fsm::TmrRun);
        assert_eq!(unit.mismatch_counts(), [0; 3]);
        unit.last_voted_data = before.last_voted_data;
        assert_eq!(unit, before);
    }

    #[test]
    fn sp_store_outside_unload_is_ignored() {
        let mut unit = tmr_unit(0);
        unit.reg_access(reg::SP_STORE, true, 0x1000_f000).unwrap();
        assert_eq!(unit.saved_sp(), 0);
        assert_eq!(unit.fsm(), Fsm::TmrRun);
        assert_eq!(unit.protocol_violations(), 1);
    }

    #[test]
    fn full_episode_state_sequence() {
        let mut unit = tmr_unit(0);
        unit.reg_access(reg::FORCE_RESYNC, true, 1).unwrap();
        unit.fsm_step(5, [false; 3], &busy_iface(0x1100), &DataRsp::default());
        assert_eq!(unit.fsm(), Fsm::TmrUnload);
        unit.reg_access(reg::SP_STORE, true, 0x1000_f000).unwrap();
        assert_eq!(unit.fsm(), Fsm::TmrReload);

        let mepc_addr = 0x1000_f000 + 4 * frame::csr_slot(Csr::Mepc) as u32;
        let load = CoreInterface {
            data: DataReq { valid: true, addr: mepc_addr, ..Default::default() },
            ..busy_iface(0x2000)
        };
        unit.fsm_step(20, [false; 3], &load, &DataRsp::default());
        let rsp = DataRsp { valid: true, rdata: 0x1100, err: false };
        unit.fsm_step(21, [false; 3], &busy_iface(0x2004), &rsp);
        assert_eq!(unit.fsm(), Fsm::TmrReload);
        unit.fsm_step(30, [false; 3], &busy_iface(0x1100), &DataRsp::default());
        assert_eq!(unit.fsm(), Fsm::TmrRun);
        assert_eq!(unit.episodes(), &[ResyncEpisode { irq_cycle: 5, done_cycle: 30 }]);
    }

    #[test]
    fn register_file() {
        let mut unit = OdrgState::new(0);
        unit.reg_access(reg::MODE, true, 1).unwrap();
        assert_eq!(unit.reg_access(reg::MODE, false, 0), Ok(1));
        assert_eq!(unit.fsm(), Fsm::Independent, "mode only applies at reboot");
        unit.reg_access(reg::RESYNC_DELAY, true, 16).unwrap();
        assert_eq!(unit.reg_access(reg::RESYNC_DELAY, false, 0), Ok(16));
        unit.reboot();
        assert_eq!(unit.reg_access(reg::STATUS, false, 0), Ok(Fsm::TmrRun.encoding()));

        unit.fsm_step(0, [false, false, true], &CoreInterface::idle(), &DataRsp::default());
        assert_eq!(unit.reg_access(reg::MISMATCH_COUNT2, false, 0), Ok(1));
        unit.reg_access(reg::MISMATCH_COUNT2, true, 0).unwrap();
        assert_eq!(unit.reg_access(reg::MISMATCH_COUNT2, false, 0), Ok(0));

        assert_eq!(unit.reg_access(0x20, false, 0), Err(RegError::BusError(0x20)));
        assert_eq!(unit.reg_access(reg::STATUS, true, 0), Err(RegError::BusError(reg::STATUS)));
    }

    #[test]
    fn counters_saturate() {
        let mut unit = tmr_unit(u32::MAX);
        unit.mismatch_count = [u32::MAX - 1, 0, 0];
        for cycle in 0..3 {
            unit.fsm_step(cycle, [true, false, false], &CoreInterface::idle(), &DataRsp::default());
        }
        assert_eq!(unit.mismatch_counts()[0], u32::MAX);
    }

    #[test]
    fn frame_layout_is_41_words() {
        assert_eq!(frame::WORDS, 41);
        assert_eq!(frame::csr_slot(Csr::Mstatus), 31);
        assert_eq!(frame::csr_slot(Csr::Mcycle), 40);
    }
}
