// SPDX-License-Identifier: Apache-2.0

//! The six-core cluster and its per-cycle orchestration.
//!
//! One call to [`Cluster::cycle`] performs, in fixed order:
//! 1. ODRG input routing of last cycle's responses and interrupt lines,
//! 2. one step of every enabled core,
//! 3. ODRG output routing (voting in TMR mode),
//! 4. instruction fetch, TCDM arbitration and memory commit,
//! 5. peripheral and event-unit accesses, then the ODRG state machines.

use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::cpu::{ArchSnapshot, Core, CoreInput, CoreInterface, DataRsp, FetchRsp, Retired};
use crate::event_unit::{self, EventUnit};
use crate::isa;
use crate::map::{self, ctrl};
use crate::odrg::{Mode, OdrgState, GROUP_SIZE};
use crate::program::ProgramImage;
use crate::tcdm::{self, Tcdm, PORTS};

pub const CORES: usize = 6;
pub const GROUPS: usize = CORES / GROUP_SIZE;

/// Fixed cost of the reset controller in the reboot model.
pub const REBOOT_OVERHEAD_CYCLES: u64 = 1_000;
/// Registers the host writes per ODRG unit to configure it (MODE and
/// RESYNC_DELAY).
pub const HOST_CONFIG_WRITES: u64 = 2 * GROUPS as u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("program image of {words} words at {load_addr:#x} does not fit instruction memory")]
    ImageTooLarge { load_addr: u32, words: usize },
    #[error("data block at {0:#x} lies outside the TCDM")]
    DataOutOfRange(u32),
    #[error("boot address {0:#x} is not in instruction memory")]
    BadBootAddr(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CycleStatus {
    Running,
    /// The exit register was written this cycle.
    Halted(u32),
}

/// Observation points into the cycle loop. All methods default to no-ops.
pub trait Observer {
    fn retired(&mut self, _cycle: u64, _core: usize, _retired: Retired) {}

    /// Core outputs after stepping and before ODRG routing.
    fn core_outputs(&mut self, _cycle: u64, _outs: &mut [CoreInterface; CORES]) {}
}

impl Observer for () {}

/// Writes one `cycle,coreid,pc,instr_hex,disasm` line per executed instruction.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        TraceWriter { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Observer for TraceWriter<W> {
    fn retired(&mut self, cycle: u64, core: usize, r: Retired) {
        // tracing is best effort; a broken pipe must not stop the simulation
        let _ = writeln!(
            self.out,
            "{cycle},{core},{:#010x},{:08x},{}",
            r.pc,
            r.instr,
            isa::decode(r.instr)
        );
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunResult {
    pub exit_code: Option<u32>,
    pub cycles: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    cores: [Core; CORES],
    odrg: [OdrgState; GROUPS],
    tcdm: Tcdm,
    imem: Arc<Vec<u32>>,
    event_unit: EventUnit,
    boot_addr: u32,
    fetch_enable: [bool; CORES],
    cycle: u64,
    /// Responses to be delivered to each port at the start of the next cycle.
    port_rsp: [CoreInput; PORTS],
    exit_code: Option<u32>,
    retired: [u64; CORES],
}

impl Default for Cluster {
    fn default() -> Self {
        Cluster::new()
    }
}

impl Cluster {
    pub fn new() -> Self {
        Cluster {
            cores: Default::default(),
            odrg: [OdrgState::new(0), OdrgState::new(1)],
            tcdm: Tcdm::default(),
            imem: Arc::new(vec![0; (map::IMEM_SIZE / 4) as usize]),
            event_unit: EventUnit::default(),
            boot_addr: map::IMEM_BASE,
            fetch_enable: [false; CORES],
            cycle: 0,
            port_rsp: [CoreInput::default(); PORTS],
            exit_code: None,
            retired: [0; CORES],
        }
    }

    /// Builds a cluster, configures both ODRG units for `mode` and boots
    /// `image`. Returns the cluster and the modeled reboot cost in cycles.
    pub fn boot(mode: Mode, image: &ProgramImage) -> Result<(Cluster, u64), ClusterError> {
        let mut cluster = Cluster::new();
        let cost = cluster.reset_and_boot(mode, image, image.entry)?;
        Ok((cluster, cost))
    }

    /// Host-side reconfiguration followed by a cluster reboot. The ODRG mode
    /// is latched from the MODE register only here.
    pub fn reset_and_boot(
        &mut self,
        mode: Mode,
        image: &ProgramImage,
        boot_addr: u32,
    ) -> Result<u64, ClusterError> {
        let imem_words = (map::IMEM_SIZE / 4) as usize;
        let too_large = ClusterError::ImageTooLarge {
            load_addr: image.load_addr,
            words: image.words.len(),
        };
        if !map::in_imem(image.load_addr) || image.load_addr % 4 != 0 {
            return Err(too_large);
        }
        let start = ((image.load_addr - map::IMEM_BASE) / 4) as usize;
        if start + image.words.len() > imem_words {
            return Err(too_large);
        }
        if !map::in_imem(boot_addr) || boot_addr % 4 != 0 {
            return Err(ClusterError::BadBootAddr(boot_addr));
        }

        let mut imem = vec![0; imem_words];
        imem[start..start + image.words.len()].copy_from_slice(&image.words);
        self.imem = Arc::new(imem);
        self.tcdm.clear();
        for (addr, words) in &image.data_init {
            self.tcdm.load(*addr, words).map_err(|_| ClusterError::DataOutOfRange(*addr))?;
        }

        for unit in &mut self.odrg {
            unit.set_mode_register(mode);
            unit.reboot();
        }
        for (i, core) in self.cores.iter_mut().enumerate() {
            let hartid = match mode {
                Mode::Performance => i,
                Mode::Tmr => i / GROUP_SIZE,
            };
            *core = Core::new(boot_addr, hartid as u32);
        }
        self.event_unit = EventUnit::new(mode.logical_harts() as u32);
        self.boot_addr = boot_addr;
        self.fetch_enable = [true; CORES];
        self.cycle = 0;
        self.port_rsp = [CoreInput::default(); PORTS];
        self.exit_code = None;
        self.retired = [0; CORES];

        let copied = image.words.len() as u64 + image.data_words() as u64;
        Ok(REBOOT_OVERHEAD_CYCLES + HOST_CONFIG_WRITES + copied)
    }

    pub fn cycle_count(&self) -> u64 {
        self.cycle
    }

    pub fn mode(&self) -> Mode {
        self.odrg[0].mode()
    }

    pub fn exit_code(&self) -> Option<u32> {
        self.exit_code
    }

    pub fn core(&self, i: usize) -> &Core {
        &self.cores[i]
    }

    pub fn core_mut(&mut self, i: usize) -> &mut Core {
        &mut self.cores[i]
    }

    pub fn snapshots(&self) -> [ArchSnapshot; CORES] {
        std::array::from_fn(|i| self.cores[i].snapshot())
    }

    pub fn odrg(&self, group: usize) -> &OdrgState {
        &self.odrg[group]
    }

    pub fn odrg_mut(&mut self, group: usize) -> &mut OdrgState {
        &mut self.odrg[group]
    }

    pub fn tcdm(&self) -> &Tcdm {
        &self.tcdm
    }

    pub fn event_unit(&self) -> &EventUnit {
        &self.event_unit
    }

    /// Instructions started by each physical core since boot.
    pub fn retired_counts(&self) -> [u64; CORES] {
        self.retired
    }

    pub fn set_fetch_enable(&mut self, core: usize, enable: bool) {
        self.fetch_enable[core] = enable;
    }

    fn logical_hart(&self, port: usize) -> usize {
        match self.mode() {
            Mode::Performance => port,
            Mode::Tmr => port / GROUP_SIZE,
        }
    }

    fn leader_port(&self, hart: usize) -> usize {
        match self.mode() {
            Mode::Performance => hart,
            Mode::Tmr => hart * GROUP_SIZE,
        }
    }

    pub fn cycle(&mut self) -> CycleStatus {
        self.cycle_with(&mut ())
    }

    pub fn cycle_with<O: Observer>(&mut self, observer: &mut O) -> CycleStatus {
        let now = self.cycle;

        // 1-2: route inputs and step cores
        let mut outs = [CoreInterface::idle(); CORES];
        for g in 0..GROUPS {
            let base = g * GROUP_SIZE;
            let ext_in: [CoreInput; GROUP_SIZE] = std::array::from_fn(|i| self.port_rsp[base + i]);
            let core_in = self.odrg[g].route_inputs(&ext_in);
            for (i, input) in core_in.iter().enumerate() {
                let c = base + i;
                if !self.fetch_enable[c] {
                    continue;
                }
                let step = self.cores[c].step(input);
                outs[c] = step.out;
                if let Some(r) = step.retired {
                    self.retired[c] += 1;
                    observer.retired(now, c, r);
                }
            }
        }
        observer.core_outputs(now, &mut outs);

        // 3: output routing
        let mut ext_out = [CoreInterface::idle(); PORTS];
        let mut mismatch = [[false; GROUP_SIZE]; GROUPS];
        for g in 0..GROUPS {
            let base = g * GROUP_SIZE;
            let group_outs: [CoreInterface; GROUP_SIZE] = std::array::from_fn(|i| outs[base + i]);
            let routed = self.odrg[g].route_outputs(&group_outs);
            ext_out[base..base + GROUP_SIZE].copy_from_slice(&routed.external_out);
            mismatch[g] = routed.mismatch;
        }

        // 4-5: serve requests
        let mut rsp = [CoreInput::default(); PORTS];
        let mut bank_req = [None; PORTS];
        let mut barrier_ports = [None; PORTS];
        let mut halted = None;
        for (p, out) in ext_out.iter().enumerate() {
            if out.fetch.valid {
                rsp[p].fetch = self.fetch(out.fetch.addr);
            }
            let req = out.data;
            if !req.valid {
                continue;
            }
            if map::in_tcdm(req.addr) {
                bank_req[p] = tcdm::bank_route(req.addr).ok().map(|(bank, _)| bank);
            } else if map::in_periph(req.addr) {
                let offset = req.addr - map::PERIPH_BASE;
                if offset == map::EVENT_UNIT_OFFSET + event_unit::reg::BARRIER_WAIT && !req.write {
                    barrier_ports[p] = Some(self.logical_hart(p));
                    continue;
                }
                rsp[p].data = match self.periph_access(offset, req.write, req.wdata) {
                    Ok(rdata) => DataRsp { valid: true, rdata, err: false },
                    Err(_) => DataRsp { valid: true, rdata: 0, err: true },
                };
                if req.write && offset == map::EXIT_OFFSET && halted.is_none() {
                    halted = Some(req.wdata);
                }
            } else {
                rsp[p].data = DataRsp { valid: true, rdata: 0, err: true };
            }
        }

        let grants = tcdm::arbitrate(&bank_req, &mut self.tcdm.rr);
        for p in 0..PORTS {
            if bank_req[p].is_none() {
                continue;
            }
            if !grants[p] {
                rsp[p].stall = true;
                continue;
            }
            let req = ext_out[p].data;
            let rdata = if req.write {
                // the address was range-checked by bank_route
                self.tcdm.write(req.addr, req.wdata, req.byte_enable).unwrap();
                0
            } else {
                self.tcdm.read(req.addr).unwrap()
            };
            rsp[p].data = DataRsp { valid: true, rdata, err: false };
        }

        let waiting = barrier_ports.iter().flatten().fold(0u8, |m, h| m | (1 << h));
        if waiting != 0 {
            let released = self.event_unit.barrier_cycle(waiting);
            let generation = self.event_unit.generation();
            for p in 0..PORTS {
                if let Some(hart) = barrier_ports[p] {
                    if released & (1 << hart) != 0 {
                        rsp[p].data = DataRsp { valid: true, rdata: generation, err: false };
                    } else {
                        rsp[p].stall = true;
                    }
                }
            }
        }
        let wake = self.event_unit.take_wake();
        for hart in 0..self.mode().logical_harts() {
            if wake & (1 << hart) != 0 {
                rsp[self.leader_port(hart)].wake = true;
            }
        }

        for g in 0..GROUPS {
            let leader = g * GROUP_SIZE;
            let leader_rsp = self.port_rsp[leader].data;
            self.odrg[g].fsm_step(now, mismatch[g], &ext_out[leader], &leader_rsp);
        }

        self.port_rsp = rsp;
        self.cycle += 1;
        match halted {
            Some(code) => {
                self.exit_code.get_or_insert(code);
                CycleStatus::Halted(code)
            }
            None => CycleStatus::Running,
        }
    }

    fn fetch(&self, addr: u32) -> FetchRsp {
        if addr % 4 != 0 || !map::in_imem(addr) {
            return FetchRsp { valid: true, instr: 0, err: true };
        }
        let instr = self.imem[((addr - map::IMEM_BASE) / 4) as usize];
        FetchRsp { valid: true, instr, err: false }
    }

    /// Peripheral bus access at `offset` from the peripheral base.
    pub fn periph_access(&mut self, offset: u32, write: bool, wdata: u32) -> Result<u32, BusError> {
        let err = BusError(map::PERIPH_BASE + offset);
        match offset {
            o if o < map::ODRG1_OFFSET + map::ODRG_WINDOW => {
                let group = (o / map::ODRG_WINDOW) as usize;
                self.odrg[group].reg_access(o % map::ODRG_WINDOW, write, wdata).map_err(|_| err)
            }
            o if (map::EVENT_UNIT_OFFSET..map::EVENT_UNIT_OFFSET + 0x100).contains(&o) => {
                self.event_unit.reg_access(o - map::EVENT_UNIT_OFFSET, write, wdata).ok_or(err)
            }
            o if (map::CLUSTER_CTRL_OFFSET..map::CLUSTER_CTRL_OFFSET + 0x100).contains(&o) => {
                match (o - map::CLUSTER_CTRL_OFFSET, write) {
                    (ctrl::NUM_HARTS, false) => Ok(self.mode().logical_harts() as u32),
                    (ctrl::BOOT_ADDR, false) => Ok(self.boot_addr),
                    (ctrl::CYCLE_LO, false) => Ok(self.cycle as u32),
                    (ctrl::CYCLE_HI, false) => Ok((self.cycle >> 32) as u32),
                    _ => Err(err),
                }
            }
            map::EXIT_OFFSET => Ok(self.exit_code.unwrap_or(0)),
            _ => Err(err),
        }
    }

    /// Runs until the exit register is written or `max_cycles` elapse.
    pub fn run(&mut self, max_cycles: u64) -> RunResult {
        self.run_with(max_cycles, &mut ())
    }

    pub fn run_with<O: Observer>(&mut self, max_cycles: u64, observer: &mut O) -> RunResult {
        while self.cycle < max_cycles {
            if let CycleStatus::Halted(code) = self.cycle_with(observer) {
                return RunResult { exit_code: Some(code), cycles: self.cycle };
            }
        }
        RunResult { exit_code: None, cycles: self.cycle }
    }

    /// True when no ODRG unit is inside or about to start a resync episode.
    pub fn redundancy_settled(&self) -> bool {
        self.odrg.iter().all(|u| u.open_episode().is_none() && !u.resync_pending())
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("bus error at {0:#010x}")]
pub struct BusError(pub u32);
