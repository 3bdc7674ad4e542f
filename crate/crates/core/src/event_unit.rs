// SPDX-License-Identifier: Apache-2.0

//! Barrier and wake-up logic shared by the logical harts.
//!
//! A hart enters a barrier by reading `BARRIER_WAIT`. The read is withheld
//! (the port sees a stall) until every participating hart has arrived, then
//! all waiting harts receive their response in the same cycle. A hart whose
//! wait was abandoned, e.g. by a re-synchronization interrupt, keeps its
//! release and gets an immediate answer when it retries.

/// Register offsets inside the event unit window.
pub mod reg {
    pub const BARRIER_TARGET: u32 = 0x00;
    pub const BARRIER_WAIT: u32 = 0x04;
    pub const ARRIVED: u32 = 0x08;
    pub const TRIGGER: u32 = 0x0c;
    pub const GENERATION: u32 = 0x10;
}

pub const MAX_HARTS: usize = 6;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct EventUnit {
    barrier_target: u32,
    arrived: u8,
    release_pending: u8,
    generation: u32,
    wake: u8,
}

impl EventUnit {
    pub fn new(barrier_target: u32) -> Self {
        EventUnit { barrier_target, ..Default::default() }
    }

    pub fn arrived(&self) -> u8 {
        self.arrived
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    /// Resolves all barrier reads presented this cycle; `waiting` has one bit
    /// per logical hart. Returns the harts whose read completes.
    pub fn barrier_cycle(&mut self, waiting: u8) -> u8 {
        let mut granted = waiting & self.release_pending;
        self.release_pending &= !granted;
        self.arrived |= waiting & !granted;
        if self.barrier_target > 0 && self.arrived.count_ones() >= self.barrier_target {
            granted |= self.arrived & waiting;
            self.release_pending |= self.arrived & !waiting;
            self.arrived = 0;
            self.generation = self.generation.wrapping_add(1);
        }
        granted
    }

    /// Wake pulses raised since the last call, one bit per logical hart.
    pub fn take_wake(&mut self) -> u8 {
        std::mem::take(&mut self.wake)
    }

    /// Plain register access. `BARRIER_WAIT` is handled by
    /// [`EventUnit::barrier_cycle`] and reads here as the generation count.
    pub fn reg_access(&mut self, offset: u32, write: bool, wdata: u32) -> Option<u32> {
        match (offset, write) {
            (reg::BARRIER_TARGET, false) => Some(self.barrier_target),
            (reg::BARRIER_TARGET, true) => {
                self.barrier_target = wdata.min(MAX_HARTS as u32);
                Some(0)
            }
            (reg::BARRIER_WAIT, false) | (reg::GENERATION, false) => Some(self.generation),
            (reg::ARRIVED, false) => Some(self.arrived as u32),
            (reg::TRIGGER, true) => {
                self.wake |= (wdata & 0x3f) as u8;
                Some(0)
            }
            (reg::TRIGGER, false) => Some(0),
            _ => None,
        }
    }
}
