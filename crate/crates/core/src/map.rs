// SPDX-License-Identifier: Apache-2.0

//! Cluster memory map.

pub const IMEM_BASE: u32 = 0x0000_1000;
pub const IMEM_SIZE: u32 = 64 * 1024;

pub const TCDM_BASE: u32 = 0x1000_0000;
pub const TCDM_SIZE: u32 = 64 * 1024;
pub const TCDM_END: u32 = TCDM_BASE + TCDM_SIZE;

pub const PERIPH_BASE: u32 = 0x1020_0000;
pub const PERIPH_SIZE: u32 = 0x1000;
pub const ODRG0_OFFSET: u32 = 0x000;
pub const ODRG1_OFFSET: u32 = 0x100;
pub const ODRG_WINDOW: u32 = 0x100;
pub const EVENT_UNIT_OFFSET: u32 = 0x800;
pub const CLUSTER_CTRL_OFFSET: u32 = 0xc00;
pub const EXIT_OFFSET: u32 = 0xff0;

pub const EXIT_ADDR: u32 = PERIPH_BASE + EXIT_OFFSET;
pub const EVENT_UNIT_BASE: u32 = PERIPH_BASE + EVENT_UNIT_OFFSET;
pub const CLUSTER_CTRL_BASE: u32 = PERIPH_BASE + CLUSTER_CTRL_OFFSET;

pub fn odrg_base(group: usize) -> u32 {
    PERIPH_BASE + ODRG0_OFFSET + group as u32 * ODRG_WINDOW
}

pub fn in_imem(addr: u32) -> bool {
    (IMEM_BASE..IMEM_BASE + IMEM_SIZE).contains(&addr)
}

pub fn in_tcdm(addr: u32) -> bool {
    (TCDM_BASE..TCDM_END).contains(&addr)
}

pub fn in_periph(addr: u32) -> bool {
    (PERIPH_BASE..PERIPH_BASE + PERIPH_SIZE).contains(&addr)
}

/// Cluster control registers.
pub mod ctrl {
    pub const NUM_HARTS: u32 = 0x00;
    pub const BOOT_ADDR: u32 = 0x04;
    pub const CYCLE_LO: u32 = 0x08;
    pub const CYCLE_HI: u32 = 0x0c;
}
