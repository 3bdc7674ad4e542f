// SPDX-License-Identifier: Apache-2.0

//! Word-interleaved, multi-banked data memory behind a round-robin crossbar.

use thiserror::Error;

use crate::map::{TCDM_BASE, TCDM_SIZE};

pub const BANKS: usize = 16;
pub const WORDS_PER_BANK: usize = TCDM_SIZE as usize / 4 / BANKS;
pub const PORTS: usize = 6;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum TcdmError {
    #[error("address {0:#010x} is outside the TCDM")]
    OutOfRange(u32),
}

/// Bank and row of a TCDM byte address.
pub fn bank_route(addr: u32) -> Result<(usize, usize), TcdmError> {
    if !crate::map::in_tcdm(addr) {
        return Err(TcdmError::OutOfRange(addr));
    }
    let offset = addr - TCDM_BASE;
    Ok((((offset >> 2) as usize) % BANKS, (offset >> 6) as usize))
}

/// Grants at most one requester per bank. The winner is the first requesting
/// port at or after the bank's pointer, cyclically; after a contended grant
/// the pointer moves just past the winner.
pub fn arbitrate(requests: &[Option<usize>; PORTS], rr: &mut [u8; BANKS]) -> [bool; PORTS] {
    let mut grants = [false; PORTS];
    let mut seen = 0u32;
    for bank in requests.iter().flatten() {
        let bank = *bank;
        if seen & (1 << bank) != 0 {
            continue;
        }
        seen |= 1 << bank;
        let contenders = requests.iter().filter(|r| **r == Some(bank)).count();
        let start = rr[bank] as usize;
        let winner = (0..PORTS)
            .map(|i| (start + i) % PORTS)
            .find(|p| requests[*p] == Some(bank))
            .unwrap();
        grants[winner] = true;
        if contenders > 1 {
            rr[bank] = ((winner + 1) % PORTS) as u8;
        }
    }
    grants
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tcdm {
    /// Contents in address order.
    words: Vec<u32>,
    pub rr: [u8; BANKS],
}

impl Default for Tcdm {
    fn default() -> Self {
        Tcdm { words: vec![0; BANKS * WORDS_PER_BANK], rr: [0; BANKS] }
    }
}

impl Tcdm {
    fn index(addr: u32) -> Result<usize, TcdmError> {
        bank_route(addr)?;
        Ok(((addr - TCDM_BASE) >> 2) as usize)
    }

    pub fn read(&self, addr: u32) -> Result<u32, TcdmError> {
        Ok(self.words[Self::index(addr)?])
    }

    /// Writes the lanes selected by `byte_enable`.
    pub fn write(&mut self, addr: u32, wdata: u32, byte_enable: u8) -> Result<(), TcdmError> {
        let i = Self::index(addr)?;
        let mask = (0..4)
            .filter(|lane| byte_enable & (1 << lane) != 0)
            .fold(0u32, |m, lane| m | (0xff << (8 * lane)));
        self.words[i] = (self.words[i] & !mask) | (wdata & mask);
        Ok(())
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn load(&mut self, addr: u32, data: &[u32]) -> Result<(), TcdmError> {
        let start = Self::index(addr)?;
        if start + data.len() > self.words.len() {
            return Err(TcdmError::OutOfRange(addr + 4 * data.len() as u32));
        }
        self.words[start..start + data.len()].copy_from_slice(data);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
        self.rr = [0; BANKS];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleaving() {
        assert_eq!(bank_route(TCDM_BASE), Ok((0, 0)));
        assert_eq!(bank_route(TCDM_BASE + 0x04), Ok((1, 0)));
        assert_eq!(bank_route(TCDM_BASE + 0x40), Ok((0, 1)));
        assert_eq!(bank_route(TCDM_BASE + 0x3c), Ok((15, 0)));
        assert!(bank_route(TCDM_BASE + TCDM_SIZE).is_err());
        assert!(bank_route(0x1000).is_err());
    }

    #[test]
    fn lone_request_is_granted_without_moving_pointer() {
        let mut rr = [0; BANKS];
        let mut req = [None; PORTS];
        req[2] = Some(3);
        assert_eq!(arbitrate(&req, &mut rr), [false, false, true, false, false, false]);
        assert_eq!(rr, [0; BANKS]);
    }

    #[test]
    fn contended_grant_follows_pointer() {
        let mut rr = [0; BANKS];
        rr[0] = 2;
        let mut req = [None; PORTS];
        req[1] = Some(0);
        req[4] = Some(0);
        let grants = arbitrate(&req, &mut rr);
        assert!(grants[4] && !grants[1]);
        assert_eq!(rr[0], 5);
        let grants = arbitrate(&req, &mut rr);
        assert!(grants[1] && !grants[4]);
        assert_eq!(rr[0], 2);
    }

    #[test]
    fn distinct_banks_all_granted() {
        let mut rr = [0; BANKS];
        let req = [Some(0), Some(1), Some(2), Some(3), Some(4), Some(5)];
        assert_eq!(arbitrate(&req, &mut rr), [true; PORTS]);
    }

    #[test]
    fn partial_write_masks_lanes() {
        let mut t = Tcdm::default();
        t.write(TCDM_BASE + 8, 0xaabb_ccdd, 0xf).unwrap();
        t.write(TCDM_BASE + 8, 0x0000_1100, 0b0010).unwrap();
        assert_eq!(t.read(TCDM_BASE + 8), Ok(0xaabb_11dd));
    }
}
