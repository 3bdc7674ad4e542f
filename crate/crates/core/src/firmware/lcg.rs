// SPDX-License-Identifier: Apache-2.0

//! Input generator for the benchmark kernels.
//!
//! A 64-bit linear congruential generator with Knuth's MMIX constants:
//! `state = state * 6364136223846793005 + 1442695040888963407` (mod 2^64),
//! advanced before every draw. Each draw is the upper 32 bits of the new
//! state. The generator is seeded with the kernel seed as initial state.

pub const MULTIPLIER: u64 = 6_364_136_223_846_793_005;
pub const INCREMENT: u64 = 1_442_695_040_888_963_407;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg { state: seed }
    }

    pub fn next_u32(&mut self) -> u32 {
        self.state = self.state.wrapping_mul(MULTIPLIER).wrapping_add(INCREMENT);
        (self.state >> 32) as u32
    }

    /// Upper 16 bits of the next draw, as a signed halfword.
    pub fn next_i16(&mut self) -> i16 {
        (self.next_u32() >> 16) as u16 as i16
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_draws_from_zero_seed() {
        let mut lcg = Lcg::new(0);
        // state1 = INCREMENT, state2 = INCREMENT * (MULTIPLIER + 1)
        assert_eq!(lcg.next_u32(), (INCREMENT >> 32) as u32);
        let s2 = INCREMENT.wrapping_mul(MULTIPLIER).wrapping_add(INCREMENT);
        assert_eq!(lcg.next_u32(), (s2 >> 32) as u32);
    }

    #[test]
    fn halfword_is_top_of_word() {
        let mut a = Lcg::new(99);
        let mut b = Lcg::new(99);
        for _ in 0..16 {
            assert_eq!(a.next_i16() as u16 as u32, b.next_u32() >> 16);
        }
    }
}
