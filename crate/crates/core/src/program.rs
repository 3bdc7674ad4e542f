// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

/// A loadable program: code for the instruction memory plus initial and
/// expected TCDM contents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramImage {
    pub words: Vec<u32>,
    pub load_addr: u32,
    pub entry: u32,
    pub data_init: Vec<(u32, Vec<u32>)>,
    pub expected: Vec<(u32, Vec<u32>)>,
    /// Label addresses, for tooling and tests.
    #[serde(default)]
    pub symbols: Vec<(String, u32)>,
}

impl ProgramImage {
    pub fn symbol(&self, name: &str) -> Option<u32> {
        self.symbols.iter().find(|(n, _)| n == name).map(|(_, a)| *a)
    }

    pub fn code_end(&self) -> u32 {
        self.load_addr + 4 * self.words.len() as u32
    }

    pub fn data_words(&self) -> usize {
        self.data_init.iter().map(|(_, w)| w.len()).sum()
    }

    /// Word at a code address, if inside the image.
    pub fn word_at(&self, addr: u32) -> Option<u32> {
        let offset = addr.checked_sub(self.load_addr)?;
        self.words.get((offset / 4) as usize).copied()
    }
}
