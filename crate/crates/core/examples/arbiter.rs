//! Round-robin TCDM arbitration: three ports hammer one bank while a
//! fourth uses its own.
use odrg::tcdm::{arbitrate, BANKS, PORTS};

fn main() {
    let requests: [Option<usize>; PORTS] = [Some(5), None, Some(5), Some(9), Some(5), None];
    let mut rr = [0u8; BANKS];
    for cycle in 0..6 {
        let grants = arbitrate(&requests, &mut rr);
        let granted: Vec<usize> = (0..PORTS).filter(|p| grants[*p]).collect();
        println!("cycle {cycle}: granted {granted:?}, bank 5 pointer {}", rr[5]);
    }
}
